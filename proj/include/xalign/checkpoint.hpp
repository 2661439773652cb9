#pragma once

#include <filesystem>
#include <string>

#include "xalign/align.hpp"

namespace xalign {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr uint32_t kCheckpointFormatVersion = 1;

// Checkpoint layout: u32 little-endian JSON header length, the JSON header
// (head specs, temperature, shared_dim, versions), then one XALN v2 (f64)
// block per parameter tensor in header order. Parameters round-trip bitwise.
void save_checkpoint(const std::filesystem::path& path, const AlignmentModel& model);

AlignmentModel load_checkpoint(const std::filesystem::path& path);

}  // namespace xalign
