#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "xalign/matrix.hpp"

namespace xalign {

inline constexpr size_t kSpectrumBins = 400;
inline constexpr double kEnergyLoKev = 0.5;
inline constexpr double kEnergyHiKev = 8.0;

enum class BinSpacing { Linear, Logarithmic };

// Photon count rate per bin over [0.5, 8.0] keV.
struct Spectrum {
  std::vector<double> bins;  // length 400
};

struct NormalizedSpectrum {
  std::vector<double> bins;  // length 400, in [0, 1]
  bool degenerate = false;   // constant input; bins forced to zero
};

struct PhotonEventList {
  std::vector<double> energies_kev;
  double exposure_s = 0.0;
};

struct BinnedSpectrum {
  Spectrum spectrum;
  size_t discarded_events = 0;  // outside [0.5, 8.0]
  bool empty_input = false;
};

// 400 equal-width bins over [0.5, 8.0) keV (lower-inclusive; the final bin
// additionally includes 8.0 exactly). Bin value = count / (exposure * width).
BinnedSpectrum bin_events(const PhotonEventList& events,
                          BinSpacing spacing = BinSpacing::Linear);

// (x - min) / (max - min); a constant spectrum yields all zeros with the
// degenerate flag set instead of NaNs.
NormalizedSpectrum minmax_normalize(const Spectrum& s);

// Raw/normalized spectra CSV: header `source_id,b0,...,b399`.
struct SpectrumTable {
  std::vector<std::string> ids;
  DenseMatrix bins;  // N x 400
};

SpectrumTable read_spectra_csv(const std::filesystem::path& path);
void write_spectra_csv(const std::filesystem::path& path, const SpectrumTable& table);

// Event list CSV: header `source_id,energy_kev` (one event per row);
// exposure manifest CSV: header `source_id,exposure_s`.
struct EventSet {
  std::vector<std::string> ids;           // unique source ids, first-seen order
  std::vector<PhotonEventList> events;    // aligned with ids
};

EventSet read_events_csv(const std::filesystem::path& events_path,
                         const std::filesystem::path& exposures_path);

}  // namespace xalign
