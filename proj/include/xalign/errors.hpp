#pragma once

#include <stdexcept>
#include <string>

namespace xalign {

// Error taxonomy shared by the whole library. The CLI maps kinds onto exit
// codes: Format/Shape/Numeric are data problems (exit 2), Parameter/Config/
// InsufficientData are configuration problems (exit 3), everything else is
// an internal or training failure (exit 1).
enum class ErrKind {
  Format,
  Shape,
  Numeric,
  Parameter,
  Validation,
  InsufficientData,
  Training,
  Config,
  Io,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  ErrKind kind() const noexcept { return kind_; }

 private:
  ErrKind kind_;
};

inline Error format_error(const std::string& m) { return {ErrKind::Format, m}; }
inline Error shape_error(const std::string& m) { return {ErrKind::Shape, m}; }
inline Error numeric_error(const std::string& m) { return {ErrKind::Numeric, m}; }
inline Error parameter_error(const std::string& m) { return {ErrKind::Parameter, m}; }
inline Error validation_error(const std::string& m) { return {ErrKind::Validation, m}; }
inline Error insufficient_data_error(const std::string& m) { return {ErrKind::InsufficientData, m}; }
inline Error training_error(const std::string& m) { return {ErrKind::Training, m}; }
inline Error config_error(const std::string& m) { return {ErrKind::Config, m}; }
inline Error io_error(const std::string& m) { return {ErrKind::Io, m}; }

}  // namespace xalign
