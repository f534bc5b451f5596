#pragma once

#include <stdexcept>
#include <string>

namespace ssp {

/// Raised when a file payload violates its declared format.
class format_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an evaluation protocol leaves nothing to rank.
class protocol_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a training run must abort (non-finite loss, bad batch).
class training_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class load_errc {
  missing_file,
  bad_header,
  truncated,
  bad_value,
};

/// Loader failure with a machine-checkable kind.
class load_error : public format_error {
 public:
  load_error(load_errc kind, const std::string& msg)
      : format_error(msg), kind_(kind) {}
  load_errc kind() const { return kind_; }

 private:
  load_errc kind_;
};

}  // namespace ssp
