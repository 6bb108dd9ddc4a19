#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cpinfer {

enum class errc {
  invalid_argument,
  out_of_range,
  dimension_mismatch,
  empty_segment,
  degenerate_jump,
  io,
  parse,
};

constexpr std::string_view to_string(errc code) noexcept {
  switch (code) {
    case errc::invalid_argument: return "invalid_argument";
    case errc::out_of_range: return "out_of_range";
    case errc::dimension_mismatch: return "dimension_mismatch";
    case errc::empty_segment: return "empty_segment";
    case errc::degenerate_jump: return "degenerate_jump";
    case errc::io: return "io";
    case errc::parse: return "parse";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

}  // namespace cpinfer
