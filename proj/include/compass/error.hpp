#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace compass {

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  degenerate_input,
  bad_magic,
  unsupported_version,
  truncated,
  not_normalized,
  io_failure,
  parse_error,
  unknown_role,
  missing_key,
  kind_mismatch,
  coverage_unachievable,
  missing_hierarchy,
  unknown_id,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::degenerate_input: return "degenerate-input";
    case Errc::bad_magic: return "bad-magic";
    case Errc::unsupported_version: return "unsupported-version";
    case Errc::truncated: return "truncated";
    case Errc::not_normalized: return "not-normalized";
    case Errc::io_failure: return "io-failure";
    case Errc::parse_error: return "parse-error";
    case Errc::unknown_role: return "unknown-role";
    case Errc::missing_key: return "missing-key";
    case Errc::kind_mismatch: return "kind-mismatch";
    case Errc::coverage_unachievable: return "coverage-unachievable";
    case Errc::missing_hierarchy: return "missing-hierarchy";
    case Errc::unknown_id: return "unknown-id";
  }
  return "unknown";
}

// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Raised when the Butina threshold search cannot reach the requested coverage.
class CoverageError : public Error {
 public:
  CoverageError(double best_fraction, const std::string& message)
      : Error(Errc::coverage_unachievable, message), best_fraction_(best_fraction) {}

  [[nodiscard]] double best_fraction() const noexcept { return best_fraction_; }

 private:
  double best_fraction_;
};

inline void require(bool condition, Errc code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace compass
