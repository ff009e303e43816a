#pragma once

#include <stdexcept>
#include <string>

namespace fdaclass {

enum class errc {
  invalid_configuration,
  invalid_domain,
  rank_deficient_fit,
  out_of_domain,
  basis_mismatch,
  derivative_order_too_high,
  empty_sample,
  insufficient_data,
  basis_degenerate,
  k_out_of_range,
  two_class_only,
  invalid_k,
  invalid_priors,
  degenerate_covariance,
  fold_degenerate,
  invalid_split,
  format_error,
  parse_error,
};

inline const char* errc_name(errc code) noexcept {
  switch (code) {
    case errc::invalid_configuration: return "invalid-configuration";
    case errc::invalid_domain: return "invalid-domain";
    case errc::rank_deficient_fit: return "rank-deficient-fit";
    case errc::out_of_domain: return "out-of-domain";
    case errc::basis_mismatch: return "basis-mismatch";
    case errc::derivative_order_too_high: return "derivative-order-too-high";
    case errc::empty_sample: return "empty-sample";
    case errc::insufficient_data: return "insufficient-data";
    case errc::basis_degenerate: return "basis-degenerate";
    case errc::k_out_of_range: return "k-out-of-range";
    case errc::two_class_only: return "two-class-only";
    case errc::invalid_k: return "invalid-k";
    case errc::invalid_priors: return "invalid-priors";
    case errc::degenerate_covariance: return "degenerate-covariance";
    case errc::fold_degenerate: return "fold-degenerate";
    case errc::invalid_split: return "invalid-split";
    case errc::format_error: return "format-error";
    case errc::parse_error: return "parse-error";
  }
  return "unknown";
}

// All library failures are reported through this type; `code()` identifies
// the failure class independently of the human-readable message.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
  throw error(code, message);
}

}  // namespace fdaclass
