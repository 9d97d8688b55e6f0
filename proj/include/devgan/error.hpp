#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace devgan {

enum class ErrorCode {
  invalid_argument,
  shape_mismatch,
  non_finite,
  unsupported_isa,
  io,
  ppm_header,
  ppm_truncated,
  ppm_maxval,
  empty_dataset,
  config_parse,
  config_value,
  checkpoint_magic,
  checkpoint_checksum,
  checkpoint_missing_network,
  checkpoint_shape,
  checkpoint_truncated,
  model_mismatch,
  unknown_op,
  scope_violation,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace devgan
