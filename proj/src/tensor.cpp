#include "devgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "devgan/error.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace devgan {

#if defined(__GLIBC__)
namespace {
// Keep freed activation buffers in the heap. The default trim and mmap
// thresholds hand them back to the kernel every step and fault them in again.
const bool heap_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
  return true;
}();
}  // namespace
#endif

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::unsupported_isa: return "unsupported_isa";
    case ErrorCode::io: return "io";
    case ErrorCode::ppm_header: return "ppm_header";
    case ErrorCode::ppm_truncated: return "ppm_truncated";
    case ErrorCode::ppm_maxval: return "ppm_maxval";
    case ErrorCode::empty_dataset: return "empty_dataset";
    case ErrorCode::config_parse: return "config_parse";
    case ErrorCode::config_value: return "config_value";
    case ErrorCode::checkpoint_magic: return "checkpoint_magic";
    case ErrorCode::checkpoint_checksum: return "checkpoint_checksum";
    case ErrorCode::checkpoint_missing_network: return "checkpoint_missing_network";
    case ErrorCode::checkpoint_shape: return "checkpoint_shape";
    case ErrorCode::checkpoint_truncated: return "checkpoint_truncated";
    case ErrorCode::model_mismatch: return "model_mismatch";
    case ErrorCode::unknown_op: return "unknown_op";
    case ErrorCode::scope_violation: return "scope_violation";
  }
  return "unknown";
}

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (numel(shape_) != data_.size()) {
    throw Error(ErrorCode::shape_mismatch, "tensor shape " + shape_str(shape_) + " needs " +
                                               std::to_string(numel(shape_)) + " values, got " +
                                               std::to_string(data_.size()));
  }
}

Tensor::Tensor(Shape shape, std::initializer_list<double> data)
    : Tensor(std::move(shape), std::vector<double>(data)) {}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, std::vector<double>{value}); }

double Tensor::item() const {
  if (data_.size() != 1) {
    throw Error(ErrorCode::shape_mismatch, "item() on tensor of shape " + shape_str(shape_));
  }
  return data_[0];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace devgan
