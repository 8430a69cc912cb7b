#pragma once

#include <cstdint>
#include <vector>

#include "tapml/dtype.hpp"

namespace tapml {

inline constexpr int kMaxRank = 4;

/// Dense row-major tensor, little-endian payload. The single value type
/// exchanged between backends, the carved-test corpus, and the wire.
class Tensor {
 public:
  Tensor() = default;
  Tensor(DType dtype, std::vector<int64_t> shape);
  Tensor(DType dtype, std::vector<int64_t> shape, std::vector<uint8_t> data);

  DType dtype() const { return dtype_; }
  const std::vector<int64_t>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t numel() const;
  size_t byte_size() const { return data_.size(); }

  const std::vector<uint8_t>& bytes() const { return data_; }
  std::vector<uint8_t>& bytes() { return data_; }

  /// Widening element read; F16 goes through the lossless widen path.
  double get(size_t i) const;
  /// Rounding element write: F32 and F16 round to nearest representable,
  /// integer dtypes round-and-clamp.
  void set(size_t i, double v);

  int64_t get_int(size_t i) const;
  void set_int(size_t i, int64_t v);

  bool same_signature(const Tensor& other) const {
    return dtype_ == other.dtype_ && shape_ == other.shape_;
  }
  bool operator==(const Tensor& other) const {
    return dtype_ == other.dtype_ && shape_ == other.shape_ && data_ == other.data_;
  }

  static Tensor scalar(DType dtype, double v);
  static size_t shape_numel(const std::vector<int64_t>& shape);

 private:
  DType dtype_ = DType::F32;
  std::vector<int64_t> shape_;
  std::vector<uint8_t> data_;
};

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& shape);

}  // namespace tapml
