#include "tapml/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "tapml/float16.hpp"

namespace tapml {

size_t Tensor::shape_numel(const Shape& shape) {
  size_t n = 1;
  for (int64_t d : shape) n *= static_cast<size_t>(d);
  return n;
}

Tensor::Tensor(DType dtype, Shape shape) : dtype_(dtype), shape_(std::move(shape)) {
  if (shape_.size() > kMaxRank)
    throw Error(errc::shape_mismatch, "rank " + std::to_string(shape_.size()) + " exceeds cap of 4");
  for (int64_t d : shape_)
    if (d < 0) throw Error(errc::shape_mismatch, "negative extent in " + shape_str(shape_));
  data_.assign(shape_numel(shape_) * dtype_width(dtype_), 0);
}

Tensor::Tensor(DType dtype, Shape shape, std::vector<uint8_t> data)
    : Tensor(dtype, std::move(shape)) {
  if (data.size() != data_.size())
    throw Error(errc::shape_mismatch,
                "payload of " + std::to_string(data.size()) + " bytes, expected " +
                    std::to_string(data_.size()));
  data_ = std::move(data);
}

size_t Tensor::numel() const { return shape_numel(shape_); }

double Tensor::get(size_t i) const {
  const uint8_t* p = data_.data() + i * dtype_width(dtype_);
  switch (dtype_) {
    case DType::F64: {
      double v;
      std::memcpy(&v, p, 8);
      return v;
    }
    case DType::F32: {
      float v;
      std::memcpy(&v, p, 4);
      return v;
    }
    case DType::F16: {
      uint16_t b;
      std::memcpy(&b, p, 2);
      return fp16::bits_to_f32(b);
    }
    case DType::U8:
      return *p;
    case DType::I32: {
      int32_t v;
      std::memcpy(&v, p, 4);
      return v;
    }
    case DType::BOOL:
      return *p ? 1.0 : 0.0;
  }
  return 0.0;
}

void Tensor::set(size_t i, double v) {
  uint8_t* p = data_.data() + i * dtype_width(dtype_);
  switch (dtype_) {
    case DType::F64:
      std::memcpy(p, &v, 8);
      break;
    case DType::F32: {
      float f = static_cast<float>(v);
      std::memcpy(p, &f, 4);
      break;
    }
    case DType::F16: {
      uint16_t b = fp16::f32_to_bits(static_cast<float>(v));
      std::memcpy(p, &b, 2);
      break;
    }
    case DType::U8: {
      double r = std::nearbyint(v);
      *p = static_cast<uint8_t>(std::clamp(r, 0.0, 255.0));
      break;
    }
    case DType::I32: {
      int32_t w = static_cast<int32_t>(std::llround(v));
      std::memcpy(p, &w, 4);
      break;
    }
    case DType::BOOL:
      *p = (v != 0.0) ? 1 : 0;
      break;
  }
}

int64_t Tensor::get_int(size_t i) const {
  const uint8_t* p = data_.data() + i * dtype_width(dtype_);
  switch (dtype_) {
    case DType::U8:
      return *p;
    case DType::I32: {
      int32_t v;
      std::memcpy(&v, p, 4);
      return v;
    }
    case DType::BOOL:
      return *p ? 1 : 0;
    default:
      return static_cast<int64_t>(get(i));
  }
}

void Tensor::set_int(size_t i, int64_t v) { set(i, static_cast<double>(v)); }

Tensor Tensor::scalar(DType dtype, double v) {
  Tensor t(dtype, Shape{});
  t.set(0, v);
  return t;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

}  // namespace tapml
