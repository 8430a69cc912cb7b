#pragma once

#include <cstddef>
#include <string>

#include "tapml/error.hpp"

namespace tapml {

enum class DType { F64, F32, F16, U8, I32, BOOL };

inline size_t dtype_width(DType t) {
  switch (t) {
    case DType::F64: return 8;
    case DType::F32: return 4;
    case DType::F16: return 2;
    case DType::U8: return 1;
    case DType::I32: return 4;
    case DType::BOOL: return 1;
  }
  return 0;
}

inline bool dtype_is_float(DType t) {
  return t == DType::F64 || t == DType::F32 || t == DType::F16;
}

inline const char* dtype_name(DType t) {
  switch (t) {
    case DType::F64: return "f64";
    case DType::F32: return "f32";
    case DType::F16: return "f16";
    case DType::U8: return "u8";
    case DType::I32: return "i32";
    case DType::BOOL: return "bool";
  }
  return "?";
}

inline DType dtype_from_name(const std::string& s) {
  if (s == "f64") return DType::F64;
  if (s == "f32") return DType::F32;
  if (s == "f16") return DType::F16;
  if (s == "u8") return DType::U8;
  if (s == "i32") return DType::I32;
  if (s == "bool") return DType::BOOL;
  throw Error(errc::parse_error, "unknown dtype '" + s + "'");
}

}  // namespace tapml
