#pragma once
// Versioned binary model files.
//
// Layout (all integers little-endian, reals IEEE-754 binary64 stored as
// their little-endian bit patterns):
//   magic        8 bytes  "MOYAPRED"
//   version      u16      1
//   byte order   u8       1 (little-endian)
//   real width   u8       8
//   record       u8       'M' bare model | 'F' model with scaler
//   ['F' only]   u32 column count, then per column
//                u64 index, f64 mean, f64 sd, u8 passthrough
//   kind         u8       1 ann | 2 svm | 3 forest
//   ann:    u64 input width, u64 hidden count, u64 widths...,
//           per layer: f64 weights (row-major, out x in), f64 bias
//   svm:    u64 width, u64 support count, f64 bias, f64 gamma,
//           f64 coefficients..., f64 support vectors (row-major)
//   forest: u64 width, u64 tree count, per tree: u64 node count, per node:
//           i32 feature, f64 threshold, u32 left, u32 right, u32 count0, u32 count1

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "moyapred/model.hpp"

namespace moyapred {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kModelFormatVersion = 1;

std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::string_view bytes);

std::string serialize_fitted(const FittedModel& fitted);
FittedModel deserialize_fitted(std::string_view bytes);

void save_fitted(const std::string& path, const FittedModel& fitted);
FittedModel load_fitted(const std::string& path);

// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace moyapred
