#pragma once

#include <string>

#include "isfm/tensor.hpp"

namespace isfm {

/// Hex SHA-256 of the tensor's extents (u32 LE) followed by its values (f32 LE).
std::string sha256_hex(const Tensor& t);

}  // namespace isfm
