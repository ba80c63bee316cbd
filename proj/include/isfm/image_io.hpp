#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "isfm/tensor.hpp"

namespace isfm {

class ImageError : public std::runtime_error {
public:
    enum class Kind { Io, Format };
    ImageError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Reads an 8-bit PNG, PGM (P5) or PPM (P6). Returns [1,H,W] for gray and
/// [3,H,W] for color, values v/255.
Tensor read_image(const std::filesystem::path& path);

/// Writes [1,H,W] or [3,H,W] values in [0,1] as 8-bit, format chosen by the
/// extension (.png, .pgm, .ppm). Values are clamped and rounded.
void write_image(const std::filesystem::path& path, const Tensor& img);

/// Same quantization as the file writers.
std::uint8_t to_byte(float v);

/// True for the extensions read_image understands.
bool is_image_path(const std::filesystem::path& path);

}  // namespace isfm
