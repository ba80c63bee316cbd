#pragma once

#include "isfm/tensor.hpp"

namespace isfm {

/// BT.601 full-range planes, each [1,H,W].
struct YCbCr {
    Tensor y;
    Tensor cb;
    Tensor cr;
    /// Set when an input or output value had to be clamped into [0,1].
    bool clamped = false;
};

/// Y = 0.299R + 0.587G + 0.114B, Cb = 0.5 + 0.564(B - Y), Cr = 0.5 + 0.713(R - Y).
YCbCr rgb_to_ycbcr(const Tensor& rgb);

struct RgbResult {
    Tensor rgb;  // [3,H,W]
    bool clamped = false;
};

RgbResult ycbcr_to_rgb(const Tensor& y, const Tensor& cb, const Tensor& cr);

/// Fused luma with the visible image's chroma, clamped to [0,1].
Tensor fuse_color(const Tensor& fused_y, const Tensor& cb, const Tensor& cr);

}  // namespace isfm
