#include "isfm/color.hpp"

#include <algorithm>

namespace isfm {

namespace {

float clamp_unit(float v, bool& flag) {
    if (v < 0.0f) {
        flag = true;
        return 0.0f;
    }
    if (v > 1.0f) {
        flag = true;
        return 1.0f;
    }
    return v;
}

}  // namespace

YCbCr rgb_to_ycbcr(const Tensor& rgb) {
    require_chw(rgb, "rgb_to_ycbcr");
    if (rgb.channels() != 3) {
        throw DimensionError("rgb_to_ycbcr: expects [3,H,W], got " + to_string(rgb.shape()));
    }
    const std::size_t H = rgb.height();
    const std::size_t W = rgb.width();
    YCbCr out{Tensor({1, H, W}), Tensor({1, H, W}), Tensor({1, H, W}), false};
    auto r = rgb.channel(0);
    auto g = rgb.channel(1);
    auto b = rgb.channel(2);
    for (std::size_t i = 0; i < H * W; ++i) {
        const float R = clamp_unit(r[i], out.clamped);
        const float G = clamp_unit(g[i], out.clamped);
        const float B = clamp_unit(b[i], out.clamped);
        const float Y = 0.299f * R + 0.587f * G + 0.114f * B;
        out.y[i] = clamp_unit(Y, out.clamped);
        out.cb[i] = clamp_unit(0.5f + (B - Y) * 0.564f, out.clamped);
        out.cr[i] = clamp_unit(0.5f + (R - Y) * 0.713f, out.clamped);
    }
    return out;
}

RgbResult ycbcr_to_rgb(const Tensor& y, const Tensor& cb, const Tensor& cr) {
    require_chw(y, "ycbcr_to_rgb");
    require_same_shape(y, cb, "ycbcr_to_rgb");
    require_same_shape(y, cr, "ycbcr_to_rgb");
    if (y.channels() != 1) {
        throw DimensionError("ycbcr_to_rgb: planes must be [1,H,W], got " + to_string(y.shape()));
    }
    const std::size_t H = y.height();
    const std::size_t W = y.width();
    RgbResult out{Tensor({3, H, W}), false};
    auto r = out.rgb.channel(0);
    auto g = out.rgb.channel(1);
    auto b = out.rgb.channel(2);
    for (std::size_t i = 0; i < H * W; ++i) {
        const float Y = y[i];
        const float R = Y + (cr[i] - 0.5f) / 0.713f;
        const float B = Y + (cb[i] - 0.5f) / 0.564f;
        const float G = (Y - 0.299f * R - 0.114f * B) / 0.587f;
        r[i] = clamp_unit(R, out.clamped);
        g[i] = clamp_unit(G, out.clamped);
        b[i] = clamp_unit(B, out.clamped);
    }
    return out;
}

Tensor fuse_color(const Tensor& fused_y, const Tensor& cb, const Tensor& cr) {
    return ycbcr_to_rgb(fused_y, cb, cr).rgb;
}

}  // namespace isfm
