#include "isfm/wavelet.hpp"

#include <string>

namespace isfm {

WaveletBands dwt2(const Tensor& x) {
    require_chw(x, "dwt2");
    const std::size_t H = x.height();
    const std::size_t W = x.width();
    if (H % 2 != 0 || W % 2 != 0) {
        throw DimensionError("dwt2: extents must be even, got " + to_string(x.shape()) + " (pad first)");
    }
    const std::size_t C = x.channels();
    const std::size_t h = H / 2;
    const std::size_t w = W / 2;
    WaveletBands b{Tensor({C, h, w}), Tensor({C, h, w}), Tensor({C, h, w}), Tensor({C, h, w}), H, W};
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                const float a = x.at(c, 2 * i, 2 * j);
                const float bb = x.at(c, 2 * i, 2 * j + 1);
                const float cc = x.at(c, 2 * i + 1, 2 * j);
                const float d = x.at(c, 2 * i + 1, 2 * j + 1);
                const float s0 = a + bb;
                const float s1 = cc + d;
                const float d0 = a - bb;
                const float d1 = cc - d;
                b.ll.at(c, i, j) = 0.5f * (s0 + s1);
                b.lh.at(c, i, j) = 0.5f * (s0 - s1);
                b.hl.at(c, i, j) = 0.5f * (d0 + d1);
                b.hh.at(c, i, j) = 0.5f * (d0 - d1);
            }
        }
    }
    return b;
}

Tensor idwt2(const WaveletBands& b) {
    require_chw(b.ll, "idwt2");
    if (b.lh.shape() != b.ll.shape() || b.hl.shape() != b.ll.shape() || b.hh.shape() != b.ll.shape()) {
        throw DimensionError("idwt2: inconsistent band shapes " + to_string(b.ll.shape()) + ", " +
                             to_string(b.lh.shape()) + ", " + to_string(b.hl.shape()) + ", " +
                             to_string(b.hh.shape()));
    }
    const std::size_t C = b.ll.channels();
    const std::size_t h = b.ll.height();
    const std::size_t w = b.ll.width();
    Tensor out({C, 2 * h, 2 * w});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                const float ll = b.ll.at(c, i, j);
                const float lh = b.lh.at(c, i, j);
                const float hl = b.hl.at(c, i, j);
                const float hh = b.hh.at(c, i, j);
                const float p = ll + lh;
                const float q = ll - lh;
                const float r = hl + hh;
                const float s = hl - hh;
                out.at(c, 2 * i, 2 * j) = 0.5f * (p + r);
                out.at(c, 2 * i, 2 * j + 1) = 0.5f * (p - r);
                out.at(c, 2 * i + 1, 2 * j) = 0.5f * (q + s);
                out.at(c, 2 * i + 1, 2 * j + 1) = 0.5f * (q - s);
            }
        }
    }
    const std::size_t sh = b.source_h == 0 ? 2 * h : b.source_h;
    const std::size_t sw = b.source_w == 0 ? 2 * w : b.source_w;
    if (sh > 2 * h || sw > 2 * w || sh + 1 < 2 * h || sw + 1 < 2 * w) {
        throw DimensionError("idwt2: source extent " + std::to_string(sh) + "x" + std::to_string(sw) +
                             " incompatible with bands " + to_string(b.ll.shape()));
    }
    if (sh == 2 * h && sw == 2 * w) return out;
    return crop(out, sh, sw);
}

Tensor pad_to_even(const Tensor& x) {
    require_chw(x, "pad_to_even");
    const std::size_t H = x.height();
    const std::size_t W = x.width();
    const std::size_t PH = H + H % 2;
    const std::size_t PW = W + W % 2;
    if (PH == H && PW == W) return x;
    Tensor out({x.channels(), PH, PW});
    for (std::size_t c = 0; c < x.channels(); ++c) {
        for (std::size_t y = 0; y < PH; ++y) {
            const std::size_t sy = y < H ? y : H - 1;
            for (std::size_t xx = 0; xx < PW; ++xx) {
                out.at(c, y, xx) = x.at(c, sy, xx < W ? xx : W - 1);
            }
        }
    }
    return out;
}

Tensor crop(const Tensor& x, std::size_t h, std::size_t w) {
    require_chw(x, "crop");
    if (h == 0 || w == 0 || h > x.height() || w > x.width()) {
        throw DimensionError("crop: " + std::to_string(h) + "x" + std::to_string(w) + " exceeds " +
                             to_string(x.shape()));
    }
    Tensor out({x.channels(), h, w});
    for (std::size_t c = 0; c < x.channels(); ++c) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t xx = 0; xx < w; ++xx) out.at(c, y, xx) = x.at(c, y, xx);
        }
    }
    return out;
}

WaveletBands dwt2_padded(const Tensor& x) {
    require_chw(x, "dwt2_padded");
    WaveletBands b = dwt2(pad_to_even(x));
    b.source_h = x.height();
    b.source_w = x.width();
    return b;
}

}  // namespace isfm
