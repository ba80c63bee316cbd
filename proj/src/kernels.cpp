#include "isfm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "isfm/detail/stencil.hpp"
#include "isfm/parallel.hpp"

namespace isfm {

namespace {

constexpr std::size_t kRowBlock = 8;
constexpr std::size_t kPositionBlock = 64;

std::size_t out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// rows[g][x] += w[g] * in_row[x*stride + kx - pad] over the in-bounds range of x.
template <int G>
void accumulate_tap(float* const* rows, std::size_t out_w, const float* in_row, std::size_t in_w, const float* w,
                    std::size_t kx, std::size_t stride, std::size_t pad) {
    const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(pad);
    if (stride == 1) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -offset);
        const std::ptrdiff_t hi =
            std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_w), static_cast<std::ptrdiff_t>(in_w) - offset);
        const float* src = in_row + offset;
        if constexpr (G == 4) {
            float* __restrict r0 = rows[0];
            float* __restrict r1 = rows[1];
            float* __restrict r2 = rows[2];
            float* __restrict r3 = rows[3];
            const float w0 = w[0], w1 = w[1], w2 = w[2], w3 = w[3];
            for (std::ptrdiff_t x = lo; x < hi; ++x) {
                const float v = src[x];
                r0[x] += w0 * v;
                r1[x] += w1 * v;
                r2[x] += w2 * v;
                r3[x] += w3 * v;
            }
        } else {
            for (int g = 0; g < G; ++g) {
                float* __restrict r = rows[g];
                const float wg = w[g];
                for (std::ptrdiff_t x = lo; x < hi; ++x) r[x] += wg * src[x];
            }
        }
        return;
    }
    for (std::size_t x = 0; x < out_w; ++x) {
        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * stride) + offset;
        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(in_w)) {
            for (int g = 0; g < G; ++g) rows[g][x] += w[g] * in_row[ix];
        }
    }
}

void check_conv(const Tensor& x, const ConvParams& p, bool depthwise) {
    require_chw(x, "conv2d");
    if (p.weights.rank() != 4) {
        throw ConfigError("conv2d: weights must be [C_out,C_in,k,k], got " + to_string(p.weights.shape()));
    }
    if (p.weights.extent(2) != p.weights.extent(3)) {
        throw ConfigError("conv2d: kernel must be square, got " + to_string(p.weights.shape()));
    }
    if (p.stride == 0) {
        throw ConfigError("conv2d: stride must be positive");
    }
    const std::size_t expected_in = depthwise ? 1 : x.channels();
    if (p.weights.extent(1) != expected_in) {
        throw DimensionError("conv2d: input has " + std::to_string(x.channels()) + " channels, weights " +
                             to_string(p.weights.shape()));
    }
    if (depthwise && p.weights.extent(0) != x.channels()) {
        throw DimensionError("depthwise_conv2d: " + std::to_string(x.channels()) + " channels vs weights " +
                             to_string(p.weights.shape()));
    }
    if (p.bias.rank() != 1 || p.bias.extent(0) != p.weights.extent(0)) {
        throw DimensionError("conv2d: bias must be [C_out], got " + to_string(p.bias.shape()));
    }
    const std::size_t k = p.kernel_size();
    if (x.height() + 2 * p.padding < k || x.width() + 2 * p.padding < k) {
        throw DimensionError("conv2d: input " + to_string(x.shape()) + " smaller than kernel " + std::to_string(k));
    }
}

// Computes output rows [y0, y1) of output channels [o, o+G).
template <int G>
void conv_rows(const Tensor& x, const ConvParams& p, Tensor& out, std::size_t o, std::size_t y0, std::size_t y1,
               std::size_t in_first, std::size_t in_count) {
    const std::size_t k = p.kernel_size();
    const std::size_t H = x.height();
    const std::size_t W = x.width();
    const std::size_t OW = out.width();
    const float* wts = p.weights.data().data();
    const std::size_t w_stride_o = p.weights.extent(1) * k * k;

    for (int g = 0; g < G; ++g) {
        float* plane = out.channel(o + g).data();
        const float b = p.bias[o + g];
        for (std::size_t y = y0; y < y1; ++y) std::fill_n(plane + y * OW, OW, b);
    }
    float* rows[G];
    float w[G];
    for (std::size_t ii = 0; ii < in_count; ++ii) {
        const float* in_plane = x.channel(in_first + ii).data();
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                for (int g = 0; g < G; ++g) w[g] = wts[(o + g) * w_stride_o + (ii * k + ky) * k + kx];
                for (std::size_t y = y0; y < y1; ++y) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * p.stride + ky) -
                                              static_cast<std::ptrdiff_t>(p.padding);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                    for (int g = 0; g < G; ++g) rows[g] = out.channel(o + g).data() + y * OW;
                    accumulate_tap<G>(rows, OW, in_plane + static_cast<std::size_t>(iy) * W, W, w, kx, p.stride,
                                      p.padding);
                }
            }
        }
    }
}

constexpr std::size_t kTileOut = 4;
constexpr std::size_t kTileX = 8;

typedef float F4 __attribute__((vector_size(16)));

inline F4 splat(float v) { return F4{v, v, v, v}; }

inline F4 load4(const float* p) {
    F4 r;
    std::memcpy(&r, p, sizeof(r));
    return r;
}

// Stride-1 convolution on a zero-padded copy of the input. Each 4-channel x 8-pixel
// output tile is accumulated in registers: bias, then input channel, ky, kx ascending.
Tensor conv2d_stride1(const Tensor& x, const ConvParams& p) {
    const std::size_t k = p.kernel_size();
    const std::size_t pad = p.padding;
    const std::size_t C = x.channels();
    const std::size_t H = x.height();
    const std::size_t W = x.width();
    const std::size_t c_out = p.weights.extent(0);
    const std::size_t OH = H + 2 * pad - k + 1;
    const std::size_t OW = W + 2 * pad - k + 1;
    const std::size_t tiles_x = (OW + kTileX - 1) / kTileX;
    const std::size_t PH = OH + k - 1;
    const std::size_t PW = tiles_x * kTileX + k - 1;

    std::vector<float> xp(C * PH * PW, 0.0f);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t y = 0; y < H; ++y) {
            const float* src = x.channel(c).data() + y * W;
            std::copy(src, src + W, xp.begin() + static_cast<std::ptrdiff_t>((c * PH + y + pad) * PW + pad));
        }
    }
    const std::size_t taps = C * k * k;
    const std::size_t groups = c_out / kTileOut;
    std::vector<float> wp(groups * taps * kTileOut);
    const float* w = p.weights.data().data();
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t t = 0; t < taps; ++t) {
            for (std::size_t j = 0; j < kTileOut; ++j) {
                wp[(g * taps + t) * kTileOut + j] = w[(g * kTileOut + j) * taps + t];
            }
        }
    }

    Tensor out({c_out, OH, OW});
    float* dst = out.data().data();
    const float* bias = p.bias.data().data();
    parallel_for(static_cast<std::int64_t>(OH), [&](std::int64_t yy) {
        const auto y = static_cast<std::size_t>(yy);
        for (std::size_t g = 0; g < groups; ++g) {
            const float* wg = wp.data() + g * taps * kTileOut;
            for (std::size_t xt = 0; xt < tiles_x; ++xt) {
                F4 acc[kTileOut][2];
                for (std::size_t j = 0; j < kTileOut; ++j) {
                    acc[j][0] = splat(bias[g * kTileOut + j]);
                    acc[j][1] = acc[j][0];
                }
                const float* wt = wg;
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const float* row = xp.data() + (c * PH + y + ky) * PW + xt * kTileX;
                        for (std::size_t kx = 0; kx < k; ++kx, wt += kTileOut) {
                            const F4 s0 = load4(row + kx);
                            const F4 s1 = load4(row + kx + 4);
                            for (std::size_t j = 0; j < kTileOut; ++j) {
                                const F4 wj = splat(wt[j]);
                                acc[j][0] += wj * s0;
                                acc[j][1] += wj * s1;
                            }
                        }
                    }
                }
                const std::size_t nv = std::min(kTileX, OW - xt * kTileX);
                for (std::size_t j = 0; j < kTileOut; ++j) {
                    float tile[kTileX];
                    std::memcpy(tile, &acc[j][0], sizeof(F4));
                    std::memcpy(tile + 4, &acc[j][1], sizeof(F4));
                    float* o = dst + ((g * kTileOut + j) * OH + y) * OW + xt * kTileX;
                    std::copy_n(tile, nv, o);
                }
            }
        }
        for (std::size_t oc = groups * kTileOut; oc < c_out; ++oc) {
            const float* wo = w + oc * taps;
            for (std::size_t xt = 0; xt < tiles_x; ++xt) {
                float acc[kTileX];
                for (std::size_t v = 0; v < kTileX; ++v) acc[v] = bias[oc];
                const float* wt = wo;
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const float* row = xp.data() + (c * PH + y + ky) * PW + xt * kTileX;
                        for (std::size_t kx = 0; kx < k; ++kx, ++wt) {
                            const float wj = *wt;
                            for (std::size_t v = 0; v < kTileX; ++v) acc[v] += wj * row[kx + v];
                        }
                    }
                }
                const std::size_t nv = std::min(kTileX, OW - xt * kTileX);
                float* o = dst + (oc * OH + y) * OW + xt * kTileX;
                for (std::size_t v = 0; v < nv; ++v) o[v] = acc[v];
            }
        }
    });
    return out;
}

template <class Fn>
Tensor map(const Tensor& x, Fn fn) {
    Tensor out(x.shape());
    auto src = x.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = fn(src[i]);
    return out;
}

template <class Fn>
Tensor zip(const Tensor& a, const Tensor& b, const char* what, Fn fn) {
    require_same_shape(a, b, what);
    Tensor out(a.shape());
    auto pa = a.data();
    auto pb = b.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < pa.size(); ++i) dst[i] = fn(pa[i], pb[i]);
    return out;
}

}  // namespace

ConvParams ConvParams::same(Tensor weights, Tensor bias) {
    ConvParams p{std::move(weights), std::move(bias), 1, 0};
    const std::size_t k = p.kernel_size();
    if (k % 2 == 0) {
        throw ConfigError("same-size convolution needs an odd kernel, got " + std::to_string(k));
    }
    p.padding = (k - 1) / 2;
    return p;
}

NormParams NormParams::identity(std::size_t channels) {
    return {Tensor::full({channels}, 1.0f), Tensor::zeros({channels})};
}

Tensor conv2d(const Tensor& x, const ConvParams& p) {
    check_conv(x, p, false);
    const std::size_t k = p.kernel_size();
    const std::size_t c_out = p.weights.extent(0);
    if (k == 1 && p.stride == 1 && p.padding == 0) {
        LinearParams lp{p.weights.reshaped({c_out, x.channels()}), p.bias};
        return linear(x, lp);
    }
    if (p.stride == 1) return conv2d_stride1(x, p);
    const std::size_t OH = out_extent(x.height(), k, p.stride, p.padding);
    const std::size_t OW = out_extent(x.width(), k, p.stride, p.padding);
    Tensor out({c_out, OH, OW});
    const std::size_t blocks = (OH + kRowBlock - 1) / kRowBlock;
    parallel_for(static_cast<std::int64_t>(blocks), [&](std::int64_t blk) {
        const std::size_t y0 = static_cast<std::size_t>(blk) * kRowBlock;
        const std::size_t y1 = std::min(OH, y0 + kRowBlock);
        std::size_t o = 0;
        for (; o + 4 <= c_out; o += 4) conv_rows<4>(x, p, out, o, y0, y1, 0, x.channels());
        for (; o < c_out; ++o) conv_rows<1>(x, p, out, o, y0, y1, 0, x.channels());
    });
    return out;
}

Tensor depthwise_conv2d(const Tensor& x, const ConvParams& p) {
    check_conv(x, p, true);
    const std::size_t k = p.kernel_size();
    if (k % 2 == 0 || p.padding != (k - 1) / 2 || p.stride != 1) {
        throw ConfigError("depthwise_conv2d: expects an odd kernel with same padding and stride 1");
    }
    const std::size_t C = x.channels();
    Tensor out(x.shape());
    parallel_for(static_cast<std::int64_t>(C), [&](std::int64_t c) {
        const auto ci = static_cast<std::size_t>(c);
        conv_rows<1>(x, p, out, ci, 0, x.height(), ci, 1);
    });
    return out;
}

Tensor pool2d(const Tensor& x, PoolKind kind, std::size_t k) {
    require_chw(x, "pool2d");
    if (k == 0 || k % 2 == 0) {
        throw ConfigError("pool2d: window must be odd, got " + std::to_string(k));
    }
    const std::size_t H = x.height();
    const std::size_t W = x.width();
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(k / 2);
    Tensor out(x.shape());
    parallel_for(static_cast<std::int64_t>(x.channels()), [&](std::int64_t c) {
        const float* src = x.channel(static_cast<std::size_t>(c)).data();
        float* dst = out.channel(static_cast<std::size_t>(c)).data();
        for (std::size_t y = 0; y < H; ++y) {
            const std::ptrdiff_t ylo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(y) - r);
            const std::ptrdiff_t yhi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(H) - 1,
                                                                static_cast<std::ptrdiff_t>(y) + r);
            for (std::size_t x0 = 0; x0 < W; ++x0) {
                const std::ptrdiff_t xlo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(x0) - r);
                const std::ptrdiff_t xhi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W) - 1,
                                                                    static_cast<std::ptrdiff_t>(x0) + r);
                if (kind == PoolKind::Avg) {
                    float acc = 0.0f;
                    for (std::ptrdiff_t yy = ylo; yy <= yhi; ++yy) {
                        for (std::ptrdiff_t xx = xlo; xx <= xhi; ++xx) acc += src[yy * static_cast<std::ptrdiff_t>(W) + xx];
                    }
                    const auto count = static_cast<float>((yhi - ylo + 1) * (xhi - xlo + 1));
                    dst[y * W + x0] = acc / count;
                } else {
                    float m = -std::numeric_limits<float>::infinity();
                    for (std::ptrdiff_t yy = ylo; yy <= yhi; ++yy) {
                        for (std::ptrdiff_t xx = xlo; xx <= xhi; ++xx) {
                            m = std::max(m, src[yy * static_cast<std::ptrdiff_t>(W) + xx]);
                        }
                    }
                    dst[y * W + x0] = m;
                }
            }
        }
    });
    return out;
}

Tensor channel_pool(const Tensor& x, PoolKind kind) {
    require_chw(x, "channel_pool");
    const std::size_t C = x.channels();
    const std::size_t n = x.plane_size();
    Tensor out({1, x.height(), x.width()});
    auto dst = out.data();
    auto first = x.channel(0);
    std::copy(first.begin(), first.end(), dst.begin());
    for (std::size_t c = 1; c < C; ++c) {
        auto src = x.channel(c);
        if (kind == PoolKind::Avg) {
            for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
        } else {
            for (std::size_t i = 0; i < n; ++i) dst[i] = std::max(dst[i], src[i]);
        }
    }
    if (kind == PoolKind::Avg) {
        const auto inv = static_cast<float>(C);
        for (std::size_t i = 0; i < n; ++i) dst[i] /= inv;
    }
    return out;
}

Tensor linear(const Tensor& x, const LinearParams& p) {
    if (p.weights.rank() != 2) {
        throw DimensionError("linear: weights must be [D_out,D_in], got " + to_string(p.weights.shape()));
    }
    const std::size_t d_in = p.in_features();
    const std::size_t d_out = p.out_features();
    if (p.bias && (p.bias->rank() != 1 || p.bias->extent(0) != d_out)) {
        throw DimensionError("linear: bias must be [D_out], got " + to_string(p.bias->shape()));
    }
    const float* w = p.weights.data().data();
    const float* b = p.bias ? p.bias->data().data() : nullptr;

    if (x.rank() == 3 || x.rank() == 4) {
        const std::size_t batches = x.rank() == 4 ? x.extent(0) : 1;
        const std::size_t c_axis = x.rank() - 3;
        if (x.extent(c_axis) != d_in) {
            throw DimensionError("linear: feature map " + to_string(x.shape()) + " vs weights " +
                                 to_string(p.weights.shape()));
        }
        const std::size_t n = x.extent(c_axis + 1) * x.extent(c_axis + 2);
        Shape out_shape = x.shape();
        out_shape[c_axis] = d_out;
        Tensor out(out_shape);
        const std::size_t groups = d_out / kTileOut;
        std::vector<float> wp(groups * d_in * kTileOut);
        for (std::size_t g = 0; g < groups; ++g) {
            for (std::size_t i = 0; i < d_in; ++i) {
                for (std::size_t j = 0; j < kTileOut; ++j) {
                    wp[(g * d_in + i) * kTileOut + j] = w[(g * kTileOut + j) * d_in + i];
                }
            }
        }
        const std::size_t blocks_per_batch = (n + kPositionBlock - 1) / kPositionBlock;
        parallel_for(static_cast<std::int64_t>(batches * blocks_per_batch), [&](std::int64_t job) {
            const std::size_t bi = static_cast<std::size_t>(job) / blocks_per_batch;
            const std::size_t p0 = (static_cast<std::size_t>(job) % blocks_per_batch) * kPositionBlock;
            const std::size_t len = std::min(kPositionBlock, n - p0);
            const float* src = x.data().data() + bi * d_in * n + p0;
            float* dst = out.data().data() + bi * d_out * n + p0;
            const std::size_t full = len / kTileX * kTileX;
            std::size_t o = 0;
            for (; o + kTileOut <= d_out; o += kTileOut) {
                const float* wo = w + o * d_in;
                const float* wg = wp.data() + o * d_in;
                for (std::size_t q0 = 0; q0 < full; q0 += kTileX) {
                    F4 acc[kTileOut][2];
                    for (std::size_t j = 0; j < kTileOut; ++j) {
                        acc[j][0] = splat(b ? b[o + j] : 0.0f);
                        acc[j][1] = acc[j][0];
                    }
                    for (std::size_t i = 0; i < d_in; ++i) {
                        const float* s = src + i * n + q0;
                        const F4 s0 = load4(s);
                        const F4 s1 = load4(s + 4);
                        for (std::size_t j = 0; j < kTileOut; ++j) {
                            const F4 wj = splat(wg[i * kTileOut + j]);
                            acc[j][0] += wj * s0;
                            acc[j][1] += wj * s1;
                        }
                    }
                    for (std::size_t j = 0; j < kTileOut; ++j) {
                        std::memcpy(dst + (o + j) * n + q0, &acc[j][0], sizeof(F4));
                        std::memcpy(dst + (o + j) * n + q0 + 4, &acc[j][1], sizeof(F4));
                    }
                }
                for (std::size_t q = full; q < len; ++q) {
                    for (std::size_t j = 0; j < kTileOut; ++j) {
                        float acc = b ? b[o + j] : 0.0f;
                        for (std::size_t i = 0; i < d_in; ++i) acc += wo[j * d_in + i] * src[i * n + q];
                        dst[(o + j) * n + q] = acc;
                    }
                }
            }
            for (; o < d_out; ++o) {
                float* acc = dst + o * n;
                std::fill_n(acc, len, b ? b[o] : 0.0f);
                const float* wo = w + o * d_in;
                for (std::size_t i = 0; i < d_in; ++i) {
                    const float wi = wo[i];
                    const float* s = src + i * n;
                    for (std::size_t q = 0; q < len; ++q) acc[q] += wi * s[q];
                }
            }
        });
        return out;
    }

    if (x.rank() != 1 && x.rank() != 2) {
        throw DimensionError("linear: unsupported input rank " + to_string(x.shape()));
    }
    if (x.shape().back() != d_in) {
        throw DimensionError("linear: trailing extent of " + to_string(x.shape()) + " vs weights " +
                             to_string(p.weights.shape()));
    }
    const std::size_t rows = x.rank() == 2 ? x.extent(0) : 1;
    std::vector<float> wt(d_in * d_out);
    for (std::size_t o = 0; o < d_out; ++o) {
        for (std::size_t i = 0; i < d_in; ++i) wt[i * d_out + o] = w[o * d_in + i];
    }
    Shape out_shape = x.shape();
    out_shape.back() = d_out;
    Tensor out(out_shape);
    const std::size_t row_block = 64;
    const std::size_t blocks = (rows + row_block - 1) / row_block;
    parallel_for(static_cast<std::int64_t>(blocks), [&](std::int64_t blk) {
        const std::size_t r0 = static_cast<std::size_t>(blk) * row_block;
        const std::size_t r1 = std::min(rows, r0 + row_block);
        for (std::size_t r = r0; r < r1; ++r) {
            const float* src = x.data().data() + r * d_in;
            float* acc = out.data().data() + r * d_out;
            for (std::size_t o = 0; o < d_out; ++o) acc[o] = b ? b[o] : 0.0f;
            for (std::size_t i = 0; i < d_in; ++i) {
                const float xi = src[i];
                const float* wi = wt.data() + i * d_out;
                for (std::size_t o = 0; o < d_out; ++o) acc[o] += xi * wi[o];
            }
        }
    });
    return out;
}

Tensor layer_norm(const Tensor& x, const NormParams& p, float eps) {
    if (!(eps > 0.0f)) {
        throw ConfigError("layer_norm: eps must be positive");
    }
    if (x.rank() == 3) {
        const std::size_t C = x.channels();
        if (p.gain.size() != C || p.shift.size() != C) {
            throw DimensionError("layer_norm: params do not match " + std::to_string(C) + " channels");
        }
        const std::size_t n = x.plane_size();
        Tensor out(x.shape());
        const std::size_t blocks = (n + kPositionBlock - 1) / kPositionBlock;
        const float inv_c = 1.0f / static_cast<float>(C);
        parallel_for(static_cast<std::int64_t>(blocks), [&](std::int64_t blk) {
            const std::size_t p0 = static_cast<std::size_t>(blk) * kPositionBlock;
            const std::size_t len = std::min(kPositionBlock, n - p0);
            std::vector<float> mean(len, 0.0f);
            std::vector<float> var(len, 0.0f);
            const float* src = x.data().data() + p0;
            for (std::size_t c = 0; c < C; ++c) {
                const float* s = src + c * n;
                for (std::size_t q = 0; q < len; ++q) mean[q] += s[q];
            }
            for (std::size_t q = 0; q < len; ++q) mean[q] *= inv_c;
            for (std::size_t c = 0; c < C; ++c) {
                const float* s = src + c * n;
                for (std::size_t q = 0; q < len; ++q) {
                    const float d = s[q] - mean[q];
                    var[q] += d * d;
                }
            }
            for (std::size_t q = 0; q < len; ++q) var[q] = 1.0f / std::sqrt(var[q] * inv_c + eps);
            float* dst = out.data().data() + p0;
            for (std::size_t c = 0; c < C; ++c) {
                const float* s = src + c * n;
                float* d = dst + c * n;
                const float g = p.gain[c];
                const float sh = p.shift[c];
                for (std::size_t q = 0; q < len; ++q) d[q] = (s[q] - mean[q]) * var[q] * g + sh;
            }
        });
        return out;
    }
    if (x.rank() != 1 && x.rank() != 2) {
        throw DimensionError("layer_norm: unsupported shape " + to_string(x.shape()));
    }
    const std::size_t D = x.shape().back();
    if (p.gain.size() != D || p.shift.size() != D) {
        throw DimensionError("layer_norm: params do not match trailing extent " + std::to_string(D));
    }
    const std::size_t rows = x.size() / D;
    const float inv_d = 1.0f / static_cast<float>(D);
    Tensor out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const float* s = x.data().data() + r * D;
        float* d = out.data().data() + r * D;
        float mean = 0.0f;
        for (std::size_t i = 0; i < D; ++i) mean += s[i];
        mean *= inv_d;
        float var = 0.0f;
        for (std::size_t i = 0; i < D; ++i) var += (s[i] - mean) * (s[i] - mean);
        const float inv = 1.0f / std::sqrt(var * inv_d + eps);
        for (std::size_t i = 0; i < D; ++i) d[i] = (s[i] - mean) * inv * p.gain[i] + p.shift[i];
    }
    return out;
}

Tensor sigmoid(const Tensor& x) {
    return map(x, [](float v) { return sigmoid(v); });
}

Tensor silu(const Tensor& x) {
    return map(x, [](float v) { return silu(v); });
}

Tensor global_avg_pool(const Tensor& x) {
    require_chw(x, "global_avg_pool");
    Tensor out({x.channels()});
    const double n = static_cast<double>(x.plane_size());
    for (std::size_t c = 0; c < x.channels(); ++c) {
        double acc = 0.0;
        for (float v : x.channel(c)) acc += v;
        out[c] = static_cast<float>(acc / n);
    }
    return out;
}

Tensor sobel_grad(const Tensor& x) {
    require_chw(x, "sobel_grad");
    if (x.channels() != 1) {
        throw DimensionError("sobel_grad: expects a single channel, got " + to_string(x.shape()));
    }
    const std::size_t H = x.height();
    const std::size_t W = x.width();
    std::vector<float> gx(H * W);
    std::vector<float> gy(H * W);
    detail::sobel_components<float>(x.data(), H, W, gx, gy);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < H * W; ++i) out[i] = std::abs(gx[i]) + std::abs(gy[i]);
    return out;
}

Tensor gaussian_filter(const Tensor& x, double sigma, int radius) {
    require_chw(x, "gaussian_filter");
    const auto taps = detail::gaussian_taps<float>(sigma, radius);
    Tensor out(x.shape());
    for (std::size_t c = 0; c < x.channels(); ++c) {
        detail::separable_filter<float>(x.channel(c), x.height(), x.width(), taps, out.channel(c));
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    return zip(a, b, "add", [](float u, float v) { return u + v; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return zip(a, b, "sub", [](float u, float v) { return u - v; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return zip(a, b, "mul", [](float u, float v) { return u * v; });
}

Tensor scale(const Tensor& a, float s) {
    return map(a, [s](float v) { return v * s; });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_chw(a, "concat_channels");
    require_chw(b, "concat_channels");
    if (a.height() != b.height() || a.width() != b.width()) {
        throw DimensionError("concat_channels: spatial mismatch " + to_string(a.shape()) + " vs " +
                             to_string(b.shape()));
    }
    std::vector<float> data;
    data.reserve(a.size() + b.size());
    data.insert(data.end(), a.data().begin(), a.data().end());
    data.insert(data.end(), b.data().begin(), b.data().end());
    return Tensor({a.channels() + b.channels(), a.height(), a.width()}, std::move(data));
}

Tensor slice_channels(const Tensor& x, std::size_t first, std::size_t count) {
    require_chw(x, "slice_channels");
    if (count == 0 || first + count > x.channels()) {
        throw DimensionError("slice_channels: [" + std::to_string(first) + ", " + std::to_string(first + count) +
                             ") out of range for " + to_string(x.shape()));
    }
    const std::size_t n = x.plane_size();
    auto begin = x.data().begin() + static_cast<std::ptrdiff_t>(first * n);
    return Tensor({count, x.height(), x.width()},
                  std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(count * n)));
}

}  // namespace isfm
