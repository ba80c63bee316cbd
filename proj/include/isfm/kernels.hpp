#pragma once

#include <cmath>
#include <optional>

#include "isfm/tensor.hpp"

namespace isfm {

/// Weights [C_out, C_in, k, k], bias [C_out]. Depthwise layers use [C, 1, k, k].
struct ConvParams {
    Tensor weights;
    Tensor bias;
    std::size_t stride = 1;
    std::size_t padding = 0;

    std::size_t kernel_size() const { return weights.extent(3); }
    /// Zero-padded "same" layout for an odd kernel.
    static ConvParams same(Tensor weights, Tensor bias);
};

/// Affine map y = W x + b with W [D_out, D_in]. bias may be absent.
struct LinearParams {
    Tensor weights;
    std::optional<Tensor> bias;

    std::size_t in_features() const { return weights.extent(1); }
    std::size_t out_features() const { return weights.extent(0); }
};

/// Per-channel affine applied after normalization.
struct NormParams {
    Tensor gain;
    Tensor shift;

    static NormParams identity(std::size_t channels);
};

inline constexpr float kLayerNormEps = 1e-5f;

enum class PoolKind { Avg, Max };

Tensor conv2d(const Tensor& x, const ConvParams& p);

/// Per-channel convolution with zero "same" padding.
Tensor depthwise_conv2d(const Tensor& x, const ConvParams& p);

/// Same-size pooling, stride 1, pad (k-1)/2. Average pooling divides by the
/// number of in-bounds elements of each window.
Tensor pool2d(const Tensor& x, PoolKind kind, std::size_t k);

/// Reduces the channel axis: [C,H,W] -> [1,H,W].
Tensor channel_pool(const Tensor& x, PoolKind kind);

/// Rank 3 input [C,H,W]: maps the channel vector at every pixel.
/// Rank 1/2 input [..., D_in]: maps the trailing axis.
Tensor linear(const Tensor& x, const LinearParams& p);

/// Normalizes over the channel axis of [C,H,W] (or the trailing axis of rank <= 2).
Tensor layer_norm(const Tensor& x, const NormParams& p, float eps = kLayerNormEps);

inline float sigmoid(float x) {
    if (x >= 0.0f) {
        return 1.0f / (1.0f + std::exp(-x));
    }
    const float e = std::exp(x);
    return e / (1.0f + e);
}

inline float silu(float x) { return x * sigmoid(x); }

inline float softplus(float x) {
    if (x > 20.0f) return x;
    return std::log1p(std::exp(x));
}

Tensor sigmoid(const Tensor& x);
Tensor silu(const Tensor& x);

/// [C,H,W] -> [C], mean over all positions.
Tensor global_avg_pool(const Tensor& x);

/// |Gx * x| + |Gy * x| with replicate padding. Input [1,H,W].
Tensor sobel_grad(const Tensor& x);

/// Normalized Gaussian, replicate padding, applied per channel.
Tensor gaussian_filter(const Tensor& x, double sigma, int radius);

// Elementwise helpers. Shapes must match.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);

/// Channel-axis concatenation of [C1,H,W] and [C2,H,W].
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Channels [first, first+count) of a [C,H,W] tensor.
Tensor slice_channels(const Tensor& x, std::size_t first, std::size_t count);

}  // namespace isfm
