#include "isfm/ssm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "isfm/parallel.hpp"

namespace isfm {

namespace {

constexpr std::size_t kChannelBlock = 64;

// exp for x <= 0 built from plain arithmetic so the compiler can vectorize it.
// Relative error is a few ulp over [-87, 0].
inline float exp_nonpositive(float x) {
    x = x < -87.0f ? -87.0f : x;
    const float shifter = 12582912.0f;  // 1.5 * 2^23
    const float t = x * 1.44269504f + shifter;
    const float k = t - shifter;
    const float r = (x - k * 0.693359375f) - k * -2.12194440e-4f;
    float p = 1.0f / 5040.0f;
    p = p * r + 1.0f / 720.0f;
    p = p * r + 1.0f / 120.0f;
    p = p * r + 1.0f / 24.0f;
    p = p * r + 1.0f / 6.0f;
    p = p * r + 0.5f;
    p = p * r + 1.0f;
    p = p * r + 1.0f;
    const auto bits = static_cast<std::uint32_t>(static_cast<std::int32_t>(k) + 127) << 23;
    return p * std::bit_cast<float>(bits);
}

void check_ssm(const SsmParams& p) {
    if (p.a_log.rank() != 2) {
        throw DimensionError("ssm: a_log must be [D,N], got " + to_string(p.a_log.shape()));
    }
    const std::size_t D = p.channels();
    if (p.d_skip.rank() != 1 || p.d_skip.extent(0) != D) {
        throw DimensionError("ssm: d_skip must be [" + std::to_string(D) + "], got " + to_string(p.d_skip.shape()));
    }
}

}  // namespace

const char* to_string(ScanDirection d) {
    switch (d) {
        case ScanDirection::RowForward: return "row_fwd";
        case ScanDirection::RowBackward: return "row_bwd";
        case ScanDirection::ColForward: return "col_fwd";
        case ScanDirection::ColBackward: return "col_bwd";
    }
    return "?";
}

ScanInputs scan_inputs(const Tensor& u, const SsmParams& p) {
    check_ssm(p);
    if (u.rank() != 2 || u.extent(1) != p.channels()) {
        throw DimensionError("scan_inputs: sequence " + to_string(u.shape()) + " vs " +
                             std::to_string(p.channels()) + " channels");
    }
    Tensor delta = linear(linear(u, p.dt_down), p.dt_up);
    for (float& v : delta.data()) v = softplus(v);
    return {std::move(delta), linear(u, p.b_proj), linear(u, p.c_proj)};
}

Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& b, const Tensor& c, const SsmParams& p) {
    check_ssm(p);
    const std::size_t D = p.channels();
    const std::size_t N = p.state_size();
    if (u.rank() != 2 || u.extent(1) != D) {
        throw DimensionError("selective_scan: u must be [L," + std::to_string(D) + "], got " + to_string(u.shape()));
    }
    const std::size_t L = u.extent(0);
    if (delta.shape() != u.shape()) {
        throw DimensionError("selective_scan: delta " + to_string(delta.shape()) + " vs u " + to_string(u.shape()));
    }
    if (b.rank() != 2 || c.rank() != 2 || b.extent(0) != L || c.extent(0) != L || b.extent(1) != N ||
        c.extent(1) != N) {
        throw DimensionError("selective_scan: B " + to_string(b.shape()) + " / C " + to_string(c.shape()) +
                             " must be [" + std::to_string(L) + "," + std::to_string(N) + "]");
    }
    for (float v : delta.data()) {
        if (!(v > 0.0f)) {
            throw std::invalid_argument("selective_scan: delta must be strictly positive");
        }
    }

    Tensor y({L, D});
    const std::size_t blocks = (D + kChannelBlock - 1) / kChannelBlock;
    parallel_for(static_cast<std::int64_t>(blocks), [&](std::int64_t blk) {
        const std::size_t d0 = static_cast<std::size_t>(blk) * kChannelBlock;
        const std::size_t nb = std::min(kChannelBlock, D - d0);
        std::vector<float> a(N * nb);
        std::vector<float> h(N * nb, 0.0f);
        std::vector<float> du(nb);
        std::vector<float> acc(nb);
        for (std::size_t j = 0; j < nb; ++j) {
            for (std::size_t n = 0; n < N; ++n) a[n * nb + j] = -std::exp(p.a_log[(d0 + j) * N + n]);
        }
        const float* dskip = p.d_skip.data().data() + d0;
        for (std::size_t t = 0; t < L; ++t) {
            const float* dl = delta.data().data() + t * D + d0;
            const float* ut = u.data().data() + t * D + d0;
            const float* bt = b.data().data() + t * N;
            const float* ct = c.data().data() + t * N;
            for (std::size_t j = 0; j < nb; ++j) {
                du[j] = dl[j] * ut[j];
                acc[j] = 0.0f;
            }
            for (std::size_t n = 0; n < N; ++n) {
                const float bn = bt[n];
                const float cn = ct[n];
                float* hn = h.data() + n * nb;
                const float* an = a.data() + n * nb;
                for (std::size_t j = 0; j < nb; ++j) {
                    hn[j] = exp_nonpositive(dl[j] * an[j]) * hn[j] + du[j] * bn;
                    acc[j] += cn * hn[j];
                }
            }
            float* yt = y.data().data() + t * D + d0;
            for (std::size_t j = 0; j < nb; ++j) yt[j] = acc[j] + dskip[j] * ut[j];
        }
    });
    return y;
}

Tensor selective_scan(const Tensor& u, const SsmParams& p) {
    const ScanInputs in = scan_inputs(u, p);
    return selective_scan(u, in.delta, in.b, in.c, p);
}

std::size_t scan_position(ScanDirection dir, std::size_t t, std::size_t h, std::size_t w) {
    const std::size_t L = h * w;
    switch (dir) {
        case ScanDirection::RowForward: return t;
        case ScanDirection::RowBackward: return L - 1 - t;
        case ScanDirection::ColForward: return (t % h) * w + t / h;
        case ScanDirection::ColBackward: {
            const std::size_t s = L - 1 - t;
            return (s % h) * w + s / h;
        }
    }
    return t;
}

Tensor grid_to_sequence(const Tensor& x, ScanDirection dir) {
    require_chw(x, "grid_to_sequence");
    const std::size_t D = x.channels();
    const std::size_t H = x.height();
    const std::size_t W = x.width();
    const std::size_t L = H * W;
    std::vector<std::size_t> pos(L);
    for (std::size_t t = 0; t < L; ++t) pos[t] = scan_position(dir, t, H, W);
    Tensor out({L, D});
    float* dst = out.data().data();
    for (std::size_t t = 0; t < L; ++t) {
        const std::size_t q = pos[t];
        for (std::size_t d = 0; d < D; ++d) dst[t * D + d] = x[d * L + q];
    }
    return out;
}

Tensor sequence_to_grid(const Tensor& y, ScanDirection dir, std::size_t h, std::size_t w) {
    if (y.rank() != 2 || y.extent(0) != h * w) {
        throw DimensionError("sequence_to_grid: sequence " + to_string(y.shape()) + " does not cover a " +
                             std::to_string(h) + "x" + std::to_string(w) + " grid");
    }
    const std::size_t D = y.extent(1);
    const std::size_t L = h * w;
    Tensor out({D, h, w});
    const float* src = y.data().data();
    for (std::size_t t = 0; t < L; ++t) {
        const std::size_t q = scan_position(dir, t, h, w);
        for (std::size_t d = 0; d < D; ++d) out[d * L + q] = src[t * D + d];
    }
    return out;
}

Tensor ssm_2d(const Tensor& x, const DirectionalSsm& p) {
    require_chw(x, "ssm_2d");
    Tensor sum;
    for (std::size_t k = 0; k < kScanDirections.size(); ++k) {
        const ScanDirection dir = kScanDirections[k];
        Tensor part = sequence_to_grid(selective_scan(grid_to_sequence(x, dir), p[k]), dir, x.height(), x.width());
        if (k == 0) {
            sum = std::move(part);
        } else {
            auto dst = sum.data();
            auto src = part.data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
    }
    return sum;
}

Tensor ssm_branch(const Tensor& x, const ConvParams& dwconv, const DirectionalSsm& ssm) {
    return ssm_2d(silu(depthwise_conv2d(x, dwconv)), ssm);
}

Tensor vssm_block(const Tensor& x, const VssmParams& p) {
    require_chw(x, "vssm_block");
    const Tensor xz = linear(layer_norm(x, p.ln_in), p.in_proj);
    if (xz.channels() % 2 != 0) {
        throw DimensionError("vssm_block: in_proj must produce an even channel count");
    }
    const std::size_t inner = xz.channels() / 2;
    const Tensor h = layer_norm(ssm_branch(slice_channels(xz, 0, inner), p.dwconv, p.ssm), p.ln_out);
    const Tensor gated = mul(h, silu(slice_channels(xz, inner, inner)));
    return add(x, linear(gated, p.out_proj));
}

}  // namespace isfm
