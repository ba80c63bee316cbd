#pragma once

// Replicate-padded stencils shared by the float kernels and the double
// precision loss/metric code. Planes are row-major h x w.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace isfm::detail {

template <class T>
struct Plane {
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<T> v;

    Plane() = default;
    Plane(std::size_t h_, std::size_t w_, T fill = T{}) : h(h_), w(w_), v(h_ * w_, fill) {}

    T& at(std::size_t y, std::size_t x) { return v[y * w + x]; }
    T at(std::size_t y, std::size_t x) const { return v[y * w + x]; }
    std::size_t size() const { return v.size(); }
};

inline std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
    if (i < 0) return 0;
    if (i >= static_cast<std::ptrdiff_t>(n)) return n - 1;
    return static_cast<std::size_t>(i);
}

/// Normalized 1D Gaussian taps of length 2*radius+1.
template <class T>
std::vector<T> gaussian_taps(double sigma, int radius) {
    if (!(sigma > 0.0) || radius < 0) {
        throw std::invalid_argument("gaussian: sigma must be > 0 and radius >= 0");
    }
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    std::vector<T> out(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) out[i] = static_cast<T>(k[i] / sum);
    return out;
}

/// Separable correlation with replicate padding: rows first, then columns.
template <class T>
void separable_filter(std::span<const T> src, std::size_t h, std::size_t w, std::span<const T> taps,
                      std::span<T> dst) {
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(taps.size() / 2);
    std::vector<T> tmp(h * w);
    for (std::size_t y = 0; y < h; ++y) {
        const T* row = src.data() + y * w;
        for (std::size_t x = 0; x < w; ++x) {
            T acc = T(0);
            for (std::ptrdiff_t k = -r; k <= r; ++k) {
                acc += taps[static_cast<std::size_t>(k + r)] *
                       row[clamp_index(static_cast<std::ptrdiff_t>(x) + k, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            T acc = T(0);
            for (std::ptrdiff_t k = -r; k <= r; ++k) {
                acc += taps[static_cast<std::size_t>(k + r)] *
                       tmp[clamp_index(static_cast<std::ptrdiff_t>(y) + k, h) * w + x];
            }
            dst[y * w + x] = acc;
        }
    }
}

/// Adjoint of separable_filter: dst = F^T g.
template <class T>
void separable_filter_adjoint(std::span<const T> g, std::size_t h, std::size_t w, std::span<const T> taps,
                              std::span<T> dst) {
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(taps.size() / 2);
    std::vector<T> tmp(h * w, T(0));
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const T gv = g[y * w + x];
            for (std::ptrdiff_t k = -r; k <= r; ++k) {
                tmp[clamp_index(static_cast<std::ptrdiff_t>(y) + k, h) * w + x] +=
                    taps[static_cast<std::size_t>(k + r)] * gv;
            }
        }
    }
    std::fill(dst.begin(), dst.end(), T(0));
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const T gv = tmp[y * w + x];
            for (std::ptrdiff_t k = -r; k <= r; ++k) {
                dst[y * w + clamp_index(static_cast<std::ptrdiff_t>(x) + k, w)] +=
                    taps[static_cast<std::size_t>(k + r)] * gv;
            }
        }
    }
}

// Sobel kernels, correlation form:
//   Gx = [-1 0 1; -2 0 2; -1 0 1]   Gy = [-1 -2 -1; 0 0 0; 1 2 1]
inline constexpr int kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
inline constexpr int kSobelY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

template <class T>
void sobel_components(std::span<const T> src, std::size_t h, std::size_t w, std::span<T> gx, std::span<T> gy) {
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            T sx = T(0);
            T sy = T(0);
            for (int dy = -1; dy <= 1; ++dy) {
                const std::size_t yy = clamp_index(static_cast<std::ptrdiff_t>(y) + dy, h);
                for (int dx = -1; dx <= 1; ++dx) {
                    const T v = src[yy * w + clamp_index(static_cast<std::ptrdiff_t>(x) + dx, w)];
                    sx += static_cast<T>(kSobelX[dy + 1][dx + 1]) * v;
                    sy += static_cast<T>(kSobelY[dy + 1][dx + 1]) * v;
                }
            }
            gx[y * w + x] = sx;
            gy[y * w + x] = sy;
        }
    }
}

/// dst += Sx^T dgx + Sy^T dgy (replicate padding scatters onto clamped taps).
template <class T>
void sobel_components_adjoint(std::span<const T> dgx, std::span<const T> dgy, std::size_t h, std::size_t w,
                              std::span<T> dst) {
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const T ax = dgx[y * w + x];
            const T ay = dgy[y * w + x];
            if (ax == T(0) && ay == T(0)) continue;
            for (int dy = -1; dy <= 1; ++dy) {
                const std::size_t yy = clamp_index(static_cast<std::ptrdiff_t>(y) + dy, h);
                for (int dx = -1; dx <= 1; ++dx) {
                    dst[yy * w + clamp_index(static_cast<std::ptrdiff_t>(x) + dx, w)] +=
                        static_cast<T>(kSobelX[dy + 1][dx + 1]) * ax + static_cast<T>(kSobelY[dy + 1][dx + 1]) * ay;
                }
            }
        }
    }
}

}  // namespace isfm::detail
