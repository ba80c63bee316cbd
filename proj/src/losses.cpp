#include "isfm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "isfm/detail/stencil.hpp"

namespace isfm {

namespace {

using detail::Plane;

void check_triple(const Tensor& f, const Tensor& ir, const Tensor& vi, const char* what) {
    require_chw(f, what);
    if (f.channels() != 1) {
        throw DimensionError(std::string(what) + ": expects [1,H,W], got " + to_string(f.shape()));
    }
    require_same_shape(f, ir, what);
    require_same_shape(f, vi, what);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::vector<double> to_double(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor to_tensor(const std::vector<double>& v, const Shape& shape) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return Tensor(shape, std::move(out));
}

struct Sobel {
    std::vector<double> gx;
    std::vector<double> gy;
    std::vector<double> mag;
};

Sobel sobel(const std::vector<double>& x, std::size_t h, std::size_t w) {
    Sobel s{std::vector<double>(h * w), std::vector<double>(h * w), std::vector<double>(h * w)};
    detail::sobel_components<double>(x, h, w, s.gx, s.gy);
    for (std::size_t i = 0; i < h * w; ++i) s.mag[i] = std::abs(s.gx[i]) + std::abs(s.gy[i]);
    return s;
}

std::vector<double> filter(const std::vector<double>& x, std::size_t h, std::size_t w,
                           const std::vector<double>& taps) {
    std::vector<double> out(h * w);
    detail::separable_filter<double>(x, h, w, taps, out);
    return out;
}

std::vector<double> filter_adjoint(const std::vector<double>& g, std::size_t h, std::size_t w,
                                   const std::vector<double>& taps) {
    std::vector<double> out(h * w);
    detail::separable_filter_adjoint<double>(g, h, w, taps, out);
    return out;
}

// Mean SSIM of x against y and, when grad is non-null, d(mean SSIM)/dx added with weight `scale`.
double ssim_impl(const std::vector<double>& x, const std::vector<double>& y, std::size_t h, std::size_t w,
                 std::vector<double>* grad, double scale) {
    const auto taps = detail::gaussian_taps<double>(kSsimSigma, kSsimRadius);
    const std::size_t n = h * w;
    std::vector<double> xx(n);
    std::vector<double> yy(n);
    std::vector<double> xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = filter(x, h, w, taps);
    const auto my = filter(y, h, w, taps);
    const auto pxx = filter(xx, h, w, taps);
    const auto pyy = filter(yy, h, w, taps);
    const auto pxy = filter(xy, h, w, taps);

    std::vector<double> g_m;
    std::vector<double> g_p;
    std::vector<double> g_q;
    if (grad) {
        g_m.resize(n);
        g_p.resize(n);
        g_q.resize(n);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double sxx = pxx[i] - mx[i] * mx[i];
        const double syy = pyy[i] - my[i] * my[i];
        const double sxy = pxy[i] - mx[i] * my[i];
        const double a1 = 2.0 * mx[i] * my[i] + kSsimC1;
        const double a2 = 2.0 * sxy + kSsimC2;
        const double b1 = mx[i] * mx[i] + my[i] * my[i] + kSsimC1;
        const double b2 = sxx + syy + kSsimC2;
        const double s = (a1 * a2) / (b1 * b2);
        sum += s;
        if (grad) {
            const double d_mx = 2.0 * my[i] * a2 / (b1 * b2) - s * 2.0 * mx[i] / b1;
            const double d_sxx = -s / b2;
            const double d_sxy = 2.0 * a1 / (b1 * b2);
            const double k = scale * inv_n;
            g_m[i] = k * (d_mx - 2.0 * mx[i] * d_sxx - my[i] * d_sxy);
            g_p[i] = k * d_sxx;
            g_q[i] = k * d_sxy;
        }
    }
    if (grad) {
        const auto am = filter_adjoint(g_m, h, w, taps);
        const auto ap = filter_adjoint(g_p, h, w, taps);
        const auto aq = filter_adjoint(g_q, h, w, taps);
        for (std::size_t i = 0; i < n; ++i) (*grad)[i] += am[i] + 2.0 * x[i] * ap[i] + y[i] * aq[i];
    }
    return sum * inv_n;
}

}  // namespace

LossValue loss_cont(const Tensor& f, const Tensor& ir, const Tensor& vi) {
    check_triple(f, ir, vi, "loss_cont");
    const std::size_t n = f.size();
    const double inv = 1.0 / static_cast<double>(n);
    std::vector<double> g(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = static_cast<double>(f[i]) - ir[i];
        const double b = static_cast<double>(f[i]) - vi[i];
        sum += std::abs(a) + std::abs(b);
        g[i] = (sign(a) + sign(b)) * inv;
    }
    return {sum * inv, to_tensor(g, f.shape())};
}

LossValue loss_int(const Tensor& f, const Tensor& ir, const Tensor& vi) {
    check_triple(f, ir, vi, "loss_int");
    const std::size_t n = f.size();
    const double inv = 1.0 / static_cast<double>(n);
    std::vector<double> g(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(f[i]) - std::max(ir[i], vi[i]);
        sum += std::abs(d);
        g[i] = sign(d) * inv;
    }
    return {sum * inv, to_tensor(g, f.shape())};
}

LossValue loss_grad(const Tensor& f, const Tensor& ir, const Tensor& vi) {
    check_triple(f, ir, vi, "loss_grad");
    const std::size_t h = f.height();
    const std::size_t w = f.width();
    const std::size_t n = h * w;
    const double inv = 1.0 / static_cast<double>(n);
    const Sobel sf = sobel(to_double(f), h, w);
    const Sobel si = sobel(to_double(ir), h, w);
    const Sobel sv = sobel(to_double(vi), h, w);
    std::vector<double> dgx(n);
    std::vector<double> dgy(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = sf.mag[i] - std::max(si.mag[i], sv.mag[i]);
        sum += std::abs(d);
        const double outer = sign(d) * inv;
        dgx[i] = outer * sign(sf.gx[i]);
        dgy[i] = outer * sign(sf.gy[i]);
    }
    std::vector<double> g(n, 0.0);
    detail::sobel_components_adjoint<double>(dgx, dgy, h, w, g);
    return {sum * inv, to_tensor(g, f.shape())};
}

double ssim(const Tensor& a, const Tensor& b) {
    require_chw(a, "ssim");
    require_same_shape(a, b, "ssim");
    if (a.channels() != 1) {
        throw DimensionError("ssim: expects [1,H,W], got " + to_string(a.shape()));
    }
    return ssim_impl(to_double(a), to_double(b), a.height(), a.width(), nullptr, 0.0);
}

LossValue loss_ssim(const Tensor& f, const Tensor& ir, const Tensor& vi) {
    check_triple(f, ir, vi, "loss_ssim");
    const std::size_t h = f.height();
    const std::size_t w = f.width();
    const auto x = to_double(f);
    std::vector<double> g(h * w, 0.0);
    const double s_ir = ssim_impl(x, to_double(ir), h, w, &g, -0.5);
    const double s_vi = ssim_impl(x, to_double(vi), h, w, &g, -0.5);
    return {(1.0 - s_ir) / 2.0 + (1.0 - s_vi) / 2.0, to_tensor(g, f.shape())};
}

LossBreakdown loss_total(const Tensor& f, const Tensor& ir, const Tensor& vi, const LossWeights& w) {
    const LossValue c = loss_cont(f, ir, vi);
    const LossValue i = loss_int(f, ir, vi);
    const LossValue g = loss_grad(f, ir, vi);
    const LossValue s = loss_ssim(f, ir, vi);
    LossBreakdown out;
    out.cont = c.value;
    out.intensity = i.value;
    out.grad = g.value;
    out.ssim = s.value;
    out.total = c.value + w.alpha * i.value + w.lambda * g.value + w.gamma * s.value;
    std::vector<double> d(f.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
        d[k] = static_cast<double>(c.grad[k]) + w.alpha * i.grad[k] + w.lambda * g.grad[k] + w.gamma * s.grad[k];
    }
    out.d_total = to_tensor(d, f.shape());
    return out;
}

FdReport fd_check_report(const LossFn& loss, const Tensor& f, const Tensor& ir, const Tensor& vi, double epsilon,
                         std::size_t samples, std::uint64_t seed) {
    if (!(epsilon >= 1e-5 && epsilon <= 1e-2)) {
        throw std::invalid_argument("fd_check: epsilon must lie in [1e-5, 1e-2]");
    }
    if (f.empty()) {
        throw DimensionError("fd_check: empty image");
    }
    const LossValue base = loss(f, ir, vi);
    require_same_shape(base.grad, f, "fd_check");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, f.size() - 1);
    Tensor probe = f;
    FdReport r;
    const std::size_t max_draws = samples * kFdMaxDrawFactor;
    for (std::size_t draw = 0; draw < max_draws && r.evaluated < samples; ++draw) {
        const std::size_t i = pick(rng);
        const float x0 = f[i];
        const float up = static_cast<float>(x0 + epsilon);
        const float down = static_cast<float>(x0 - epsilon);
        probe[i] = up;
        const double l_up = loss(probe, ir, vi).value;
        probe[i] = down;
        const double l_down = loss(probe, ir, vi).value;
        probe[i] = x0;
        const double forward = (l_up - base.value) / (static_cast<double>(up) - x0);
        const double backward = (base.value - l_down) / (static_cast<double>(x0) - down);
        const double slope_scale = std::max({std::abs(forward), std::abs(backward), kFdFloor});
        if (std::abs(forward - backward) > kFdKinkTolerance * slope_scale) {
            ++r.skipped;
            continue;
        }
        const double numeric = (l_up - l_down) / (static_cast<double>(up) - static_cast<double>(down));
        const double a = base.grad[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), kFdFloor});
        r.max_rel_error = std::max(r.max_rel_error, std::abs(a - numeric) / denom);
        ++r.evaluated;
    }
    return r;
}

double fd_check(const LossFn& loss, const Tensor& f, const Tensor& ir, const Tensor& vi, double epsilon,
                std::size_t samples, std::uint64_t seed) {
    return fd_check_report(loss, f, ir, vi, epsilon, samples, seed).max_rel_error;
}

}  // namespace isfm
