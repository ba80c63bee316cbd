#pragma once

#include <cstdint>
#include <functional>

#include "isfm/tensor.hpp"

namespace isfm {

/// A loss value and its gradient with respect to the fused image f.
struct LossValue {
    double value = 0.0;
    Tensor grad;
};

struct LossWeights {
    double alpha = 5.0;
    double lambda = 5.0;
    double gamma = 0.5;
};

struct LossBreakdown {
    double cont = 0.0;
    double intensity = 0.0;
    double grad = 0.0;
    double ssim = 0.0;
    double total = 0.0;
    Tensor d_total;
};

inline constexpr double kSsimSigma = 1.5;
inline constexpr int kSsimRadius = 5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// All images are [1,H,W]. Values are accumulated in double; gradients use sign(0) = 0.

/// (|f - ir|_1 + |f - vi|_1) / HW
LossValue loss_cont(const Tensor& f, const Tensor& ir, const Tensor& vi);

/// |f - max(ir, vi)|_1 / HW
LossValue loss_int(const Tensor& f, const Tensor& ir, const Tensor& vi);

/// | |grad f| - max(|grad ir|, |grad vi|) |_1 / HW with the L1 Sobel magnitude.
LossValue loss_grad(const Tensor& f, const Tensor& ir, const Tensor& vi);

/// (1 - SSIM(f, ir)) / 2 + (1 - SSIM(f, vi)) / 2, Gaussian window sigma 1.5, radius 5.
LossValue loss_ssim(const Tensor& f, const Tensor& ir, const Tensor& vi);

/// Mean SSIM of two [1,H,W] images on unit dynamic range.
double ssim(const Tensor& a, const Tensor& b);

/// cont + alpha*int + lambda*grad + gamma*ssim.
LossBreakdown loss_total(const Tensor& f, const Tensor& ir, const Tensor& vi, const LossWeights& w = {});

using LossFn = std::function<LossValue(const Tensor&, const Tensor&, const Tensor&)>;

inline constexpr double kFdFloor = 1e-8;
inline constexpr double kFdKinkTolerance = 1e-3;
inline constexpr std::size_t kFdMaxDrawFactor = 16;

struct FdReport {
    double max_rel_error = 0.0;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;
};

/// Central differences at random pixels of f compared with the analytic
/// gradient: max |a - n| / max(|a|, |n|, 1e-8). A pixel whose forward and
/// backward slopes differ by more than kFdKinkTolerance (relative) has a kink
/// within epsilon and is redrawn; at most samples * kFdMaxDrawFactor draws.
/// epsilon must lie in [1e-5, 1e-2].
FdReport fd_check_report(const LossFn& loss, const Tensor& f, const Tensor& ir, const Tensor& vi, double epsilon,
                         std::size_t samples, std::uint64_t seed = 0);

/// fd_check_report(...).max_rel_error
double fd_check(const LossFn& loss, const Tensor& f, const Tensor& ir, const Tensor& vi, double epsilon,
                std::size_t samples, std::uint64_t seed = 0);

}  // namespace isfm
