#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isfm/tensor.hpp"

namespace isfm {

// Every metric works on the 8-bit quantization q = floor(255 x + 0.5) of a
// [1,H,W] image in [0,1] and accumulates in double.

std::vector<std::uint8_t> quantize(const Tensor& img);

/// Shannon entropy of the 256-bin histogram, log base 2.
double entropy(const Tensor& img);

/// sqrt(RF^2 + CF^2) on the 0-255 scale.
double spatial_frequency(const Tensor& img);

/// Mean of sqrt((dx^2 + dy^2) / 2) over pixels with both forward differences, 0-255 scale.
double avg_gradient(const Tensor& img);

/// I(a;f) + I(b;f) from 256x256 joint histograms, log base 2.
double mutual_information(const Tensor& a, const Tensor& b, const Tensor& f);

inline constexpr double kQabfGammaG = 0.9994;
inline constexpr double kQabfKappaG = -15.0;
inline constexpr double kQabfSigmaG = 0.5;
inline constexpr double kQabfGammaA = 0.9879;
inline constexpr double kQabfKappaA = -22.0;
inline constexpr double kQabfSigmaA = 0.8;

/// Edge-preservation score in [0,1]; 0 when neither source has any edge.
double qabf(const Tensor& a, const Tensor& b, const Tensor& f);

/// Mean of the pixel-domain VIF of f against a and against b.
double vif_fusion(const Tensor& a, const Tensor& b, const Tensor& f);

/// Pixel-domain VIF of `dist` against `ref` over four scales, sigma_n^2 = 2.
double vif(const Tensor& ref, const Tensor& dist);

/// corr(f - b, a) + corr(f - a, b); a zero-variance term contributes 0.
double scd(const Tensor& a, const Tensor& b, const Tensor& f);

struct MetricReport {
    std::string name;
    double en = 0.0;
    double sf = 0.0;
    double ag = 0.0;
    double vif = 0.0;
    double mi = 0.0;
    double qabf = 0.0;
    double scd = 0.0;
};

/// Column order used by reports.
inline const std::vector<std::string> kMetricNames = {"en", "sf", "ag", "vif", "mi", "qabf", "scd"};

MetricReport evaluate_pair(const Tensor& a, const Tensor& b, const Tensor& f, std::string name = {});

/// Field values in kMetricNames order.
std::vector<double> metric_values(const MetricReport& r);

enum class TieRule {
    Average,  // tied entries share the mean of their positions
    Min,      // tied entries all take the best position
};

struct RankTable {
    std::vector<std::string> methods;
    std::vector<std::string> metrics;
    std::vector<std::vector<double>> values;  // [method][metric]
    std::vector<bool> higher_is_better;
    std::vector<std::vector<double>> ranks;   // [method][metric]
    std::vector<double> avg_rank;
    std::vector<std::string> warnings;
};

/// Ranks each metric (1 = best) and averages over metrics. Methods with a NaN
/// value are dropped and reported in `warnings`. Needs at least two methods.
RankTable avg_rank(const std::vector<std::string>& methods, const std::vector<std::string>& metrics,
                   const std::vector<std::vector<double>>& values, const std::vector<bool>& higher_is_better,
                   TieRule tie = TieRule::Average);

}  // namespace isfm
