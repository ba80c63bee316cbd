#include "isfm/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "isfm/detail/stencil.hpp"

namespace isfm {

namespace {

using detail::Plane;

void check_gray(const Tensor& t, const char* what) {
    require_chw(t, what);
    if (t.channels() != 1) {
        throw DimensionError(std::string(what) + ": expects [1,H,W], got " + to_string(t.shape()));
    }
}

void check_triple(const Tensor& a, const Tensor& b, const Tensor& f, const char* what) {
    check_gray(f, what);
    require_same_shape(a, f, what);
    require_same_shape(b, f, what);
}

Plane<double> levels(const Tensor& img) {
    const auto q = quantize(img);
    Plane<double> p(img.height(), img.width());
    for (std::size_t i = 0; i < q.size(); ++i) p.v[i] = q[i];
    return p;
}

double entropy_of(const std::vector<double>& counts, double total) {
    double h = 0.0;
    for (double c : counts) {
        if (c > 0.0) {
            const double p = c / total;
            h -= p * std::log2(p);
        }
    }
    return h;
}

double mutual_info_pair(const std::vector<std::uint8_t>& x, const std::vector<std::uint8_t>& y) {
    std::vector<double> joint(256 * 256, 0.0);
    std::array<double, 256> px{};
    std::array<double, 256> py{};
    for (std::size_t i = 0; i < x.size(); ++i) {
        joint[x[i] * 256u + y[i]] += 1.0;
        px[x[i]] += 1.0;
        py[y[i]] += 1.0;
    }
    const double n = static_cast<double>(x.size());
    double mi = 0.0;
    for (std::size_t i = 0; i < 256; ++i) {
        if (px[i] == 0.0) continue;
        for (std::size_t j = 0; j < 256; ++j) {
            const double c = joint[i * 256 + j];
            if (c == 0.0) continue;
            mi += (c / n) * std::log2(c * n / (px[i] * py[j]));
        }
    }
    return mi;
}

struct EdgeField {
    std::vector<double> g;
    std::vector<double> alpha;
};

EdgeField edges(const Plane<double>& p) {
    const std::size_t n = p.size();
    std::vector<double> sx(n);
    std::vector<double> sy(n);
    detail::sobel_components<double>(p.v, p.h, p.w, sx, sy);
    EdgeField e{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        e.g[i] = std::sqrt(sx[i] * sx[i] + sy[i] * sy[i]);
        if (sx[i] == 0.0) {
            e.alpha[i] = sy[i] > 0.0 ? std::numbers::pi / 2 : (sy[i] < 0.0 ? -std::numbers::pi / 2 : 0.0);
        } else {
            e.alpha[i] = std::atan(sy[i] / sx[i]);
        }
    }
    return e;
}

double preservation(double g_src, double a_src, double g_f, double a_f) {
    double G;
    if (g_src == g_f) {
        G = 1.0;
    } else if (g_src > g_f) {
        G = g_f / g_src;
    } else {
        G = g_src / g_f;
    }
    const double A = 1.0 - std::abs(a_src - a_f) / (std::numbers::pi / 2);
    const double qg = kQabfGammaG / (1.0 + std::exp(kQabfKappaG * (G - kQabfSigmaG)));
    const double qa = kQabfGammaA / (1.0 + std::exp(kQabfKappaA * (A - kQabfSigmaA)));
    return qg * qa;
}

Plane<double> smooth(const Plane<double>& p, double sigma, int radius) {
    const auto taps = detail::gaussian_taps<double>(sigma, radius);
    Plane<double> out(p.h, p.w);
    detail::separable_filter<double>(p.v, p.h, p.w, taps, out.v);
    return out;
}

Plane<double> downsample(const Plane<double>& p) {
    Plane<double> s = smooth(p, 1.0, 3);
    Plane<double> out((p.h + 1) / 2, (p.w + 1) / 2);
    for (std::size_t y = 0; y < out.h; ++y) {
        for (std::size_t x = 0; x < out.w; ++x) out.at(y, x) = s.at(2 * y, 2 * x);
    }
    return out;
}

constexpr int kVifScales = 4;
constexpr double kVifNoise = 2.0;
constexpr double kVifEps = 1e-10;

// Numerator and denominator of pixel-domain VIF at one scale.
std::pair<double, double> vif_scale(const Plane<double>& ref, const Plane<double>& dist) {
    const std::size_t n = ref.size();
    Plane<double> rr(ref.h, ref.w);
    Plane<double> dd(ref.h, ref.w);
    Plane<double> rd(ref.h, ref.w);
    for (std::size_t i = 0; i < n; ++i) {
        rr.v[i] = ref.v[i] * ref.v[i];
        dd.v[i] = dist.v[i] * dist.v[i];
        rd.v[i] = ref.v[i] * dist.v[i];
    }
    const auto mu1 = smooth(ref, 2.0, 5);
    const auto mu2 = smooth(dist, 2.0, 5);
    const auto e11 = smooth(rr, 2.0, 5);
    const auto e22 = smooth(dd, 2.0, 5);
    const auto e12 = smooth(rd, 2.0, 5);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s1 = std::max(0.0, e11.v[i] - mu1.v[i] * mu1.v[i]);
        double s2 = std::max(0.0, e22.v[i] - mu2.v[i] * mu2.v[i]);
        const double s12 = e12.v[i] - mu1.v[i] * mu2.v[i];
        double g = s12 / (s1 + kVifEps);
        double sv = s2 - g * s12;
        if (s1 < kVifEps) {
            g = 0.0;
            sv = s2;
            s1 = 0.0;
        }
        if (s2 < kVifEps) {
            g = 0.0;
            sv = 0.0;
        }
        if (g < 0.0) {
            sv = s2;
            g = 0.0;
        }
        if (sv <= kVifEps) sv = kVifEps;
        num += std::log10(1.0 + g * g * s1 / (sv + kVifNoise));
        den += std::log10(1.0 + s1 / kVifNoise);
    }
    return {num, den};
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

std::vector<std::uint8_t> quantize(const Tensor& img) {
    std::vector<std::uint8_t> q(img.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double v = std::floor(static_cast<double>(img[i]) * 255.0 + 0.5);
        q[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return q;
}

double entropy(const Tensor& img) {
    check_gray(img, "entropy");
    std::vector<double> hist(256, 0.0);
    for (auto v : quantize(img)) hist[v] += 1.0;
    return entropy_of(hist, static_cast<double>(img.size()));
}

double spatial_frequency(const Tensor& img) {
    check_gray(img, "spatial_frequency");
    const Plane<double> p = levels(img);
    double rf = 0.0;
    double cf = 0.0;
    if (p.w > 1) {
        for (std::size_t y = 0; y < p.h; ++y) {
            for (std::size_t x = 1; x < p.w; ++x) {
                const double d = p.at(y, x) - p.at(y, x - 1);
                rf += d * d;
            }
        }
        rf /= static_cast<double>(p.h * (p.w - 1));
    }
    if (p.h > 1) {
        for (std::size_t y = 1; y < p.h; ++y) {
            for (std::size_t x = 0; x < p.w; ++x) {
                const double d = p.at(y, x) - p.at(y - 1, x);
                cf += d * d;
            }
        }
        cf /= static_cast<double>((p.h - 1) * p.w);
    }
    return std::sqrt(rf + cf);
}

double avg_gradient(const Tensor& img) {
    check_gray(img, "avg_gradient");
    const Plane<double> p = levels(img);
    if (p.h < 2 || p.w < 2) return 0.0;
    double sum = 0.0;
    for (std::size_t y = 0; y + 1 < p.h; ++y) {
        for (std::size_t x = 0; x + 1 < p.w; ++x) {
            const double dx = p.at(y, x + 1) - p.at(y, x);
            const double dy = p.at(y + 1, x) - p.at(y, x);
            sum += std::sqrt((dx * dx + dy * dy) / 2.0);
        }
    }
    return sum / static_cast<double>((p.h - 1) * (p.w - 1));
}

double mutual_information(const Tensor& a, const Tensor& b, const Tensor& f) {
    check_triple(a, b, f, "mutual_information");
    const auto qa = quantize(a);
    const auto qb = quantize(b);
    const auto qf = quantize(f);
    return mutual_info_pair(qa, qf) + mutual_info_pair(qb, qf);
}

double qabf(const Tensor& a, const Tensor& b, const Tensor& f) {
    check_triple(a, b, f, "qabf");
    const EdgeField ea = edges(levels(a));
    const EdgeField eb = edges(levels(b));
    const EdgeField ef = edges(levels(f));
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < ef.g.size(); ++i) {
        const double qa = preservation(ea.g[i], ea.alpha[i], ef.g[i], ef.alpha[i]);
        const double qb = preservation(eb.g[i], eb.alpha[i], ef.g[i], ef.alpha[i]);
        num += qa * ea.g[i] + qb * eb.g[i];
        den += ea.g[i] + eb.g[i];
    }
    if (den == 0.0) return 0.0;
    return num / den;
}

double vif(const Tensor& ref, const Tensor& dist) {
    check_gray(ref, "vif");
    require_same_shape(ref, dist, "vif");
    Plane<double> r = levels(ref);
    Plane<double> d = levels(dist);
    double num = 0.0;
    double den = 0.0;
    for (int s = 0; s < kVifScales; ++s) {
        if (s > 0) {
            if (r.h < 2 && r.w < 2) break;
            r = downsample(r);
            d = downsample(d);
        }
        const auto [n, dn] = vif_scale(r, d);
        num += n;
        den += dn;
    }
    if (den <= 0.0) return 0.0;
    return num / den;
}

double vif_fusion(const Tensor& a, const Tensor& b, const Tensor& f) {
    check_triple(a, b, f, "vif_fusion");
    return (vif(a, f) + vif(b, f)) / 2.0;
}

double scd(const Tensor& a, const Tensor& b, const Tensor& f) {
    check_triple(a, b, f, "scd");
    const auto qa = quantize(a);
    const auto qb = quantize(b);
    const auto qf = quantize(f);
    const std::size_t n = qf.size();
    std::vector<double> va(n);
    std::vector<double> vb(n);
    std::vector<double> fb(n);
    std::vector<double> fa(n);
    for (std::size_t i = 0; i < n; ++i) {
        va[i] = qa[i];
        vb[i] = qb[i];
        fb[i] = static_cast<double>(qf[i]) - qb[i];
        fa[i] = static_cast<double>(qf[i]) - qa[i];
    }
    return pearson(fb, va) + pearson(fa, vb);
}

MetricReport evaluate_pair(const Tensor& a, const Tensor& b, const Tensor& f, std::string name) {
    check_triple(a, b, f, "evaluate_pair");
    MetricReport r;
    r.name = std::move(name);
    r.en = entropy(f);
    r.sf = spatial_frequency(f);
    r.ag = avg_gradient(f);
    r.vif = vif_fusion(a, b, f);
    r.mi = mutual_information(a, b, f);
    r.qabf = qabf(a, b, f);
    r.scd = scd(a, b, f);
    return r;
}

std::vector<double> metric_values(const MetricReport& r) { return {r.en, r.sf, r.ag, r.vif, r.mi, r.qabf, r.scd}; }

RankTable avg_rank(const std::vector<std::string>& methods, const std::vector<std::string>& metrics,
                   const std::vector<std::vector<double>>& values, const std::vector<bool>& higher_is_better,
                   TieRule tie) {
    if (values.size() != methods.size()) {
        throw DimensionError("avg_rank: " + std::to_string(methods.size()) + " methods but " +
                             std::to_string(values.size()) + " value rows");
    }
    if (higher_is_better.size() != metrics.size() || metrics.empty()) {
        throw DimensionError("avg_rank: metric names and direction flags must match and be non-empty");
    }
    RankTable t;
    t.metrics = metrics;
    t.higher_is_better = higher_is_better;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        if (values[m].size() != metrics.size()) {
            throw DimensionError("avg_rank: method '" + methods[m] + "' has " + std::to_string(values[m].size()) +
                                 " values, expected " + std::to_string(metrics.size()));
        }
        const bool missing = std::any_of(values[m].begin(), values[m].end(), [](double v) { return std::isnan(v); });
        if (missing) {
            t.warnings.push_back("method '" + methods[m] + "' has a missing value and was excluded");
            continue;
        }
        t.methods.push_back(methods[m]);
        t.values.push_back(values[m]);
    }
    const std::size_t M = t.methods.size();
    if (M < 2) {
        throw std::invalid_argument("avg_rank: need at least two complete methods, got " + std::to_string(M));
    }
    t.ranks.assign(M, std::vector<double>(metrics.size(), 0.0));
    t.avg_rank.assign(M, 0.0);
    std::vector<std::size_t> order(M);
    for (std::size_t k = 0; k < metrics.size(); ++k) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        const bool hib = higher_is_better[k];
        std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
            return hib ? t.values[i][k] > t.values[j][k] : t.values[i][k] < t.values[j][k];
        });
        std::size_t start = 0;
        while (start < M) {
            std::size_t end = start + 1;
            while (end < M && t.values[order[end]][k] == t.values[order[start]][k]) ++end;
            const double rank = tie == TieRule::Average ? (static_cast<double>(start + 1) + static_cast<double>(end)) / 2.0
                                                        : static_cast<double>(start + 1);
            for (std::size_t p = start; p < end; ++p) t.ranks[order[p]][k] = rank;
            start = end;
        }
    }
    for (std::size_t m = 0; m < M; ++m) {
        double s = 0.0;
        for (double r : t.ranks[m]) s += r;
        t.avg_rank[m] = s / static_cast<double>(metrics.size());
    }
    return t;
}

}  // namespace isfm
