#include "isfm/bench.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>

#include "isfm/net.hpp"
#include "isfm/ssm.hpp"
#include "isfm/wavelet.hpp"
#include "isfm/weights.hpp"

namespace isfm {

BenchOp parse_bench_op(const std::string& name) {
    if (name == "scan") return BenchOp::Scan;
    if (name == "dwt") return BenchOp::Dwt;
    if (name == "forward") return BenchOp::Forward;
    throw std::invalid_argument("unknown bench op '" + name + "' (scan, dwt, forward)");
}

const char* to_string(BenchOp op) {
    switch (op) {
        case BenchOp::Scan: return "scan";
        case BenchOp::Dwt: return "dwt";
        case BenchOp::Forward: return "forward";
    }
    return "?";
}

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, float lo, float hi) {
    std::uniform_real_distribution<float> d(lo, hi);
    Tensor t(std::move(shape));
    for (float& v : t.data()) v = d(rng);
    return t;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<BenchPoint> run_bench(const BenchOptions& opt) {
    if (opt.sizes.empty()) throw std::invalid_argument("bench: no sizes given");
    if (opt.repeats == 0) throw std::invalid_argument("bench: repeats must be >= 1");
    for (std::size_t i = 1; i < opt.sizes.size(); ++i) {
        if (opt.sizes[i] <= opt.sizes[i - 1]) throw std::invalid_argument("bench: sizes must increase monotonically");
    }
    std::mt19937_64 rng(opt.seed);
    std::vector<std::function<void()>> jobs;

    if (opt.op == BenchOp::Scan) {
        const std::size_t D = opt.channels;
        const std::size_t N = opt.state_size;
        auto p = std::make_shared<SsmParams>();
        p->a_log = Tensor({D, N});
        for (std::size_t i = 0; i < p->a_log.size(); ++i) p->a_log[i] = std::log(static_cast<float>(i % N + 1));
        p->d_skip = Tensor::full({D}, 1.0f);
        for (std::size_t L : opt.sizes) {
            auto in = std::make_shared<std::array<Tensor, 4>>(std::array<Tensor, 4>{
                random_tensor({L, D}, rng, -1.0f, 1.0f), random_tensor({L, D}, rng, 1e-3f, 1e-1f),
                random_tensor({L, N}, rng, -1.0f, 1.0f), random_tensor({L, N}, rng, -1.0f, 1.0f)});
            jobs.push_back([p, in] { (void)selective_scan((*in)[0], (*in)[1], (*in)[2], (*in)[3], *p); });
        }
    } else if (opt.op == BenchOp::Dwt) {
        for (std::size_t s : opt.sizes) {
            auto x = std::make_shared<Tensor>(random_tensor({opt.channels, s, s}, rng, 0.0f, 1.0f));
            jobs.push_back([x] { (void)idwt2(dwt2_padded(*x)); });
        }
    } else {
        auto w = std::make_shared<IsfmWeights>(bind_weights(init_weights(opt.forward_cfg, opt.seed), opt.forward_cfg));
        const IsfmConfig cfg = opt.forward_cfg;
        for (std::size_t s : opt.sizes) {
            auto pair = std::make_shared<ModalityPair>(ModalityPair{
                random_tensor({1, s, s}, rng, 0.0f, 1.0f), random_tensor({1, s, s}, rng, 0.0f, 1.0f),
                Tensor::full({1, s, s}, 0.5f), Tensor::full({1, s, s}, 0.5f)});
            jobs.push_back([w, pair, cfg] { (void)isfm_forward(*pair, *w, cfg); });
        }
    }

    // One warm-up per size, then rounds that time each size once.
    for (const auto& job : jobs) job();
    std::vector<std::vector<double>> times(jobs.size());
    for (std::size_t r = 0; r < opt.repeats; ++r) {
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            jobs[i]();
            const auto t1 = std::chrono::steady_clock::now();
            times[i].push_back(std::chrono::duration<double>(t1 - t0).count());
        }
    }
    std::vector<BenchPoint> out;
    for (std::size_t i = 0; i < jobs.size(); ++i) out.push_back({opt.sizes[i], median(times[i])});
    return out;
}

double loglog_slope(const std::vector<BenchPoint>& points) {
    if (points.size() < 2) return std::nan("");
    double sx = 0.0;
    double sy = 0.0;
    for (const auto& p : points) {
        sx += std::log(static_cast<double>(p.size));
        sy += std::log(std::max(p.median_seconds, 1e-12));
    }
    const double n = static_cast<double>(points.size());
    const double mx = sx / n;
    const double my = sy / n;
    double num = 0.0;
    double den = 0.0;
    for (const auto& p : points) {
        const double dx = std::log(static_cast<double>(p.size)) - mx;
        num += dx * (std::log(std::max(p.median_seconds, 1e-12)) - my);
        den += dx * dx;
    }
    return den == 0.0 ? std::nan("") : num / den;
}

}  // namespace isfm
