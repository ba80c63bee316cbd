#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "isfm/kernels.hpp"
#include "isfm/metrics.hpp"
#include "oracles.hpp"

using namespace isfm;

namespace {

Tensor levels_image(std::size_t h, std::size_t w, const std::vector<int>& q) {
    Tensor t({1, h, w});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(q[i % q.size()]) / 255.0f;
    return t;
}

Tensor all_levels() {
    std::vector<int> q(256);
    for (int i = 0; i < 256; ++i) q[i] = i;
    return levels_image(16, 16, q);
}

Tensor stripes(std::size_t h, std::size_t w) {
    Tensor t({1, h, w});
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) t.at(0, y, x) = x % 2 ? 1.0f : 0.0f;
    }
    return t;
}

Tensor transpose(const Tensor& t) {
    Tensor o({1, t.width(), t.height()});
    for (std::size_t y = 0; y < t.height(); ++y) {
        for (std::size_t x = 0; x < t.width(); ++x) o.at(0, x, y) = t.at(0, y, x);
    }
    return o;
}

Tensor natural(std::uint64_t seed, std::size_t n = 64) {
    std::mt19937_64 rng(seed);
    Tensor t = oracle::smooth_image(n, n, rng, 1);
    float lo = 1.0f, hi = 0.0f;
    for (float v : t.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (float& v : t.data()) v = (v - lo) / (hi - lo);
    return t;
}

Tensor noise(std::uint64_t seed, std::size_t n = 64) {
    std::mt19937_64 rng(seed);
    return oracle::random_tensor({1, n, n}, rng, 0.0f, 1.0f);
}

struct Table {
    std::vector<std::string> methods;
    std::vector<std::string> metrics;
    std::vector<std::vector<double>> values;
};

Table read_table(const std::string& file) {
    std::ifstream is(std::string(ISFM_TEST_DATA_DIR) + "/" + file);
    Table t;
    std::string line;
    std::getline(is, line);
    std::istringstream hs(line);
    std::string cell;
    std::getline(hs, cell, ',');
    while (std::getline(hs, cell, ',')) t.metrics.push_back(cell);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::getline(ls, cell, ',');
        t.methods.push_back(cell);
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        t.values.push_back(row);
    }
    return t;
}

double avg_rank_of(const Table& t, const std::string& method) {
    const auto r = avg_rank(t.methods, t.metrics, t.values, std::vector<bool>(t.metrics.size(), true));
    for (std::size_t m = 0; m < r.methods.size(); ++m) {
        if (r.methods[m] == method) return r.avg_rank[m];
    }
    return -1.0;
}

}  // namespace

TEST(Quantize, RoundsAndClamps) {
    const Tensor t({1, 1, 5}, std::vector<float>{-0.5f, 0.0f, 0.5f / 255.0f, 1.0f, 2.0f});
    const auto q = quantize(t);
    EXPECT_EQ(q, (std::vector<std::uint8_t>{0, 0, 1, 255, 255}));
}

TEST(Entropy, ConstantIsZero) {
    EXPECT_EQ(entropy(Tensor({1, 9, 7}, 0.4f)), 0.0);
}

TEST(Entropy, TwoEqualLevelsIsOneBit) {
    EXPECT_DOUBLE_EQ(entropy(levels_image(4, 4, {0, 255})), 1.0);
}

TEST(Entropy, AllLevelsIsEightBits) {
    EXPECT_EQ(entropy(all_levels()), 8.0);
}

TEST(Entropy, RejectsColor) {
    EXPECT_THROW(entropy(Tensor({3, 4, 4})), DimensionError);
}

TEST(SpatialFrequency, VerticalStripes) {
    EXPECT_NEAR(spatial_frequency(stripes(16, 16)), 255.0, 1e-6);
    EXPECT_NEAR(spatial_frequency(transpose(stripes(16, 16))), 255.0, 1e-6);
}

TEST(SpatialFrequency, ConstantIsZero) {
    EXPECT_EQ(spatial_frequency(Tensor({1, 5, 5}, 0.7f)), 0.0);
}

TEST(SpatialFrequency, TransposeInvariant) {
    const Tensor t = noise(1, 24);
    EXPECT_NEAR(spatial_frequency(t), spatial_frequency(transpose(t)), 1e-9);
}

TEST(AvgGradient, RampHasUnitSteps) {
    Tensor t({1, 8, 8});
    for (std::size_t y = 0; y < 8; ++y) {
        for (std::size_t x = 0; x < 8; ++x) t.at(0, y, x) = static_cast<float>(x) / 255.0f;
    }
    EXPECT_NEAR(avg_gradient(t), std::sqrt(0.5), 1e-12);
    EXPECT_EQ(avg_gradient(Tensor({1, 8, 8}, 0.3f)), 0.0);
}

TEST(MutualInformation, IdenticalImagesGiveTwiceEntropy) {
    const Tensor a = natural(2);
    EXPECT_NEAR(mutual_information(a, a, a), 2.0 * entropy(a), 1e-9);
    const Tensor u = all_levels();
    EXPECT_NEAR(mutual_information(u, u, u), 16.0, 1e-9);
}

TEST(MutualInformation, IndependentImagesShareLittle) {
    const Tensor a = noise(3, 128);
    const Tensor b = Tensor({1, 128, 128}, 0.5f);
    EXPECT_LE(mutual_information(a, b, b), 0.05);
    EXPECT_EQ(mutual_information(b, b, b), 0.0);
}

TEST(MutualInformation, SourceOrderIsIrrelevant) {
    const Tensor a = natural(4), b = natural(5), f = natural(6);
    EXPECT_NEAR(mutual_information(a, b, f), mutual_information(b, a, f), 1e-12);
}

TEST(Qabf, PerfectFusionScoresHigh) {
    const Tensor a = natural(7);
    EXPECT_GE(qabf(a, a, a), 0.95);
    EXPECT_LE(qabf(a, a, a), 1.0);
}

TEST(Qabf, ConstantFusionScoresLow) {
    const Tensor a = natural(8), b = natural(9);
    EXPECT_LE(qabf(a, b, Tensor({1, 64, 64}, 0.5f)), 0.05);
}

TEST(Qabf, NoEdgesGivesZero) {
    const Tensor c({1, 16, 16}, 0.2f);
    EXPECT_EQ(qabf(c, c, c), 0.0);
}

TEST(Qabf, RangeOverRandomTriples) {
    std::mt19937_64 rng(10);
    for (int i = 0; i < 1000; ++i) {
        const Tensor a = oracle::random_tensor({1, 12, 12}, rng, 0.0f, 1.0f);
        const Tensor b = oracle::random_tensor({1, 12, 12}, rng, 0.0f, 1.0f);
        const Tensor f = oracle::random_tensor({1, 12, 12}, rng, 0.0f, 1.0f);
        const double q = qabf(a, b, f);
        ASSERT_GE(q, 0.0);
        ASSERT_LE(q, 1.0);
    }
}

TEST(Qabf, SourceOrderIsIrrelevant) {
    const Tensor a = natural(11), b = natural(12), f = natural(13);
    EXPECT_NEAR(qabf(a, b, f), qabf(b, a, f), 1e-12);
}

TEST(Vif, SelfIsOne) {
    const Tensor a = natural(14);
    EXPECT_NEAR(vif(a, a), 1.0, 0.02);
    EXPECT_NEAR(vif_fusion(a, a, a), 1.0, 0.02);
}

TEST(Vif, BlurLowersScore) {
    const Tensor a = natural(15);
    const Tensor blurred = gaussian_filter(a, 2.0, 6);
    const double v = vif(a, blurred);
    EXPECT_LT(v, 0.9);
    EXPECT_GE(v, 0.0);
}

TEST(Vif, NonNegativeOnNoise) {
    const Tensor a = natural(16), n = noise(17);
    EXPECT_GE(vif(a, n), 0.0);
    EXPECT_GE(vif_fusion(a, n, n), 0.0);
}

TEST(Scd, SumOfSourcesIsNearTwo) {
    std::mt19937_64 rng(18);
    const Tensor a = oracle::random_tensor({1, 64, 64}, rng, 0.0f, 0.5f);
    const Tensor b = oracle::random_tensor({1, 64, 64}, rng, 0.0f, 0.5f);
    Tensor f(a.shape());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = a[i] + b[i];
    EXPECT_NEAR(scd(a, b, f), 2.0, 0.01);
}

TEST(Scd, UnrelatedFusionIsNearZero) {
    const Tensor a = noise(19, 128), b = noise(20, 128), f = noise(21, 128);
    // corr(f - b, a) is a correlation of independent noise fields.
    EXPECT_LE(std::abs(scd(a, b, f)), 0.1);
}

TEST(Scd, SwapIsBitExact) {
    std::mt19937_64 rng(22);
    for (int i = 0; i < 50; ++i) {
        const Tensor a = oracle::random_tensor({1, 16, 16}, rng, 0.0f, 1.0f);
        const Tensor b = oracle::random_tensor({1, 16, 16}, rng, 0.0f, 1.0f);
        const Tensor f = oracle::random_tensor({1, 16, 16}, rng, 0.0f, 1.0f);
        EXPECT_EQ(scd(a, b, f), scd(b, a, f));
    }
}

TEST(Scd, ZeroVarianceTermContributesNothing) {
    const Tensor c({1, 8, 8}, 0.5f);
    EXPECT_EQ(scd(c, c, c), 0.0);
}

TEST(EvaluatePair, FieldsMatchIndividualMetrics) {
    const Tensor a = natural(23, 32), b = natural(24, 32), f = natural(25, 32);
    const auto r = evaluate_pair(a, b, f, "x");
    EXPECT_EQ(r.name, "x");
    EXPECT_EQ(r.en, entropy(f));
    EXPECT_EQ(r.sf, spatial_frequency(f));
    EXPECT_EQ(r.ag, avg_gradient(f));
    EXPECT_EQ(r.vif, vif_fusion(a, b, f));
    EXPECT_EQ(r.mi, mutual_information(a, b, f));
    EXPECT_EQ(r.qabf, qabf(a, b, f));
    EXPECT_EQ(r.scd, scd(a, b, f));
    EXPECT_EQ(metric_values(r).size(), kMetricNames.size());
}

TEST(EvaluatePair, ShapeMismatchThrows) {
    EXPECT_THROW(evaluate_pair(Tensor({1, 8, 8}), Tensor({1, 8, 9}), Tensor({1, 8, 8})), DimensionError);
}

TEST(AvgRank, PublishedTables) {
    EXPECT_NEAR(avg_rank_of(read_table("scores_msrs.csv"), "ISFM"), 1.14, 0.01);
    EXPECT_NEAR(avg_rank_of(read_table("scores_fmb.csv"), "ISFM"), 1.71, 0.01);
    const double road = avg_rank_of(read_table("scores_roadscene.csv"), "ISFM");
    EXPECT_GE(road, 1.0);
    EXPECT_NEAR(road, 2.00, 0.01);
}

TEST(AvgRank, TwoMethods) {
    const auto r = avg_rank({"a", "b"}, {"x", "y"}, {{2.0, 1.0}, {1.0, 0.0}}, {true, true});
    EXPECT_EQ(r.avg_rank, (std::vector<double>{1.0, 2.0}));
    const auto lower = avg_rank({"a", "b"}, {"x"}, {{2.0}, {1.0}}, {false});
    EXPECT_EQ(lower.avg_rank, (std::vector<double>{2.0, 1.0}));
}

TEST(AvgRank, TiesShareAverageOrMinPosition) {
    const std::vector<std::vector<double>> v = {{1.0}, {1.0}, {0.5}};
    EXPECT_EQ(avg_rank({"a", "b", "c"}, {"x"}, v, {true}).avg_rank, (std::vector<double>{1.5, 1.5, 3.0}));
    EXPECT_EQ(avg_rank({"a", "b", "c"}, {"x"}, v, {true}, TieRule::Min).avg_rank,
              (std::vector<double>{1.0, 1.0, 3.0}));
}

TEST(AvgRank, MissingValuesAreExcludedWithWarning) {
    const auto r = avg_rank({"a", "b", "c"}, {"x"}, {{1.0}, {std::nan("")}, {3.0}}, {true});
    EXPECT_EQ(r.methods, (std::vector<std::string>{"a", "c"}));
    EXPECT_EQ(r.avg_rank, (std::vector<double>{2.0, 1.0}));
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("'b'"), std::string::npos);
}

TEST(AvgRank, Errors) {
    EXPECT_THROW(avg_rank({"a"}, {"x"}, {{1.0}}, {true}), std::invalid_argument);
    EXPECT_THROW(avg_rank({"a", "b"}, {"x"}, {{1.0}, {std::nan("")}}, {true}), std::invalid_argument);
    EXPECT_THROW(avg_rank({"a", "b"}, {"x"}, {{1.0}, {2.0, 3.0}}, {true}), DimensionError);
    EXPECT_THROW(avg_rank({"a", "b"}, {"x"}, {{1.0}, {2.0}}, {true, false}), DimensionError);
}
