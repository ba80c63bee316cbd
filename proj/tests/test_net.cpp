#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <string>

#include "isfm/color.hpp"
#include "isfm/net.hpp"
#include "isfm/parallel.hpp"
#include "isfm/weights.hpp"
#include "oracles.hpp"

using namespace isfm;

namespace {

IsfmConfig small_config() {
    IsfmConfig cfg;
    cfg.channels = 8;
    cfg.num_vssm = 1;
    return cfg;
}

const IsfmWeights& small_weights() {
    static const IsfmWeights w = bind_weights(init_weights(small_config(), 42), small_config());
    return w;
}

ModalityPair random_pair(std::size_t h, std::size_t w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ModalityPair p;
    p.ir = oracle::random_tensor({1, h, w}, rng, 0.0f, 1.0f);
    p.vi_y = oracle::random_tensor({1, h, w}, rng, 0.0f, 1.0f);
    p.vi_cb = Tensor({1, h, w}, 0.5f);
    p.vi_cr = Tensor({1, h, w}, 0.5f);
    return p;
}

Tensor roll(const Tensor& x, std::size_t dy, std::size_t dx) {
    Tensor y(x.shape());
    const std::size_t H = x.height(), W = x.width();
    for (std::size_t c = 0; c < x.channels(); ++c) {
        for (std::size_t r = 0; r < H; ++r) {
            for (std::size_t q = 0; q < W; ++q) y.at(c, (r + dy) % H, (q + dx) % W) = x.at(c, r, q);
        }
    }
    return y;
}

Tensor map_channels(std::size_t C, std::size_t h, std::size_t w, std::mt19937_64& rng) {
    return oracle::random_tensor({C, h, w}, rng, -1.0f, 1.0f);
}

}  // namespace

TEST(Color, ReferenceColors) {
    Tensor white({3, 1, 1}, 1.0f);
    auto y = rgb_to_ycbcr(white);
    EXPECT_NEAR(y.y[0], 1.0f, 1e-6);
    EXPECT_NEAR(y.cb[0], 0.5f, 1e-6);
    EXPECT_NEAR(y.cr[0], 0.5f, 1e-6);
    EXPECT_FALSE(y.clamped);

    y = rgb_to_ycbcr(Tensor({3, 1, 1}));
    EXPECT_EQ(y.y[0], 0.0f);
    EXPECT_EQ(y.cb[0], 0.5f);
    EXPECT_EQ(y.cr[0], 0.5f);

    y = rgb_to_ycbcr(Tensor({3, 1, 1}, std::vector<float>{1, 0, 0}));
    EXPECT_NEAR(y.y[0], 0.299f, 1e-6);
    EXPECT_NEAR(y.cr[0], 0.999813f, 1e-6);
    EXPECT_NEAR(y.cb[0], 0.331364f, 1e-6);
}

TEST(Color, OutOfRangeInputIsClampedAndFlagged) {
    const auto y = rgb_to_ycbcr(Tensor({3, 1, 1}, std::vector<float>{1.5f, -0.2f, 0.5f}));
    EXPECT_TRUE(y.clamped);
    EXPECT_GE(y.y[0], 0.0f);
    EXPECT_LE(y.y[0], 1.0f);
}

TEST(Color, RoundTrip) {
    std::mt19937_64 rng(1);
    const Tensor rgb = oracle::random_tensor({3, 9, 7}, rng, 0.05f, 0.95f);
    const auto ycc = rgb_to_ycbcr(rgb);
    const auto back = ycbcr_to_rgb(ycc.y, ycc.cb, ycc.cr);
    EXPECT_LE(oracle::max_abs_diff(back.rgb, rgb), 2e-3);
}

TEST(Color, GrayChromaReplicatesLuma) {
    std::mt19937_64 rng(2);
    const Tensor y = oracle::random_tensor({1, 4, 4}, rng, 0.0f, 1.0f);
    const Tensor rgb = fuse_color(y, Tensor({1, 4, 4}, 0.5f), Tensor({1, 4, 4}, 0.5f));
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(rgb.channel(c)[i], y[i], 1e-6);
    }
}

TEST(Color, FuseColorStaysInRange) {
    std::mt19937_64 rng(3);
    const Tensor rgb = fuse_color(oracle::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f),
                                  oracle::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f),
                                  oracle::random_tensor({1, 8, 8}, rng, 0.0f, 1.0f));
    for (float v : rgb.data()) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
    }
    EXPECT_THROW(fuse_color(Tensor({1, 2, 2}), Tensor({1, 2, 3}), Tensor({1, 2, 2})), DimensionError);
}

TEST(Mse, ShapeDeterminismAndUnsharedBranches) {
    const auto& w = small_weights();
    std::mt19937_64 rng(4);
    const Tensor img = oracle::random_tensor({1, 10, 12}, rng, 0.0f, 1.0f);
    const Tensor a = mse_forward(img, Branch::Ir, w);
    const Tensor b = mse_forward(img, Branch::Vi, w);
    EXPECT_EQ(a.shape(), (Shape{8, 10, 12}));
    EXPECT_NE(a, b);
    EXPECT_EQ(mse_forward(img, Branch::Ir, w), a);
    EXPECT_THROW(mse_forward(Tensor({2, 4, 4}), Branch::Ir, w), DimensionError);
}

TEST(Lffb, AttentionInOpenUnitInterval) {
    const auto& w = small_weights();
    std::mt19937_64 rng(5);
    Tensor attn;
    lffb(map_channels(8, 6, 6, rng), map_channels(8, 6, 6, rng), w.mff.lffb, [&](std::string_view n, const Tensor& t) {
        if (n == "lffb.attention") attn = t;
    });
    ASSERT_EQ(attn.shape(), (Shape{1, 6, 6}));
    for (float v : attn.data()) {
        EXPECT_GT(v, 0.0f);
        EXPECT_LT(v, 1.0f);
    }
}

TEST(Lffb, InputOrderIsIrrelevant) {
    const auto& w = small_weights();
    std::mt19937_64 rng(6);
    const Tensor a = map_channels(8, 5, 7, rng), b = map_channels(8, 5, 7, rng);
    EXPECT_EQ(lffb(a, b, w.mff.lffb), lffb(b, a, w.mff.lffb));
}

TEST(Lffb, ZeroInputWithZeroBiasesGivesZero) {
    const auto& w = small_weights();
    const Tensor z({8, 4, 4});
    const Tensor y = lffb(z, z, w.mff.lffb);
    for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Hffb, InputOrderIsIrrelevant) {
    const auto& w = small_weights();
    std::mt19937_64 rng(7);
    const Tensor a = map_channels(8, 6, 5, rng), b = map_channels(8, 6, 5, rng);
    EXPECT_EQ(hffb(a, b, w.mff.hffb), hffb(b, a, w.mff.hffb));
}

TEST(Hffb, ConstantInputLeavesOnlyBias) {
    std::mt19937_64 rng(8);
    HffbParams p = small_weights().mff.hffb;
    p.s1.bias = oracle::random_tensor({8}, rng);
    Tensor s1;
    hffb(Tensor({8, 7, 7}, 0.3f), Tensor({8, 7, 7}, -0.1f), p, [&](std::string_view n, const Tensor& t) {
        if (n == "hffb.s1") s1 = t;
    });
    for (std::size_t c = 0; c < 8; ++c) {
        for (float v : s1.channel(c)) EXPECT_NEAR(v, silu(p.s1.bias[c]), 1e-6);
    }
}

TEST(Hffb, ImpulseResponseStaysLocal) {
    const auto& w = small_weights();
    Tensor imp({8, 9, 9});
    for (std::size_t c = 0; c < 8; ++c) imp.at(c, 4, 4) = 1.0f;
    Tensor s1;
    hffb(imp, Tensor({8, 9, 9}), w.mff.hffb, [&](std::string_view n, const Tensor& t) {
        if (n == "hffb.s1") s1 = t;
    });
    double inside = 0.0;
    for (std::size_t c = 0; c < 8; ++c) {
        for (std::size_t r = 0; r < 9; ++r) {
            for (std::size_t q = 0; q < 9; ++q) {
                const bool near = r >= 3 && r <= 5 && q >= 3 && q <= 5;
                if (near) {
                    inside += std::abs(s1.at(c, r, q));
                } else {
                    EXPECT_EQ(s1.at(c, r, q), 0.0f);
                }
            }
        }
    }
    EXPECT_GT(inside, 0.0);
}

TEST(Mff, ShapesAndSwapSymmetry) {
    const auto& w = small_weights();
    std::mt19937_64 rng(9);
    const Tensor a = map_channels(8, 10, 14, rng), b = map_channels(8, 10, 14, rng);
    const auto ab = mff(a, b, w.mff);
    const auto ba = mff(b, a, w.mff);
    EXPECT_EQ(ab.bands.ll.shape(), (Shape{8, 5, 7}));
    EXPECT_EQ(ab.bands.hh.shape(), (Shape{8, 5, 7}));
    EXPECT_EQ(ab.spatial.shape(), (Shape{8, 10, 14}));
    EXPECT_EQ(ab.bands.ll, ba.bands.ll);
    EXPECT_EQ(ab.bands.lh, ba.bands.lh);
    EXPECT_EQ(ab.bands.hl, ba.bands.hl);
    EXPECT_EQ(ab.bands.hh, ba.bands.hh);
    EXPECT_EQ(ab.spatial, ba.spatial);
}

TEST(Mff, OddExtentsAreHandled) {
    const auto& w = small_weights();
    std::mt19937_64 rng(10);
    const auto ctx = mff(map_channels(8, 7, 9, rng), map_channels(8, 7, 9, rng), w.mff);
    EXPECT_EQ(ctx.bands.ll.shape(), (Shape{8, 4, 5}));
    EXPECT_EQ(ctx.spatial.shape(), (Shape{8, 7, 9}));
}

TEST(Mff, ConstantFeaturesFeedZeroHighBands) {
    const auto& w = small_weights();
    const Tensor f({8, 6, 6}, 0.7f);
    const auto ctx = mff(f, f, w.mff);
    const auto zero = hffb(Tensor({8, 3, 3}), Tensor({8, 3, 3}), w.mff.hffb);
    EXPECT_EQ(ctx.bands.lh, zero);
    EXPECT_EQ(ctx.bands.hl, zero);
    EXPECT_EQ(ctx.bands.hh, zero);
}

TEST(Mff, TranslationCovarianceAwayFromBorder) {
    const auto& w = small_weights();
    std::mt19937_64 rng(11);
    const std::size_t H = 32, W = 32, shift = 2, frame = 7;
    const Tensor a = map_channels(8, H, W, rng), b = map_channels(8, H, W, rng);
    const Tensor moved = mff(roll(a, shift, shift), roll(b, shift, shift), w.mff).spatial;
    const Tensor expect = roll(mff(a, b, w.mff).spatial, shift, shift);
    for (std::size_t c = 0; c < 8; ++c) {
        for (std::size_t r = frame; r < H - frame; ++r) {
            for (std::size_t q = frame; q < W - frame; ++q) {
                ASSERT_NEAR(moved.at(c, r, q), expect.at(c, r, q), 1e-5) << c << "," << r << "," << q;
            }
        }
    }
}

TEST(Fgg, ZeroFrequencyStatisticsKeepGlobalFeatures) {
    IsfmWeights w = small_weights();
    w.fgg.fc.weights = Tensor(w.fgg.fc.weights.shape());
    w.fgg.fc.bias = Tensor({w.fgg.fc.weights.extent(0)});
    std::mt19937_64 rng(12);
    const Tensor z_ir = map_channels(16, 6, 6, rng), z_vi = map_channels(16, 6, 6, rng);
    const auto ctx = mff(map_channels(8, 6, 6, rng), map_channels(8, 6, 6, rng), w.mff);
    std::map<std::string, Tensor> seen;
    const Gates g = fgg(z_ir, z_vi, ctx, w.fgg, [&](std::string_view n, const Tensor& t) { seen[std::string(n)] = t; });
    EXPECT_EQ(seen.at("fgg.z_g"), seen.at("fgg.z_global"));
    EXPECT_EQ(g.ir.shape(), (Shape{16, 6, 6}));
    EXPECT_EQ(g.vi.shape(), (Shape{16, 6, 6}));
}

TEST(Fgg, TranslatedContextGivesSameGates) {
    const auto& w = small_weights();
    std::mt19937_64 rng(13);
    const Tensor z_ir = map_channels(16, 8, 8, rng), z_vi = map_channels(16, 8, 8, rng);
    const auto ctx = mff(map_channels(8, 8, 8, rng), map_channels(8, 8, 8, rng), w.mff);
    FrequencyContext moved = ctx;
    moved.bands.ll = roll(ctx.bands.ll, 1, 3);
    moved.bands.lh = roll(ctx.bands.lh, 1, 3);
    moved.bands.hl = roll(ctx.bands.hl, 1, 3);
    moved.bands.hh = roll(ctx.bands.hh, 1, 3);
    const Gates a = fgg(z_ir, z_vi, ctx, w.fgg);
    const Gates b = fgg(z_ir, z_vi, moved, w.fgg);
    EXPECT_LE(oracle::max_abs_diff(a.ir, b.ir), 1e-6);
    EXPECT_LE(oracle::max_abs_diff(a.vi, b.vi), 1e-6);
}

TEST(Fgg, MismatchedBandsThrow) {
    const auto& w = small_weights();
    const auto ctx = FrequencyContext::zeros(4, 6, 6);
    EXPECT_THROW(fgg(Tensor({16, 6, 6}), Tensor({16, 6, 6}), ctx, w.fgg), DimensionError);
}

TEST(Fgm, ShapeAndResidualPath) {
    const auto& base = small_weights();
    std::mt19937_64 rng(14);
    const Tensor a = map_channels(8, 6, 7, rng), b = map_channels(8, 6, 7, rng);
    const auto ctx = mff(a, b, base.mff);
    EXPECT_EQ(fgm(a, b, ctx, base.fgm, base.fgg, true).shape(), (Shape{8, 6, 7}));

    FgmParams p = base.fgm;
    p.out_proj.weights = Tensor(p.out_proj.weights.shape());
    p.out_proj.bias = Tensor({8});
    p.s1 = 0.75f;
    p.s2 = -1.25f;
    const Tensor y = fgm(a, b, ctx, p, base.fgg, true);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], 0.75f * a[i] + -1.25f * b[i]);
}

TEST(Fgm, TiedStreamsAreSwapSymmetric) {
    FgmParams p = small_weights().fgm;
    p.vi = p.ir;
    p.s1 = 0.6f;
    p.s2 = 1.4f;
    FgmParams q = p;
    std::swap(q.s1, q.s2);
    std::mt19937_64 rng(15);
    const Tensor a = map_channels(8, 5, 6, rng), b = map_channels(8, 5, 6, rng);
    const auto ctx = FrequencyContext::zeros(8, 5, 6);
    const Tensor ab = fgm(a, b, ctx, p, small_weights().fgg, false);
    const Tensor ba = fgm(b, a, ctx, q, small_weights().fgg, false);
    EXPECT_LE(oracle::max_abs_diff(ab, ba), 1e-6);
}

TEST(Forward, OutputContractAndFiniteIntermediates) {
    const auto& w = small_weights();
    const auto pair = random_pair(16, 20, 16);
    std::map<std::string, int> names;
    const Tensor y = isfm_forward(pair, w, small_config(), [&](std::string_view n, const Tensor& t) {
        ++names[std::string(n)];
        EXPECT_TRUE(t.all_finite()) << n;
    });
    EXPECT_EQ(y.shape(), (Shape{1, 16, 20}));
    for (float v : y.data()) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
    }
    for (const char* n : {"mse.ir", "mse.vi", "mff.spatial", "fgg.z_f", "fgm.out", "fuse.spatial", "head.hidden",
                          "output"}) {
        EXPECT_EQ(names.count(n), 1u) << n;
    }
    EXPECT_EQ(names["hffb.s1"], 3);
}

TEST(Forward, DeterministicAcrossThreadCounts) {
    const auto& w = small_weights();
    const auto pair = random_pair(18, 14, 17);
    set_num_threads(1);
    const Tensor a = isfm_forward(pair, w, small_config());
    const Tensor b = isfm_forward(pair, w, small_config());
    set_num_threads(4);
    const Tensor c = isfm_forward(pair, w, small_config());
    set_num_threads(1);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
}

TEST(Forward, AblationSwitchesAreLive) {
    const auto& w = small_weights();
    const auto pair = random_pair(12, 12, 18);
    const Tensor full = isfm_forward(pair, w, small_config());
    for (int k = 0; k < 3; ++k) {
        IsfmConfig cfg = small_config();
        (k == 0 ? cfg.enable_mff : k == 1 ? cfg.enable_fgg : cfg.enable_fgm) = false;
        const Tensor y = isfm_forward(pair, w, cfg);
        EXPECT_NE(y, full) << k;
        EXPECT_TRUE(y.all_finite());
    }
}

TEST(Forward, DisabledFrequencyPathSkipsMff) {
    const auto& w = small_weights();
    IsfmConfig cfg = small_config();
    cfg.enable_mff = false;
    bool mff_ran = false;
    isfm_forward(random_pair(8, 8, 19), w, cfg, [&](std::string_view n, const Tensor&) {
        if (n.substr(0, 4) == "mff.") mff_ran = true;
    });
    EXPECT_FALSE(mff_ran);
}

TEST(Forward, Errors) {
    const auto& w = small_weights();
    auto pair = random_pair(8, 8, 20);
    pair.vi_y = Tensor({1, 8, 9});
    EXPECT_THROW(isfm_forward(pair, w, small_config()), DimensionError);
    IsfmConfig other = small_config();
    other.channels = 16;
    EXPECT_THROW(isfm_forward(random_pair(8, 8, 21), w, other), ConfigError);
}

TEST(Bind, MissingTensorIsNamed) {
    WeightArchive a = init_weights(small_config(), 1);
    WeightArchive b;
    for (const auto& [name, t] : a.entries()) {
        if (name != "fgg.fc.weight") b.insert(name, t);
    }
    try {
        bind_weights(b, small_config());
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("fgg.fc.weight"), std::string::npos);
    }
}

TEST(Config, Validation) {
    IsfmConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.inner(), 256u);
    EXPECT_EQ(cfg.dt_rank(), 16u);
    cfg.channels = 7;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = IsfmConfig{};
    cfg.expansion = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = IsfmConfig{};
    cfg.k_directions = 2;
    EXPECT_THROW(cfg.validate(), ConfigError);
}
