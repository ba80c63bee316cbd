#include <gtest/gtest.h>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "isfm/weights.hpp"
#include "oracles.hpp"

using namespace isfm;

namespace {

IsfmConfig small_config() {
    IsfmConfig c;
    c.channels = 8;
    c.num_vssm = 1;
    return c;
}

WeightArchive random_archive(std::mt19937_64& rng) {
    WeightArchive a;
    const std::size_t n = 1 + rng() % 5;
    for (std::size_t i = 0; i < n; ++i) {
        std::string name = "t" + std::to_string(i);
        const std::size_t extra = rng() % 12;
        for (std::size_t k = 0; k < extra; ++k) name.push_back(static_cast<char>('!' + rng() % 94));
        Shape shape(1 + rng() % 4);
        for (auto& e : shape) e = 1 + rng() % 4;
        a.insert(name, oracle::random_tensor(shape, rng, -3.0f, 3.0f));
    }
    return a;
}

ArchiveErrc error_of(const std::vector<std::uint8_t>& bytes) {
    try {
        deserialize(bytes);
    } catch (const ArchiveError& e) {
        return e.code();
    }
    ADD_FAILURE() << "corruption not detected";
    return ArchiveErrc::Io;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("isfm_test_" + name);
}

}  // namespace

TEST(InitWeights, DeterministicForSeed) {
    const auto a = init_weights(small_config(), 42);
    const auto b = init_weights(small_config(), 42);
    EXPECT_EQ(serialize(a), serialize(b));
    const auto c = init_weights(small_config(), 43);
    EXPECT_NE(serialize(a), serialize(c));
}

TEST(InitWeights, KindsFollowTheirRules) {
    const auto a = init_weights(small_config(), 1);
    for (float v : a.at("mse.ir.conv1.bias").data()) EXPECT_EQ(v, 0.0f);
    for (float v : a.at("mse.ir.vssm0.ln_in.gain").data()) EXPECT_EQ(v, 1.0f);
    for (float v : a.at("fgm.s1").data()) EXPECT_EQ(v, 1.0f);
    for (float v : a.at("fgm.ir.ssm.row_fwd.d_skip").data()) EXPECT_EQ(v, 1.0f);
    const Tensor& a_log = a.at("fgm.ir.ssm.row_fwd.a_log");
    EXPECT_FLOAT_EQ(a_log[0], 0.0f);
    EXPECT_FLOAT_EQ(a_log[15], std::log(16.0f));
    const float bound = 1.0f / 3.0f;
    for (float v : a.at("mse.ir.conv1.weight").data()) EXPECT_LE(std::abs(v), bound);
    for (float v : a.at("fgm.ir.ssm.col_bwd.dt_up.bias").data()) {
        const double dt = std::log1p(std::exp(static_cast<double>(v)));
        EXPECT_GE(dt, 1e-3 * 0.999);
        EXPECT_LE(dt, 1e-1 * 1.001);
    }
}

TEST(Manifest, MatchesIndependentCount) {
    for (std::size_t c : {4, 8, 16}) {
        for (std::size_t v : {1, 2, 3}) {
            IsfmConfig cfg;
            cfg.channels = c;
            cfg.num_vssm = v;
            EXPECT_EQ(init_weights(cfg, 0).parameter_count(), oracle::parameter_count(cfg));
        }
    }
}

TEST(Manifest, DefaultConfiguration) {
    const IsfmConfig cfg;
    std::uint64_t total = 0;
    std::set<std::string> names;
    for (const auto& e : parameter_manifest(cfg)) {
        std::uint64_t n = 1;
        for (auto x : e.shape) n *= x;
        total += n;
        EXPECT_TRUE(names.insert(e.name).second) << e.name;
    }
    EXPECT_EQ(total, 2490646u);
    EXPECT_EQ(total, oracle::parameter_count(cfg));
    EXPECT_EQ(names.size(), 278u);
    EXPECT_TRUE(names.count("head.conv2.weight"));
    EXPECT_TRUE(names.count("fgm.vi.ssm.col_bwd.a_log"));
    EXPECT_TRUE(names.count("mse.vi.vssm1.out_proj.weight"));
}

TEST(Manifest, DtRankFollowsWidth) {
    IsfmConfig cfg = small_config();
    const auto a = init_weights(cfg, 0);
    EXPECT_EQ(a.at("fgm.ir.ssm.row_fwd.dt_down.weight").shape(), (Shape{1, 16}));
    cfg.channels = 24;
    EXPECT_EQ(cfg.dt_rank(), 3u);
}

TEST(Archive, RoundTripIsByteIdentical) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const WeightArchive a = random_archive(rng);
        const auto bytes = serialize(a);
        const WeightArchive b = deserialize(bytes);
        EXPECT_EQ(a, b);
        EXPECT_EQ(serialize(b), bytes);
    }
}

TEST(Archive, FullNetworkRoundTripThroughFile) {
    const auto a = init_weights(small_config(), 42);
    const auto path = temp_file("weights.isfw");
    save_weights(a, path);
    const auto b = load_weights(path);
    std::filesystem::remove(path);
    EXPECT_EQ(a, b);
    ASSERT_TRUE(b.config_echo.has_value());
    EXPECT_TRUE(b.config_echo->same_architecture(small_config()));
}

TEST(Archive, EmptyArchive) {
    const auto bytes = serialize(WeightArchive{});
    EXPECT_EQ(bytes.size(), 16u);
    EXPECT_EQ(deserialize(bytes).size(), 0u);
}

TEST(Archive, EverySingleByteCorruptionIsDetected) {
    std::mt19937_64 rng(2);
    WeightArchive a;
    a.insert("w", oracle::random_tensor({2, 3}, rng));
    a.insert("b", oracle::random_tensor({3}, rng));
    const auto bytes = serialize(a);
    for (std::size_t pos = 0; pos < bytes.size(); ++pos) {
        for (int flip = 1; flip < 256; ++flip) {
            auto bad = bytes;
            bad[pos] ^= static_cast<std::uint8_t>(flip);
            EXPECT_THROW(deserialize(bad), ArchiveError) << "pos " << pos << " flip " << flip;
        }
    }
}

TEST(Archive, EveryTruncationIsDetected) {
    std::mt19937_64 rng(3);
    const auto bytes = serialize(random_archive(rng));
    for (std::size_t n = 0; n < bytes.size(); ++n) {
        EXPECT_THROW(deserialize(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + n)), ArchiveError);
    }
}

TEST(Archive, DistinctErrorCodes) {
    std::mt19937_64 rng(4);
    const auto bytes = serialize(random_archive(rng));
    auto magic = bytes;
    magic[0] = 'X';
    EXPECT_EQ(error_of(magic), ArchiveErrc::BadMagic);
    auto version = bytes;
    version[4] = 2;
    EXPECT_EQ(error_of(version), ArchiveErrc::VersionMismatch);
    auto payload = bytes;
    payload[payload.size() - 6] ^= 0x10;
    EXPECT_EQ(error_of(payload), ArchiveErrc::CrcMismatch);
    auto crc = bytes;
    crc.back() ^= 0x01;
    EXPECT_EQ(error_of(crc), ArchiveErrc::CrcMismatch);
    EXPECT_EQ(error_of(std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 5)), ArchiveErrc::Truncated);
    EXPECT_EQ(error_of({'I', 'S'}), ArchiveErrc::Truncated);
    EXPECT_EQ(std::string(to_string(ArchiveErrc::CrcMismatch)), "crc-mismatch");
}

TEST(Archive, MissingFileIsIoError) {
    try {
        load_weights(temp_file("does_not_exist.isfw"));
        FAIL();
    } catch (const ArchiveError& e) {
        EXPECT_EQ(e.code(), ArchiveErrc::Io);
    }
}

TEST(Archive, NameAndValueValidation) {
    WeightArchive a;
    EXPECT_THROW(a.insert("", Tensor({1})), std::invalid_argument);
    EXPECT_THROW(a.insert("has space", Tensor({1})), std::invalid_argument);
    EXPECT_THROW(a.insert(std::string(257, 'a'), Tensor({1})), std::invalid_argument);
    EXPECT_NO_THROW(a.insert(std::string(256, 'a'), Tensor({1})));
    EXPECT_THROW(a.insert("nan", Tensor({1}, std::nanf(""))), std::invalid_argument);
    EXPECT_THROW(a.at("absent"), ConfigError);
    a.insert("x", Tensor({2}, 1.0f));
    a.insert("x", Tensor({3}, 2.0f));
    EXPECT_EQ(a.at("x").shape(), (Shape{3}));
}

TEST(InferConfig, RecoversArchitecture) {
    IsfmConfig cfg;
    cfg.channels = 12;
    cfg.num_vssm = 3;
    const auto got = infer_config(init_weights(cfg, 5));
    EXPECT_TRUE(got.same_architecture(cfg));
    EXPECT_THROW(infer_config(WeightArchive{}), ConfigError);
}

TEST(Manifest, DocumentedTableMatches) {
    std::ifstream is(std::string(ISFM_TEST_DATA_DIR) + "/../docs/parameters.md");
    ASSERT_TRUE(is);
    std::vector<std::string> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.size() > 2 && line[0] == '|' && std::isdigit(static_cast<unsigned char>(line[2]))) rows.push_back(line);
    }
    const auto manifest = parameter_manifest(IsfmConfig{});
    ASSERT_EQ(rows.size(), manifest.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_NE(rows[i].find("`" + manifest[i].name + "` | " + to_string(manifest[i].shape) + " |"),
                  std::string::npos)
            << rows[i];
    }
}
