#include "isfm/weights.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

namespace isfm {

const char* to_string(ArchiveErrc code) {
    switch (code) {
        case ArchiveErrc::Io: return "io";
        case ArchiveErrc::BadMagic: return "bad-magic";
        case ArchiveErrc::VersionMismatch: return "version-mismatch";
        case ArchiveErrc::CrcMismatch: return "crc-mismatch";
        case ArchiveErrc::Truncated: return "truncated";
        case ArchiveErrc::InvalidEntry: return "invalid-entry";
    }
    return "?";
}

namespace {

bool valid_name(const std::string& name) {
    if (name.empty() || name.size() > kMaxNameLength) return false;
    for (char ch : name) {
        const auto u = static_cast<unsigned char>(ch);
        if (u < 0x21 || u > 0x7e) return false;
    }
    return true;
}

}  // namespace

void WeightArchive::insert(const std::string& name, Tensor t) {
    if (!valid_name(name)) {
        throw std::invalid_argument("archive: invalid tensor name '" + name + "'");
    }
    if (t.empty()) {
        throw std::invalid_argument("archive: tensor '" + name + "' is empty");
    }
    if (!t.all_finite()) {
        throw std::invalid_argument("archive: tensor '" + name + "' has non-finite values");
    }
    entries_.insert_or_assign(name, std::move(t));
}

const Tensor& WeightArchive::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw ConfigError("weights: missing tensor '" + name + "'");
    }
    return it->second;
}

Tensor& WeightArchive::mutable_at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw ConfigError("weights: missing tensor '" + name + "'");
    }
    return it->second;
}

std::size_t WeightArchive::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) n += t.size();
    return n;
}

namespace {

class ManifestBuilder {
public:
    std::vector<ManifestEntry> out;

    void conv(const std::string& name, std::size_t c_out, std::size_t c_in, std::size_t k) {
        out.push_back({name + ".weight", {c_out, c_in, k, k}, ParamKind::Weight, c_in * k * k});
        out.push_back({name + ".bias", {c_out}, ParamKind::Bias, 0});
    }
    void dwconv(const std::string& name, std::size_t c, std::size_t k) {
        out.push_back({name + ".weight", {c, 1, k, k}, ParamKind::Weight, k * k});
        out.push_back({name + ".bias", {c}, ParamKind::Bias, 0});
    }
    void linear(const std::string& name, std::size_t d_out, std::size_t d_in, bool bias) {
        out.push_back({name + ".weight", {d_out, d_in}, ParamKind::Weight, d_in});
        if (bias) out.push_back({name + ".bias", {d_out}, ParamKind::Bias, 0});
    }
    void norm(const std::string& name, std::size_t c) {
        out.push_back({name + ".gain", {c}, ParamKind::Gain, 0});
        out.push_back({name + ".shift", {c}, ParamKind::Shift, 0});
    }
    void ssm(const std::string& prefix, std::size_t d, std::size_t n, std::size_t r) {
        static const char* dirs[] = {"row_fwd", "row_bwd", "col_fwd", "col_bwd"};
        for (const char* dir : dirs) {
            const std::string p = prefix + "." + dir;
            out.push_back({p + ".a_log", {d, n}, ParamKind::ALog, 0});
            out.push_back({p + ".dt_down.weight", {r, d}, ParamKind::Weight, d});
            out.push_back({p + ".dt_up.weight", {d, r}, ParamKind::Weight, r});
            out.push_back({p + ".dt_up.bias", {d}, ParamKind::DtBias, 0});
            out.push_back({p + ".b_proj.weight", {n, d}, ParamKind::Weight, d});
            out.push_back({p + ".c_proj.weight", {n, d}, ParamKind::Weight, d});
            out.push_back({p + ".d_skip", {d}, ParamKind::DSkip, 0});
        }
    }
};

}  // namespace

std::vector<ManifestEntry> parameter_manifest(const IsfmConfig& cfg) {
    cfg.validate();
    const std::size_t C = cfg.channels;
    const std::size_t I = cfg.inner();
    const std::size_t N = cfg.state_size;
    const std::size_t R = cfg.dt_rank();
    ManifestBuilder m;
    for (const char* branch : {"ir", "vi"}) {
        const std::string p = std::string("mse.") + branch;
        m.conv(p + ".conv1", C, 1, 3);
        m.conv(p + ".conv2", C, C, 3);
        for (std::size_t k = 0; k < cfg.num_vssm; ++k) {
            const std::string v = p + ".vssm" + std::to_string(k);
            m.norm(v + ".ln_in", C);
            m.linear(v + ".in_proj", 2 * I, C, true);
            m.dwconv(v + ".dwconv", I, 3);
            m.ssm(v + ".ssm", I, N, R);
            m.norm(v + ".ln_out", I);
            m.linear(v + ".out_proj", C, I, true);
        }
    }
    m.conv("mff.lffb.reduce", C, C, 1);
    m.conv("mff.lffb.attn", 1, 2, 3);
    m.dwconv("mff.lffb.dw3", C, 3);
    m.conv("mff.lffb.pw3", C, C, 1);
    m.dwconv("mff.lffb.dw5", C, 5);
    m.conv("mff.lffb.pw5", C, C, 1);
    m.conv("mff.lffb.fuse", C, C, 1);
    m.conv("mff.hffb.reduce", C, C, 1);
    m.conv("mff.hffb.s1", C, C, 1);
    m.conv("mff.hffb.s2", C, C, 1);
    m.conv("mff.hffb.fuse", C, C, 1);
    m.conv("mff.reproject", C, C, 3);
    for (const char* stream : {"ir", "vi"}) {
        const std::string p = std::string("fgm.") + stream;
        m.norm(p + ".ln", C);
        m.linear(p + ".in_proj", 2 * I, C, true);
        m.dwconv(p + ".dwconv", I, 3);
        m.ssm(p + ".ssm", I, N, R);
        m.norm(p + ".ln_h", I);
    }
    m.linear("fgm.out_proj", C, I, true);
    m.out.push_back({"fgm.s1", {1}, ParamKind::Scale, 0});
    m.out.push_back({"fgm.s2", {1}, ParamKind::Scale, 0});
    m.linear("fgg.global", 2 * I, 2 * I, true);
    m.norm("fgg.global_ln", 2 * I);
    m.linear("fgg.fc", 2 * I, 2 * C, true);
    m.linear("fgg.gate_ir", I, I, true);
    m.norm("fgg.gate_ir_ln", I);
    m.linear("fgg.gate_vi", I, I, true);
    m.norm("fgg.gate_vi_ln", I);
    m.conv("head.conv1", C, 2 * C, 3);
    m.conv("head.conv2", 1, C, 3);
    return std::move(m.out);
}

WeightArchive init_weights(const IsfmConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uniform01 = [&rng]() { return static_cast<double>(rng() >> 40) * 0x1p-24; };
    const double log_lo = std::log(1e-3);
    const double log_hi = std::log(1e-1);

    WeightArchive a;
    for (const auto& e : parameter_manifest(cfg)) {
        Tensor t(e.shape);
        auto v = t.data();
        switch (e.kind) {
            case ParamKind::Weight: {
                const double bound = 1.0 / std::sqrt(static_cast<double>(e.fan_in));
                for (float& x : v) x = static_cast<float>((2.0 * uniform01() - 1.0) * bound);
                break;
            }
            case ParamKind::DtBias:
                for (float& x : v) {
                    const double dt = std::exp(log_lo + uniform01() * (log_hi - log_lo));
                    x = static_cast<float>(std::log(std::expm1(dt)));
                }
                break;
            case ParamKind::ALog: {
                const std::size_t n = e.shape[1];
                for (std::size_t i = 0; i < v.size(); ++i) {
                    v[i] = static_cast<float>(std::log(static_cast<double>(i % n + 1)));
                }
                break;
            }
            case ParamKind::Gain:
            case ParamKind::DSkip:
            case ParamKind::Scale:
                std::fill(v.begin(), v.end(), 1.0f);
                break;
            case ParamKind::Bias:
            case ParamKind::Shift:
                break;
        }
        a.insert(e.name, std::move(t));
    }
    a.config_echo = cfg;
    return a;
}

namespace {

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& b, std::size_t end) : b_(b), end_(end) {}

    std::size_t remaining() const { return end_ - pos_; }
    std::size_t pos() const { return pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw ArchiveError(ArchiveErrc::Truncated, std::string("weights: file ends inside ") + what);
        }
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return b_[pos_++];
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        const auto v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    const std::uint8_t* take(std::size_t n, const char* what) {
        need(n, what);
        const std::uint8_t* p = b_.data() + pos_;
        pos_ += n;
        return p;
    }

private:
    const std::vector<std::uint8_t>& b_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const WeightArchive& a) {
    std::vector<std::uint8_t> b;
    std::size_t total = 16;
    for (const auto& [name, t] : a.entries()) total += 3 + name.size() + 4 * t.rank() + 4 * t.size();
    b.reserve(total);
    for (char ch : {'I', 'S', 'F', 'W'}) b.push_back(static_cast<std::uint8_t>(ch));
    put_u32(b, a.format_version);
    put_u32(b, static_cast<std::uint32_t>(a.size()));
    for (const auto& [name, t] : a.entries()) {
        put_u16(b, static_cast<std::uint16_t>(name.size()));
        b.insert(b.end(), name.begin(), name.end());
        b.push_back(static_cast<std::uint8_t>(t.rank()));
        for (std::size_t e : t.shape()) put_u32(b, static_cast<std::uint32_t>(e));
        for (float v : t.data()) put_u32(b, std::bit_cast<std::uint32_t>(v));
    }
    put_u32(b, crc_of(b.data(), b.size()));
    return b;
}

WeightArchive deserialize(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4) {
        throw ArchiveError(ArchiveErrc::Truncated, "weights: file shorter than the magic");
    }
    if (std::memcmp(bytes.data(), "ISFW", 4) != 0) {
        throw ArchiveError(ArchiveErrc::BadMagic, "weights: bad magic (expected ISFW)");
    }
    if (bytes.size() < 16) {
        throw ArchiveError(ArchiveErrc::Truncated, "weights: file shorter than header and checksum");
    }
    Reader r(bytes, bytes.size() - 4);
    r.take(4, "magic");
    const std::uint32_t version = r.u32("version");
    if (version != kArchiveVersion) {
        throw ArchiveError(ArchiveErrc::VersionMismatch, "weights: format version " + std::to_string(version) +
                                                             ", this build reads " + std::to_string(kArchiveVersion));
    }
    const std::uint32_t count = r.u32("entry count");

    std::vector<std::pair<std::string, Tensor>> parsed;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t len = r.u16("name length");
        const auto* name_bytes = r.take(len, "name");
        std::string name(reinterpret_cast<const char*>(name_bytes), len);
        if (!valid_name(name)) {
            throw ArchiveError(ArchiveErrc::InvalidEntry, "weights: entry " + std::to_string(i) + " has an invalid name");
        }
        const std::uint8_t rank = r.u8("rank");
        if (rank < 1 || rank > 4) {
            throw ArchiveError(ArchiveErrc::InvalidEntry, "weights: '" + name + "' has rank " + std::to_string(rank));
        }
        Shape shape(rank);
        std::size_t count_elems = 1;
        for (auto& e : shape) {
            e = r.u32("extents");
            if (e == 0) {
                throw ArchiveError(ArchiveErrc::InvalidEntry, "weights: '" + name + "' has a zero extent");
            }
            if (count_elems > r.remaining() / e) {
                throw ArchiveError(ArchiveErrc::Truncated, "weights: '" + name + "' payload exceeds file size");
            }
            count_elems *= e;
        }
        if (count_elems > r.remaining() / 4) {
            throw ArchiveError(ArchiveErrc::Truncated, "weights: '" + name + "' payload exceeds file size");
        }
        const auto* payload = r.take(4 * count_elems, "payload");
        std::vector<float> data(count_elems);
        for (std::size_t k = 0; k < count_elems; ++k) {
            const std::uint8_t* p = payload + 4 * k;
            const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                       (static_cast<std::uint32_t>(p[2]) << 16) |
                                       (static_cast<std::uint32_t>(p[3]) << 24);
            data[k] = std::bit_cast<float>(bits);
        }
        parsed.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    if (r.remaining() != 0) {
        throw ArchiveError(ArchiveErrc::InvalidEntry,
                           "weights: " + std::to_string(r.remaining()) + " unexpected bytes before the checksum");
    }
    const std::size_t body = bytes.size() - 4;
    const std::uint32_t stored = static_cast<std::uint32_t>(bytes[body]) |
                                 (static_cast<std::uint32_t>(bytes[body + 1]) << 8) |
                                 (static_cast<std::uint32_t>(bytes[body + 2]) << 16) |
                                 (static_cast<std::uint32_t>(bytes[body + 3]) << 24);
    const std::uint32_t actual = crc_of(bytes.data(), body);
    if (stored != actual) {
        throw ArchiveError(ArchiveErrc::CrcMismatch, "weights: CRC mismatch (stored " + std::to_string(stored) +
                                                         ", computed " + std::to_string(actual) + ")");
    }
    WeightArchive a;
    a.format_version = version;
    for (auto& [name, t] : parsed) {
        if (a.contains(name)) {
            throw ArchiveError(ArchiveErrc::InvalidEntry, "weights: duplicate entry '" + name + "'");
        }
        if (!t.all_finite()) {
            throw ArchiveError(ArchiveErrc::InvalidEntry, "weights: '" + name + "' has non-finite values");
        }
        a.insert(name, std::move(t));
    }
    return a;
}

void save_weights(const WeightArchive& a, const std::filesystem::path& path) {
    const auto bytes = serialize(a);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw ArchiveError(ArchiveErrc::Io, "weights: cannot open '" + path.string() + "' for writing");
    }
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) {
        throw ArchiveError(ArchiveErrc::Io, "weights: write to '" + path.string() + "' failed");
    }
}

WeightArchive load_weights(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ArchiveError(ArchiveErrc::Io, "weights: cannot open '" + path.string() + "'");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (is.bad()) {
        throw ArchiveError(ArchiveErrc::Io, "weights: read from '" + path.string() + "' failed");
    }
    WeightArchive a = deserialize(bytes);
    try {
        a.config_echo = infer_config(a);
    } catch (const ConfigError&) {
    }
    return a;
}

IsfmConfig infer_config(const WeightArchive& a) {
    IsfmConfig cfg;
    const Tensor& conv1 = a.at("mse.ir.conv1.weight");
    cfg.channels = conv1.extent(0);
    std::size_t blocks = 0;
    while (a.contains("mse.ir.vssm" + std::to_string(blocks) + ".in_proj.weight")) ++blocks;
    cfg.num_vssm = blocks;
    const Tensor& in_proj = a.at("fgm.ir.in_proj.weight");
    if (in_proj.extent(0) % (2 * cfg.channels) != 0) {
        throw ConfigError("weights: fgm.ir.in_proj.weight " + to_string(in_proj.shape()) +
                          " is not a multiple of 2C");
    }
    cfg.expansion = in_proj.extent(0) / (2 * cfg.channels);
    cfg.state_size = a.at("fgm.ir.ssm.row_fwd.a_log").extent(1);
    cfg.validate();
    return cfg;
}

}  // namespace isfm
