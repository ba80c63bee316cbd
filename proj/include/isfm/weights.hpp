#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isfm/config.hpp"
#include "isfm/tensor.hpp"

namespace isfm {

enum class ArchiveErrc { Io, BadMagic, VersionMismatch, CrcMismatch, Truncated, InvalidEntry };

const char* to_string(ArchiveErrc code);

class ArchiveError : public std::runtime_error {
public:
    ArchiveError(ArchiveErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ArchiveErrc code() const noexcept { return code_; }

private:
    ArchiveErrc code_;
};

inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr std::size_t kMaxNameLength = 256;

/// Named tensors kept sorted by name.
class WeightArchive {
public:
    /// Adds or replaces a tensor. Names must be 1..256 printable ASCII bytes and
    /// tensors finite; throws std::invalid_argument otherwise.
    void insert(const std::string& name, Tensor t);

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    /// Throws ConfigError when absent.
    const Tensor& at(const std::string& name) const;
    Tensor& mutable_at(const std::string& name);

    const std::map<std::string, Tensor>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t parameter_count() const;

    std::uint32_t format_version = kArchiveVersion;
    /// Set by init_weights or infer_config; not part of the file format.
    std::optional<IsfmConfig> config_echo;

    friend bool operator==(const WeightArchive& a, const WeightArchive& b) { return a.entries_ == b.entries_; }

private:
    std::map<std::string, Tensor> entries_;
};

enum class ParamKind { Weight, Bias, Gain, Shift, ALog, DtBias, DSkip, Scale };

struct ManifestEntry {
    std::string name;
    Shape shape;
    ParamKind kind;
    std::size_t fan_in = 0;
};

/// Every parameter of the network for `cfg`, in initialization order.
std::vector<ManifestEntry> parameter_manifest(const IsfmConfig& cfg);

/// Deterministic initialization from a single std::mt19937_64 stream seeded with `seed`.
WeightArchive init_weights(const IsfmConfig& cfg, std::uint64_t seed);

std::vector<std::uint8_t> serialize(const WeightArchive& a);
WeightArchive deserialize(const std::vector<std::uint8_t>& bytes);

void save_weights(const WeightArchive& a, const std::filesystem::path& path);
WeightArchive load_weights(const std::filesystem::path& path);

/// Recovers the architecture from tensor shapes. Throws ConfigError if the
/// archive does not describe a network.
IsfmConfig infer_config(const WeightArchive& a);

}  // namespace isfm
