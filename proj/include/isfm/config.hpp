#pragma once

#include <cstddef>
#include <string>

namespace isfm {

/// Architecture hyper-parameters. The enable_* switches only change the
/// forward pass; the parameter set is the same for every combination.
struct IsfmConfig {
    std::size_t channels = 128;
    std::size_t num_vssm = 2;
    std::size_t k_directions = 4;
    std::size_t expansion = 2;
    std::size_t state_size = 16;
    bool enable_mff = true;
    bool enable_fgg = true;
    bool enable_fgm = true;

    std::size_t inner() const { return expansion * channels; }
    /// Rank of the low-rank delta projection: ceil(inner / 16).
    std::size_t dt_rank() const { return (inner() + 15) / 16; }

    /// Throws ConfigError on an invalid combination.
    void validate() const;

    std::string describe() const;

    bool same_architecture(const IsfmConfig& o) const {
        return channels == o.channels && num_vssm == o.num_vssm && k_directions == o.k_directions &&
               expansion == o.expansion && state_size == o.state_size;
    }
};

}  // namespace isfm
