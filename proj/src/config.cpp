#include "isfm/config.hpp"

#include <sstream>

#include "isfm/tensor.hpp"

namespace isfm {

void IsfmConfig::validate() const {
    if (channels == 0 || channels % 2 != 0) {
        throw ConfigError("channels must be a positive even number, got " + std::to_string(channels));
    }
    if (expansion < 1) {
        throw ConfigError("expansion must be >= 1");
    }
    if (k_directions != 4) {
        throw ConfigError("k_directions is fixed at 4, got " + std::to_string(k_directions));
    }
    if (state_size == 0) {
        throw ConfigError("state_size must be positive");
    }
}

std::string IsfmConfig::describe() const {
    std::ostringstream os;
    os << "C=" << channels << " num_vssm=" << num_vssm << " K=" << k_directions << " eta=" << expansion
       << " N=" << state_size << " mff=" << (enable_mff ? "on" : "off") << " fgg=" << (enable_fgg ? "on" : "off")
       << " fgm=" << (enable_fgm ? "on" : "off");
    return os.str();
}

}  // namespace isfm
