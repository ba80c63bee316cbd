#include "isfm/hash.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

namespace isfm {

std::string sha256_hex(const Tensor& t) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(4 * (t.rank() + t.size()));
    auto put = [&bytes](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    for (std::size_t e : t.shape()) put(static_cast<std::uint32_t>(e));
    for (float v : t.data()) put(std::bit_cast<std::uint32_t>(v));

    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw std::runtime_error("sha256: digest computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

}  // namespace isfm
