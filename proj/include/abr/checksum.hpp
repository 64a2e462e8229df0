#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "abr/error.hpp"

namespace abr {

inline constexpr std::uint64_t fnv1a64_offset = 0xcbf29ce484222325ULL;

/// FNV-1a 64-bit hash. Pass the previous result as `state` to hash in chunks.
inline std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t state = fnv1a64_offset) noexcept {
    for (std::byte b : bytes) {
        state ^= static_cast<std::uint64_t>(b);
        state *= 0x100000001b3ULL;
    }
    return state;
}

inline std::uint64_t fnv1a64(std::string_view text, std::uint64_t state = fnv1a64_offset) noexcept {
    return fnv1a64(std::as_bytes(std::span(text.data(), text.size())), state);
}

namespace detail {

struct EvpCtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const noexcept { EVP_MD_CTX_free(ctx); }
};

inline std::string to_hex(const unsigned char* data, std::size_t n) {
    std::ostringstream out;
    out << std::hex << std::setfill('0');
    for (std::size_t i = 0; i < n; ++i) out << std::setw(2) << static_cast<unsigned>(data[i]);
    return out.str();
}

} // namespace detail

/// Streaming SHA-256 digest (lowercase hex).
class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            throw Error("sha256: digest initialisation failed");
    }

    void update(std::span<const std::byte> bytes) {
        if (EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size()) != 1)
            throw Error("sha256: digest update failed");
    }

    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw Error("sha256: digest finalisation failed");
        return detail::to_hex(md, len);
    }

private:
    std::unique_ptr<EVP_MD_CTX, detail::EvpCtxDeleter> ctx_;
};

inline std::string sha256_hex(std::string_view text) {
    Sha256 h;
    h.update(std::as_bytes(std::span(text.data(), text.size())));
    return h.hex();
}

inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file for hashing: " + path);
    Sha256 h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        auto got = static_cast<std::size_t>(in.gcount());
        if (got > 0) h.update(std::as_bytes(std::span(buf, got)));
    }
    return h.hex();
}

} // namespace abr
