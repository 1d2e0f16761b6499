#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "audiojudge/error.hpp"

namespace audiojudge {

/// Incremental SHA-256 over OpenSSL's EVP interface.
class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw Error("sha256: EVP init failed");
  }

  Sha256& update(std::span<const std::uint8_t> bytes) {
    EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size());
    return *this;
  }
  Sha256& update(std::string_view text) {
    EVP_DigestUpdate(ctx_.get(), text.data(), text.size());
    return *this;
  }

  /// Lowercase 64-char hex digest. The object cannot be updated afterwards.
  std::string hex_digest() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(kHex[md[i] >> 4]);
      out.push_back(kHex[md[i] & 0x0f]);
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string sha256_hex(std::string_view text) {
  return Sha256{}.update(text).hex_digest();
}

/// Fingerprint of an audio byte stream (read to EOF).
inline std::string audio_fingerprint(std::istream& in) {
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    auto n = in.gcount();
    if (n > 0) h.update(std::string_view(buf.data(), static_cast<std::size_t>(n)));
  }
  if (in.bad()) throw IoError("audio_fingerprint: read failure");
  return h.hex_digest();
}

inline std::string audio_fingerprint(std::span<const std::uint8_t> bytes) {
  return Sha256{}.update(bytes).hex_digest();
}

inline std::string audio_fingerprint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  return audio_fingerprint(in);
}

/// 64-bit FNV-1a; used only to derive RNG seeds from string keys.
constexpr std::uint64_t fnv1a64(std::string_view text,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace audiojudge
