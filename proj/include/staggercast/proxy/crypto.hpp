#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace staggercast::proxy {

/// Cryptographically random bytes (OpenSSL RAND_bytes).
std::string random_bytes(std::size_t n);
std::string base64url(std::string_view bytes);
std::string hmac_sha256(std::string_view key, std::string_view message);
std::string sha256_hex(std::string_view data);
bool constant_time_equal(std::string_view a, std::string_view b);

/// 128-bit random token, url-safe.
std::string random_token();

}  // namespace staggercast::proxy
