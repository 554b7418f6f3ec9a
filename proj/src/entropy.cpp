// SPDX-License-Identifier: Apache-2.0
#include "wsaudit/entropy.hpp"

#include <openssl/rand.h>

#include <vector>

#include "wsaudit/errors.hpp"

namespace wsaudit {

void SystemEntropy::fill(std::span<std::uint8_t> out) {
    if (out.empty()) {
        return;
    }
    if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
        throw EntropyError("RAND_bytes failed");
    }
}

void SeededEntropy::fill(std::span<std::uint8_t> out) {
    std::lock_guard lock(mu_);
    for (auto& b : out) {
        b = static_cast<std::uint8_t>(engine_() >> 56);
    }
}

SystemEntropy& system_entropy() {
    static SystemEntropy instance;
    return instance;
}

std::string random_hex(EntropySource& entropy, std::size_t n_bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::vector<std::uint8_t> raw(n_bytes);
    entropy.fill(raw);
    std::string out;
    out.reserve(2 * n_bytes);
    for (auto b : raw) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xF]);
    }
    return out;
}

}  // namespace wsaudit
