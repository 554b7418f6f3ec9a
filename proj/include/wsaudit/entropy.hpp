// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <mutex>
#include <random>
#include <span>
#include <string>

namespace wsaudit {

// Source of random bytes. fill() throws EntropyError when it cannot deliver.
class EntropySource {
public:
    virtual ~EntropySource() = default;
    virtual void fill(std::span<std::uint8_t> out) = 0;
};

// OpenSSL RAND_bytes.
class SystemEntropy final : public EntropySource {
public:
    void fill(std::span<std::uint8_t> out) override;
};

// Deterministic stream for tests and reproducible scans. Not for secrets.
class SeededEntropy final : public EntropySource {
public:
    explicit SeededEntropy(std::uint64_t seed) : engine_(seed) {}
    void fill(std::span<std::uint8_t> out) override;

private:
    std::mutex mu_;
    std::mt19937_64 engine_;
};

SystemEntropy& system_entropy();

std::string random_hex(EntropySource& entropy, std::size_t n_bytes);

}  // namespace wsaudit
