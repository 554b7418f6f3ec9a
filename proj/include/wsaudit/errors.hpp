// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wsaudit {

// Caller handed us something unusable (bad URL, non-ASCII key, ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed HTTP head. offset is the byte position where parsing gave up.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Wire-level WebSocket violation. rule() names the violated constraint.
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& rule)
        : std::runtime_error("protocol error: " + rule), rule_(rule) {}

    const std::string& rule() const noexcept { return rule_; }

private:
    std::string rule_;
};

class EncodeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Connect/read/write/TLS failures and timeouts.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EntropyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace wsaudit
