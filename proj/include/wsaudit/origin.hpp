// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace wsaudit {

// scheme://host:port identity. Scheme and host are lowercase and the port is always explicit.
struct OriginTriple {
    std::string scheme;
    std::string host;
    std::uint16_t port = 0;
    // The literal origin "null". Never same-origin with anything, itself included.
    bool opaque = false;

    static OriginTriple null_origin() { return OriginTriple{"null", "", 0, true}; }

    // Canonical form with the port always spelled out; "null" for the opaque origin.
    std::string serialize() const;

    friend bool operator==(const OriginTriple&, const OriginTriple&) = default;
};

std::uint16_t default_port_for(std::string_view scheme);

// Accepts scheme://host[:port][/path...] for http, https, ws and wss, plus "null".
// Throws ParseError.
OriginTriple parse_origin(std::string_view text);

enum class SameOriginReason { same, protocol_differs, host_differs, port_differs };

std::string_view to_string(SameOriginReason reason);

struct SameOriginVerdict {
    bool same = false;
    SameOriginReason reason = SameOriginReason::protocol_differs;

    friend bool operator==(const SameOriginVerdict&, const SameOriginVerdict&) = default;
};

// Reports the first differing component in the order protocol, host, port.
SameOriginVerdict same_origin(const OriginTriple& a, const OriginTriple& b);

class OriginPolicy {
public:
    enum class Mode { wildcard, allowlist };

    static OriginPolicy wildcard() { return OriginPolicy(Mode::wildcard, {}); }
    static OriginPolicy allowlist(std::vector<OriginTriple> allowed) {
        return OriginPolicy(Mode::allowlist, std::move(allowed));
    }
    // "*" or a comma-separated list of origins. Throws ParseError.
    static OriginPolicy parse(std::string_view config);

    Mode mode() const { return mode_; }
    const std::vector<OriginTriple>& allowed() const { return allowed_; }
    // No-op in wildcard mode.
    void allow(OriginTriple origin);

    std::string str() const;

private:
    OriginPolicy(Mode mode, std::vector<OriginTriple> allowed) : mode_(mode), allowed_(std::move(allowed)) {}

    Mode mode_;
    std::vector<OriginTriple> allowed_;
};

bool is_allowed(const OriginPolicy& policy, const OriginTriple& origin);

}  // namespace wsaudit
