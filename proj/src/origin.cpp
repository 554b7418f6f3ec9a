// SPDX-License-Identifier: Apache-2.0
#include "wsaudit/origin.hpp"

#include <algorithm>
#include <charconv>

#include "wsaudit/errors.hpp"
#include "wsaudit/handshake.hpp"

namespace wsaudit {

std::uint16_t default_port_for(std::string_view scheme) {
    if (scheme == "http" || scheme == "ws") {
        return 80;
    }
    if (scheme == "https" || scheme == "wss") {
        return 443;
    }
    return 0;
}

std::string OriginTriple::serialize() const {
    if (opaque) {
        return "null";
    }
    return scheme + "://" + host + ":" + std::to_string(port);
}

OriginTriple parse_origin(std::string_view text) {
    text = trim_ows(text);
    if (text == "null") {
        return OriginTriple::null_origin();
    }
    const std::size_t sep = text.find("://");
    if (sep == std::string_view::npos || sep == 0) {
        throw ParseError("origin has no scheme", 0);
    }
    OriginTriple origin;
    origin.scheme = to_lower(text.substr(0, sep));
    if (default_port_for(origin.scheme) == 0) {
        throw ParseError("unsupported origin scheme '" + origin.scheme + "'", 0);
    }

    const std::size_t auth_start = sep + 3;
    const std::size_t auth_end = std::min(text.find_first_of("/?#", auth_start), text.size());
    const std::string_view authority = text.substr(auth_start, auth_end - auth_start);
    if (authority.find('@') != std::string_view::npos) {
        throw ParseError("origin must not carry userinfo", auth_start);
    }

    std::string_view host = authority;
    std::string_view port_text;
    bool has_port = false;
    if (!authority.empty() && authority.front() == '[') {
        const std::size_t close = authority.find(']');
        if (close == std::string_view::npos) {
            throw ParseError("unterminated IPv6 literal", auth_start);
        }
        host = authority.substr(0, close + 1);
        if (close + 1 < authority.size()) {
            if (authority[close + 1] != ':') {
                throw ParseError("garbage after IPv6 literal", auth_start + close + 1);
            }
            port_text = authority.substr(close + 2);
            has_port = true;
        }
    } else if (const std::size_t colon = authority.rfind(':'); colon != std::string_view::npos) {
        host = authority.substr(0, colon);
        port_text = authority.substr(colon + 1);
        has_port = true;
    }
    if (host.empty()) {
        throw ParseError("origin host is empty", auth_start);
    }
    origin.host = to_lower(host);
    origin.port = default_port_for(origin.scheme);
    if (has_port) {
        unsigned value = 0;
        const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
        if (port_text.empty() || ec != std::errc{} || ptr != port_text.data() + port_text.size() || value == 0 ||
            value > 65535) {
            throw ParseError("invalid origin port '" + std::string(port_text) + "'", auth_start + host.size() + 1);
        }
        origin.port = static_cast<std::uint16_t>(value);
    }
    return origin;
}

std::string_view to_string(SameOriginReason reason) {
    switch (reason) {
        case SameOriginReason::same: return "same";
        case SameOriginReason::protocol_differs: return "protocol-differs";
        case SameOriginReason::host_differs: return "host-differs";
        case SameOriginReason::port_differs: return "port-differs";
    }
    return "unknown";
}

SameOriginVerdict same_origin(const OriginTriple& a, const OriginTriple& b) {
    if (a.opaque || b.opaque || a.scheme != b.scheme) {
        return {false, SameOriginReason::protocol_differs};
    }
    if (a.host != b.host) {
        return {false, SameOriginReason::host_differs};
    }
    if (a.port != b.port) {
        return {false, SameOriginReason::port_differs};
    }
    return {true, SameOriginReason::same};
}

OriginPolicy OriginPolicy::parse(std::string_view config) {
    config = trim_ows(config);
    if (config == "*") {
        return wildcard();
    }
    std::vector<OriginTriple> allowed;
    std::size_t start = 0;
    while (start <= config.size()) {
        const std::size_t comma = std::min(config.find(',', start), config.size());
        const std::string_view item = trim_ows(config.substr(start, comma - start));
        if (item == "*") {
            throw ParseError("'*' cannot be combined with other origins", start);
        }
        if (!item.empty()) {
            allowed.push_back(parse_origin(item));
        }
        start = comma + 1;
    }
    return allowlist(std::move(allowed));
}

void OriginPolicy::allow(OriginTriple origin) {
    if (mode_ == Mode::allowlist) {
        allowed_.push_back(std::move(origin));
    }
}

std::string OriginPolicy::str() const {
    if (mode_ == Mode::wildcard) {
        return "*";
    }
    std::string out;
    for (const auto& o : allowed_) {
        if (!out.empty()) {
            out += ',';
        }
        out += o.serialize();
    }
    return out;
}

bool is_allowed(const OriginPolicy& policy, const OriginTriple& origin) {
    if (policy.mode() == OriginPolicy::Mode::wildcard) {
        return true;
    }
    return std::any_of(policy.allowed().begin(), policy.allowed().end(),
                       [&](const OriginTriple& entry) { return same_origin(entry, origin).same; });
}

}  // namespace wsaudit
