// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wsaudit/bytes.hpp"
#include "wsaudit/entropy.hpp"

namespace wsaudit {

// GUID appended to Sec-WebSocket-Key before hashing. This is the value deployed servers use.
inline constexpr std::string_view kHandshakeGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
// Shorter variant found in some write-ups (one character missing). Selectable for strict
// comparisons against documents that print it; real servers never use it.
inline constexpr std::string_view kShortGuid = "258EAF5-E914-47DA-95CA-C5AB0DC85B11";

inline constexpr std::string_view kWebSocketVersion = "13";
inline constexpr std::chrono::milliseconds kDefaultHandshakeTimeout{10'000};

// The 16-byte client nonce carried in Sec-WebSocket-Key.
class Nonce {
public:
    using Raw = std::array<std::uint8_t, 16>;

    static Nonce from_raw(const Raw& raw);
    // Throws InputError unless text is base64 of exactly 16 bytes.
    static Nonce from_encoded(std::string_view text);

    const Raw& raw() const noexcept { return raw_; }
    const std::string& encoded() const noexcept { return encoded_; }

    friend bool operator==(const Nonce&, const Nonce&) = default;

private:
    Nonce(const Raw& raw, std::string encoded) : raw_(raw), encoded_(std::move(encoded)) {}

    Raw raw_;
    std::string encoded_;
};

Nonce generate_nonce(EntropySource& entropy = system_entropy());

struct AcceptToken {
    std::string value;

    friend bool operator==(const AcceptToken&, const AcceptToken&) = default;
};

// base64(SHA-1(key ++ magic)). The key text is hashed literally, it is not base64-validated.
// Throws InputError for non-ASCII keys.
AcceptToken compute_accept(std::string_view key, std::string_view magic = kHandshakeGuid);

struct Header {
    std::string name;
    std::string value;

    friend bool operator==(const Header&, const Header&) = default;
};
using HeaderList = std::vector<Header>;

struct Cookie {
    std::string name;
    std::string value;

    // Splits "name=value". Throws InputError when '=' is missing or name is empty.
    static Cookie parse(std::string_view text);
    std::string str() const { return name + "=" + value; }

    friend bool operator==(const Cookie&, const Cookie&) = default;
};

bool iequals(std::string_view a, std::string_view b);
std::string_view trim_ows(std::string_view s);
std::string to_lower(std::string_view s);

// First header with this name (case-insensitive).
std::optional<std::string_view> find_header(const HeaderList& headers, std::string_view name);
std::size_t count_headers(const HeaderList& headers, std::string_view name);
// True if the comma-separated header value lists token (case-insensitive).
bool has_token(std::string_view list, std::string_view token);

// ws:// or wss:// target.
struct WsUrl {
    bool secure = false;
    std::string host;
    std::uint16_t port = 80;
    std::string target = "/";  // path plus query

    // Throws InputError for other schemes, empty host or bad port.
    static WsUrl parse(std::string_view text);

    std::string scheme() const { return secure ? "wss" : "ws"; }
    bool default_port() const { return port == (secure ? 443 : 80); }
    // "host" or "host:port" when the port is not the scheme default.
    std::string authority() const;
    std::string str() const;
    // Origin a page served by the same host would send: http(s)://host[:port].
    std::string own_origin() const;
};

struct UpgradeRequest {
    std::string method = "GET";
    std::string target = "/";
    std::string host;
    std::string key;
    std::string version{kWebSocketVersion};
    std::optional<std::string> origin;
    std::vector<Cookie> cookies;
    HeaderList extra_headers;

    std::string serialize() const;

    friend bool operator==(const UpgradeRequest&, const UpgradeRequest&) = default;
};

struct RequestOptions {
    std::optional<std::string> origin;
    std::vector<Cookie> cookies;
    std::optional<Header> token_header;
};

UpgradeRequest build_upgrade_request(std::string_view url, const RequestOptions& options,
                                     const Nonce& nonce);
UpgradeRequest build_upgrade_request(const WsUrl& url, const RequestOptions& options,
                                     const Nonce& nonce);

// Server side. Throws ParseError on malformed heads and on missing Upgrade/Connection tokens
// or a Sec-WebSocket-Key count other than one.
UpgradeRequest parse_upgrade_request(std::string_view bytes);

struct UpgradeResponse {
    int status = 0;
    std::string reason;
    HeaderList headers;
    std::optional<AcceptToken> accept;

    // 101 with Upgrade: websocket and Connection: upgrade.
    bool is_switch() const;
    std::string serialize() const;
};

UpgradeResponse parse_upgrade_response(std::string_view bytes);

// Offset just past the blank line terminating an HTTP head, or npos.
std::size_t find_head_end(std::string_view bytes);

enum class HandshakeReason {
    ok,
    bad_status,
    missing_upgrade_header,
    missing_connection_header,
    missing_accept,
    accept_mismatch,
};

std::string_view to_string(HandshakeReason reason);

struct HandshakeVerdict {
    bool accepted = false;
    HandshakeReason reason = HandshakeReason::bad_status;

    friend bool operator==(const HandshakeVerdict&, const HandshakeVerdict&) = default;
};

HandshakeVerdict validate_upgrade_response(const UpgradeResponse& resp, const Nonce& nonce,
                                           std::string_view magic = kHandshakeGuid);

}  // namespace wsaudit
