// SPDX-License-Identifier: Apache-2.0
#include "wsaudit/handshake.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <sstream>

#include "wsaudit/errors.hpp"

namespace wsaudit {

namespace {

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool is_tchar(char c) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) {
        return true;
    }
    return std::string_view("!#$%&'*+-.^_`|~").find(c) != std::string_view::npos;
}

struct Head {
    std::string_view start_line;
    HeaderList headers;
};

// CRLF is mandatory; a bare LF anywhere in the head is a framing error.
Head parse_head(std::string_view bytes) {
    Head head;
    std::size_t pos = 0;
    bool first = true;
    while (true) {
        const std::size_t lf = bytes.find('\n', pos);
        if (lf == std::string_view::npos) {
            throw ParseError("truncated header block", bytes.size());
        }
        if (lf == pos || bytes[lf - 1] != '\r') {
            throw ParseError("bare LF line ending", lf);
        }
        const std::string_view line = bytes.substr(pos, lf - 1 - pos);
        if (first) {
            if (line.empty()) {
                throw ParseError("empty start line", pos);
            }
            head.start_line = line;
            first = false;
        } else if (line.empty()) {
            return head;
        } else {
            if (line.front() == ' ' || line.front() == '\t') {
                throw ParseError("obsolete header line folding", pos);
            }
            const std::size_t colon = line.find(':');
            if (colon == std::string_view::npos || colon == 0) {
                throw ParseError("malformed header line", pos);
            }
            const std::string_view name = line.substr(0, colon);
            if (!std::all_of(name.begin(), name.end(), is_tchar)) {
                throw ParseError("invalid header name", pos);
            }
            head.headers.push_back({std::string(name), std::string(trim_ows(line.substr(colon + 1)))});
        }
        pos = lf + 1;
    }
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t at = s.find(sep, start);
        out.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
        if (at == std::string_view::npos) {
            return out;
        }
        start = at + 1;
    }
}

bool is_ascii(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

const char* reason_phrase(int status) {
    switch (status) {
        case 101: return "Switching Protocols";
        case 200: return "OK";
        case 400: return "Bad Request";
        case 401: return "Unauthorized";
        case 403: return "Forbidden";
        case 404: return "Not Found";
        case 426: return "Upgrade Required";
        default: return "Unknown";
    }
}

}  // namespace

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) { return lower(x) == lower(y); });
}

std::string_view trim_ows(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
        s.remove_suffix(1);
    }
    return s;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), lower);
    return out;
}

std::optional<std::string_view> find_header(const HeaderList& headers, std::string_view name) {
    for (const auto& h : headers) {
        if (iequals(h.name, name)) {
            return std::string_view(h.value);
        }
    }
    return std::nullopt;
}

std::size_t count_headers(const HeaderList& headers, std::string_view name) {
    return static_cast<std::size_t>(
        std::count_if(headers.begin(), headers.end(), [&](const Header& h) { return iequals(h.name, name); }));
}

bool has_token(std::string_view list, std::string_view token) {
    for (auto part : split(list, ',')) {
        if (iequals(trim_ows(part), token)) {
            return true;
        }
    }
    return false;
}

// --- Nonce / accept -------------------------------------------------------

Nonce Nonce::from_raw(const Raw& raw) { return Nonce(raw, base64_encode(raw)); }

Nonce Nonce::from_encoded(std::string_view text) {
    const Bytes decoded = base64_decode(text);
    if (decoded.size() != 16) {
        throw InputError("nonce must decode to 16 bytes, got " + std::to_string(decoded.size()));
    }
    Raw raw{};
    std::copy(decoded.begin(), decoded.end(), raw.begin());
    return Nonce(raw, std::string(text));
}

Nonce generate_nonce(EntropySource& entropy) {
    Nonce::Raw raw{};
    entropy.fill(raw);
    return Nonce::from_raw(raw);
}

AcceptToken compute_accept(std::string_view key, std::string_view magic) {
    if (!is_ascii(key)) {
        throw InputError("Sec-WebSocket-Key must be ASCII");
    }
    std::string input;
    input.reserve(key.size() + magic.size());
    input.append(key).append(magic);

    std::array<std::uint8_t, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(input.data(), input.size(), digest.data(), &len, EVP_sha1(), nullptr) != 1) {
        throw std::runtime_error("SHA-1 digest failed");
    }
    return AcceptToken{base64_encode(ByteView(digest.data(), len))};
}

// --- Cookies / URLs -------------------------------------------------------

Cookie Cookie::parse(std::string_view text) {
    text = trim_ows(text);
    const std::size_t eq = text.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw InputError("cookie must be name=value: '" + std::string(text) + "'");
    }
    return Cookie{std::string(text.substr(0, eq)), std::string(text.substr(eq + 1))};
}

WsUrl WsUrl::parse(std::string_view text) {
    WsUrl url;
    const std::size_t sep = text.find("://");
    if (sep == std::string_view::npos) {
        throw InputError("URL has no scheme: '" + std::string(text) + "'");
    }
    const std::string scheme = to_lower(text.substr(0, sep));
    if (scheme == "ws") {
        url.secure = false;
    } else if (scheme == "wss") {
        url.secure = true;
    } else {
        throw InputError("URL scheme must be ws or wss: '" + std::string(text) + "'");
    }
    std::string_view rest = text.substr(sep + 3);
    const std::size_t auth_end = rest.find_first_of("/?#");
    const std::string_view authority = rest.substr(0, auth_end);
    std::string_view tail = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);
    if (authority.find('@') != std::string_view::npos) {
        throw InputError("URL userinfo is not supported");
    }

    std::string_view host = authority;
    std::string_view port_text;
    if (!authority.empty() && authority.front() == '[') {
        const std::size_t close = authority.find(']');
        if (close == std::string_view::npos) {
            throw InputError("unterminated IPv6 literal");
        }
        host = authority.substr(0, close + 1);
        if (close + 1 < authority.size()) {
            if (authority[close + 1] != ':') {
                throw InputError("garbage after IPv6 literal");
            }
            port_text = authority.substr(close + 2);
        }
    } else if (const std::size_t colon = authority.rfind(':'); colon != std::string_view::npos) {
        host = authority.substr(0, colon);
        port_text = authority.substr(colon + 1);
    }
    if (host.empty()) {
        throw InputError("URL host is empty: '" + std::string(text) + "'");
    }
    url.host = to_lower(host);
    url.port = url.secure ? 443 : 80;
    if (!port_text.empty()) {
        unsigned value = 0;
        const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
        if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || value == 0 || value > 65535) {
            throw InputError("invalid port in URL: '" + std::string(text) + "'");
        }
        url.port = static_cast<std::uint16_t>(value);
    }

    if (const std::size_t hash = tail.find('#'); hash != std::string_view::npos) {
        tail = tail.substr(0, hash);
    }
    if (tail.empty()) {
        url.target = "/";
    } else if (tail.front() == '?') {
        url.target = "/" + std::string(tail);
    } else {
        url.target = std::string(tail);
    }
    return url;
}

std::string WsUrl::authority() const {
    return default_port() ? host : host + ":" + std::to_string(port);
}

std::string WsUrl::str() const { return scheme() + "://" + authority() + target; }

std::string WsUrl::own_origin() const {
    return std::string(secure ? "https" : "http") + "://" + authority();
}

// --- Requests -------------------------------------------------------------

std::string UpgradeRequest::serialize() const {
    std::ostringstream out;
    out << method << ' ' << target << " HTTP/1.1\r\n";
    out << "Host: " << host << "\r\n";
    out << "Upgrade: websocket\r\n";
    out << "Connection: Upgrade\r\n";
    out << "Sec-WebSocket-Key: " << key << "\r\n";
    out << "Sec-WebSocket-Version: " << version << "\r\n";
    if (origin) {
        out << "Origin: " << *origin << "\r\n";
    }
    if (!cookies.empty()) {
        out << "Cookie: ";
        for (std::size_t i = 0; i < cookies.size(); ++i) {
            out << (i ? "; " : "") << cookies[i].str();
        }
        out << "\r\n";
    }
    for (const auto& h : extra_headers) {
        out << h.name << ": " << h.value << "\r\n";
    }
    out << "\r\n";
    return out.str();
}

UpgradeRequest build_upgrade_request(const WsUrl& url, const RequestOptions& options, const Nonce& nonce) {
    UpgradeRequest req;
    req.target = url.target;
    req.host = url.authority();
    req.key = nonce.encoded();
    req.origin = options.origin;
    req.cookies = options.cookies;
    if (options.token_header) {
        if (options.token_header->name.empty() ||
            !std::all_of(options.token_header->name.begin(), options.token_header->name.end(), is_tchar)) {
            throw InputError("invalid token header name");
        }
        req.extra_headers.push_back(*options.token_header);
    }
    return req;
}

UpgradeRequest build_upgrade_request(std::string_view url, const RequestOptions& options, const Nonce& nonce) {
    return build_upgrade_request(WsUrl::parse(url), options, nonce);
}

UpgradeRequest parse_upgrade_request(std::string_view bytes) {
    Head head = parse_head(bytes);
    const auto parts = split(head.start_line, ' ');
    if (parts.size() != 3 || parts[0].empty() || parts[1].empty() || !parts[2].starts_with("HTTP/1.")) {
        throw ParseError("malformed request line", 0);
    }
    UpgradeRequest req;
    req.method = std::string(parts[0]);
    req.target = std::string(parts[1]);

    bool upgrade = false;
    bool connection = false;
    std::size_t keys = 0;
    for (auto& h : head.headers) {
        if (iequals(h.name, "Host")) {
            req.host = h.value;
        } else if (iequals(h.name, "Upgrade")) {
            upgrade = upgrade || has_token(h.value, "websocket");
        } else if (iequals(h.name, "Connection")) {
            connection = connection || has_token(h.value, "upgrade");
        } else if (iequals(h.name, "Sec-WebSocket-Key")) {
            req.key = h.value;
            ++keys;
        } else if (iequals(h.name, "Sec-WebSocket-Version")) {
            req.version = h.value;
        } else if (iequals(h.name, "Origin")) {
            req.origin = h.value;
        } else if (iequals(h.name, "Cookie")) {
            for (auto pair : split(h.value, ';')) {
                if (!trim_ows(pair).empty()) {
                    try {
                        req.cookies.push_back(Cookie::parse(pair));
                    } catch (const InputError&) {
                        // A nameless crumb cannot authenticate anything; skip it.
                    }
                }
            }
        } else {
            req.extra_headers.push_back(std::move(h));
        }
    }
    if (!upgrade) {
        throw ParseError("missing Upgrade: websocket", 0);
    }
    if (!connection) {
        throw ParseError("missing Connection: Upgrade", 0);
    }
    if (keys != 1) {
        throw ParseError("expected exactly one Sec-WebSocket-Key, got " + std::to_string(keys), 0);
    }
    return req;
}

// --- Responses ------------------------------------------------------------

std::size_t find_head_end(std::string_view bytes) {
    const std::size_t at = bytes.find("\r\n\r\n");
    return at == std::string_view::npos ? at : at + 4;
}

bool UpgradeResponse::is_switch() const {
    if (status != 101) {
        return false;
    }
    const auto up = find_header(headers, "Upgrade");
    const auto conn = find_header(headers, "Connection");
    return up && conn && has_token(*up, "websocket") && has_token(*conn, "upgrade");
}

std::string UpgradeResponse::serialize() const {
    std::ostringstream out;
    out << "HTTP/1.1 " << status << ' ' << (reason.empty() ? reason_phrase(status) : reason) << "\r\n";
    for (const auto& h : headers) {
        out << h.name << ": " << h.value << "\r\n";
    }
    out << "\r\n";
    return out.str();
}

UpgradeResponse parse_upgrade_response(std::string_view bytes) {
    const Head head = parse_head(bytes);
    const std::string_view line = head.start_line;
    if (!line.starts_with("HTTP/1.")) {
        throw ParseError("status line must start with HTTP/1.x", 0);
    }
    const std::size_t sp = line.find(' ');
    if (sp == std::string_view::npos || line.size() < sp + 4) {
        throw ParseError("malformed status line", 0);
    }
    const std::string_view code = line.substr(sp + 1, 3);
    int status = 0;
    const auto [ptr, ec] = std::from_chars(code.data(), code.data() + 3, status);
    if (ec != std::errc{} || ptr != code.data() + 3 || status < 100 || status > 999) {
        throw ParseError("malformed status code", sp + 1);
    }
    if (line.size() > sp + 4 && line[sp + 4] != ' ') {
        throw ParseError("malformed status line", sp + 4);
    }

    UpgradeResponse resp;
    resp.status = status;
    resp.reason = line.size() > sp + 5 ? std::string(line.substr(sp + 5)) : std::string{};
    resp.headers = head.headers;
    if (const auto accept = find_header(resp.headers, "Sec-WebSocket-Accept")) {
        resp.accept = AcceptToken{std::string(*accept)};
    }
    return resp;
}

std::string_view to_string(HandshakeReason reason) {
    switch (reason) {
        case HandshakeReason::ok: return "ok";
        case HandshakeReason::bad_status: return "bad-status";
        case HandshakeReason::missing_upgrade_header: return "missing-upgrade-header";
        case HandshakeReason::missing_connection_header: return "missing-connection-header";
        case HandshakeReason::missing_accept: return "missing-accept";
        case HandshakeReason::accept_mismatch: return "accept-mismatch";
    }
    return "unknown";
}

HandshakeVerdict validate_upgrade_response(const UpgradeResponse& resp, const Nonce& nonce, std::string_view magic) {
    auto reject = [](HandshakeReason r) { return HandshakeVerdict{false, r}; };
    if (resp.status != 101) {
        return reject(HandshakeReason::bad_status);
    }
    const auto up = find_header(resp.headers, "Upgrade");
    if (!up || !has_token(*up, "websocket")) {
        return reject(HandshakeReason::missing_upgrade_header);
    }
    const auto conn = find_header(resp.headers, "Connection");
    if (!conn || !has_token(*conn, "upgrade")) {
        return reject(HandshakeReason::missing_connection_header);
    }
    if (!resp.accept) {
        return reject(HandshakeReason::missing_accept);
    }
    if (resp.accept->value != compute_accept(nonce.encoded(), magic).value) {
        return reject(HandshakeReason::accept_mismatch);
    }
    return HandshakeVerdict{true, HandshakeReason::ok};
}

}  // namespace wsaudit
