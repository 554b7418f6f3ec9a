// SPDX-License-Identifier: Apache-2.0
#include "wsaudit/findings.hpp"

#include <algorithm>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "wsaudit/errors.hpp"

namespace wsaudit {

namespace {

struct CheckInfo {
    CheckId id;
    std::string_view name;
    Severity severity;
    std::string_view remediation;
};

constexpr CheckInfo kCatalog[] = {
    {CheckId::unencrypted_transport, "unencrypted-transport", Severity::high,
     "Serve the endpoint over wss:// (TLS, default port 443) and stop accepting ws:// upgrades, so frames "
     "cannot be read or modified by anyone on the network path."},
    {CheckId::origin_not_enforced, "origin-not-enforced", Severity::high,
     "Validate the Origin header during the upgrade and reject (403) any origin that is not on an explicit "
     "list of trusted origins."},
    {CheckId::wildcard_origin, "wildcard-origin", Severity::medium,
     "Replace the '*' origin policy with an allowlist of the exact scheme://host:port origins that serve "
     "the application."},
    {CheckId::cookie_only_auth, "cookie-only-auth", Severity::medium,
     "Do not rely on ambient cookies alone to authenticate the upgrade; require a per-connection secret "
     "that a cross-site page cannot obtain."},
    {CheckId::cswh, "cswh", Severity::critical,
     "A foreign page can open an authenticated WebSocket with the victim's cookies. Enforce an Origin "
     "allowlist and require a single-use CSRF token on the handshake."},
    {CheckId::missing_token, "missing-token", Severity::high,
     "Issue an unguessable token per connection on the server and refuse handshakes that do not present "
     "a valid, unused token."},
    {CheckId::bad_accept, "bad-accept", Severity::medium,
     "Compute Sec-WebSocket-Accept as base64(SHA-1(key + GUID)) from the client's Sec-WebSocket-Key "
     "instead of returning a precomputed or incorrect value."},
    {CheckId::static_accept, "static-accept", Severity::medium,
     "The server returns the same accept token for different keys; remove hard-coded handshake values "
     "left over from testing."},
    {CheckId::authz_bypass, "authz-bypass", Severity::critical,
     "Authorize every message against the session that sent it; data for one user must never be "
     "delivered on another user's connection."},
};

const CheckInfo& info(CheckId id) {
    return *std::find_if(std::begin(kCatalog), std::end(kCatalog), [&](const CheckInfo& c) { return c.id == id; });
}

}  // namespace

std::string_view to_string(CheckId id) { return info(id).name; }

std::optional<CheckId> check_id_from(std::string_view text) {
    for (const auto& c : kCatalog) {
        if (c.name == text) {
            return c.id;
        }
    }
    return std::nullopt;
}

std::string_view to_string(Severity s) {
    switch (s) {
        case Severity::info: return "info";
        case Severity::low: return "low";
        case Severity::medium: return "medium";
        case Severity::high: return "high";
        case Severity::critical: return "critical";
    }
    return "unknown";
}

std::optional<Severity> severity_from(std::string_view text) {
    for (auto s : {Severity::info, Severity::low, Severity::medium, Severity::high, Severity::critical}) {
        if (to_string(s) == text) {
            return s;
        }
    }
    return std::nullopt;
}

Severity default_severity(CheckId id) { return info(id).severity; }

std::string_view remediation_for(CheckId id) { return info(id).remediation; }

Finding make_finding(CheckId id, std::vector<std::string> evidence) {
    return Finding{id, default_severity(id), std::move(evidence), std::string(remediation_for(id))};
}

std::string_view to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::ran: return "ran";
        case CheckStatus::skipped: return "skipped";
        case CheckStatus::inconclusive: return "inconclusive";
    }
    return "unknown";
}

std::optional<CheckStatus> check_status_from(std::string_view text) {
    for (auto s : {CheckStatus::ran, CheckStatus::skipped, CheckStatus::inconclusive}) {
        if (to_string(s) == text) {
            return s;
        }
    }
    return std::nullopt;
}

bool ScanReport::ran(CheckId id) const {
    return std::any_of(checks_run.begin(), checks_run.end(), [&](const CheckRun& r) { return r.check == id; });
}

Timestamp now_ms() { return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now()); }

std::string format_timestamp(Timestamp t) {
    const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(t);
    const auto ms = (t - secs).count();
    const std::time_t tt = std::chrono::system_clock::to_time_t(secs);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
    return out.str();
}

Timestamp parse_timestamp(std::string_view text) {
    std::tm tm{};
    int ms = 0;
    char tail = 0;
    const std::string s(text);
    if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d%c", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                    &tm.tm_min, &tm.tm_sec, &ms, &tail) != 8 ||
        tail != 'Z' || s.size() != 24) {
        throw InputError("bad timestamp '" + s + "'");
    }
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    const std::time_t tt = timegm(&tm);
    return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::from_time_t(tt)) +
           std::chrono::milliseconds(ms);
}

}  // namespace wsaudit
