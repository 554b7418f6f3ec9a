// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wsaudit/bytes.hpp"
#include "wsaudit/entropy.hpp"
#include "wsaudit/findings.hpp"
#include "wsaudit/handshake.hpp"

namespace wsaudit {

// Reserved documentation domain; cannot appear in a real allowlist.
inline constexpr std::string_view kDefaultForeignOrigin = "https://attacker.example";

// Operator-supplied access-control probe: does the probe session receive data that only the
// baseline session should see?
struct AuthzProbe {
    std::string name;
    std::vector<Cookie> baseline_cookies;
    std::vector<Cookie> probe_cookies;
    Bytes message;
    Bytes success_pattern;

    // Throws InputError for an empty message or pattern.
    void validate() const;
};

struct TokenHeader {
    std::string name;
    std::optional<std::string> value;  // static value; a token_source takes precedence
};

struct ScanConfig {
    std::string target;
    std::vector<std::string> probe_origins{std::string(kDefaultForeignOrigin)};
    // Adds one random https://wsaudit-<hex>.invalid origin to the origin probes.
    bool random_probe_origin = true;
    std::vector<Cookie> cookies;
    std::optional<TokenHeader> token_header;
    // Fresh token per handshake, for servers with single-use tokens.
    std::function<std::optional<std::string>()> token_source;
    std::chrono::milliseconds timeout{10'000};
    // Wait for the first reply to a probe message; later replies get reply_quiet each.
    std::chrono::milliseconds reply_wait{1'500};
    std::chrono::milliseconds reply_quiet{100};
    bool verify_tls = true;
    int parallelism = 1;
    std::vector<AuthzProbe> authz_probes;
    EntropySource* entropy = nullptr;  // system entropy when null

    // Throws InputError.
    void validate() const;
};

// Output of one check: findings plus the bookkeeping that goes into the report.
struct CheckResult {
    std::vector<Finding> findings;
    std::vector<CheckRun> runs;
    std::vector<std::string> errors;
    std::vector<std::string> transcripts;

    std::optional<Finding> find(CheckId id) const;
    bool has(CheckId id) const { return find(id).has_value(); }
};

// URL inspection only: ws:// is cleartext regardless of port.
CheckResult check_encryption(const ScanConfig& config);
// Handshakes with each probe origin carrying the configured credentials.
CheckResult check_origin_enforcement(const ScanConfig& config);
// Cookies alone (no token) open a session and the session is cookie-gated.
CheckResult check_cookie_auth(const ScanConfig& config);
// Foreign origin + ambient cookies, no token, and the cookies actually matter.
CheckResult check_cswh(const ScanConfig& config);
// The configured token header is actually demanded, and is single-use.
CheckResult check_token_mitigation(const ScanConfig& config);
// Two fresh nonces; accepts must match the computed value and differ from each other.
CheckResult check_accept_computation(const ScanConfig& config);
CheckResult replay_authz_probe(const ScanConfig& config, const AuthzProbe& probe);

// Runs every applicable check. Findings come out ordered by check id.
// An unreachable target yields zero findings and a non-empty error list.
ScanReport run_scan(const ScanConfig& config);

}  // namespace wsaudit
