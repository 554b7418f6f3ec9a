// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wsaudit {

// Declaration order is the report order.
enum class CheckId {
    unencrypted_transport,
    origin_not_enforced,
    wildcard_origin,
    cookie_only_auth,
    cswh,
    missing_token,
    bad_accept,
    static_accept,
    authz_bypass,
};

inline constexpr std::array kAllChecks = {
    CheckId::unencrypted_transport, CheckId::origin_not_enforced, CheckId::wildcard_origin,
    CheckId::cookie_only_auth,      CheckId::cswh,                CheckId::missing_token,
    CheckId::bad_accept,            CheckId::static_accept,       CheckId::authz_bypass,
};

enum class Severity { info, low, medium, high, critical };

std::string_view to_string(CheckId id);
std::optional<CheckId> check_id_from(std::string_view text);
std::string_view to_string(Severity s);
std::optional<Severity> severity_from(std::string_view text);

// Catalog: cswh and authz-bypass are critical; origin-not-enforced, missing-token and
// unencrypted-transport are high; everything else medium.
Severity default_severity(CheckId id);
std::string_view remediation_for(CheckId id);

struct Finding {
    CheckId check = CheckId::unencrypted_transport;
    Severity severity = Severity::info;
    std::vector<std::string> evidence;
    std::string remediation;

    friend bool operator==(const Finding&, const Finding&) = default;
};

Finding make_finding(CheckId id, std::vector<std::string> evidence);

enum class CheckStatus { ran, skipped, inconclusive };

std::string_view to_string(CheckStatus s);
std::optional<CheckStatus> check_status_from(std::string_view text);

struct CheckRun {
    CheckId check = CheckId::unencrypted_transport;
    CheckStatus status = CheckStatus::ran;
    std::string note;

    friend bool operator==(const CheckRun&, const CheckRun&) = default;
};

using Timestamp = std::chrono::time_point<std::chrono::system_clock, std::chrono::milliseconds>;

Timestamp now_ms();
std::string format_timestamp(Timestamp t);
// Inverse of format_timestamp. Throws InputError.
Timestamp parse_timestamp(std::string_view text);

struct ScanReport {
    std::string target;
    Timestamp started_at{};
    Timestamp finished_at{};
    std::vector<Finding> findings;
    std::vector<CheckRun> checks_run;
    std::vector<std::string> errors;
    // Raw handshake and message transcripts captured during the scan.
    std::vector<std::string> transcripts;

    bool has_findings() const { return !findings.empty(); }
    bool has_errors() const { return !errors.empty(); }
    bool ran(CheckId id) const;

    friend bool operator==(const ScanReport&, const ScanReport&) = default;
};

}  // namespace wsaudit
