// SPDX-License-Identifier: Apache-2.0
#include "wsaudit/scanner.hpp"

#include <algorithm>
#include <future>
#include <mutex>

#include "wsaudit/client.hpp"
#include "wsaudit/errors.hpp"
#include "wsaudit/origin.hpp"

namespace wsaudit {

namespace {

constexpr std::string_view kEchoProbe = "wsaudit-echo-probe";

// One handshake's outcome as the checks see it.
struct Shot {
    HandshakeAttempt attempt;
    std::optional<WsConnection> connection;
    bool transport_ok = false;
    std::string error;

    bool switched() const { return transport_ok && attempt.switched(); }
};

// Shared plumbing for one check: URL, client options, token supply and the result being built.
class Probe {
public:
    explicit Probe(const ScanConfig& config) : config_(config), url_(WsUrl::parse(config.target)) {
        client_.timeout = config.timeout;
        client_.verify_tls = config.verify_tls;
        client_.entropy = config.entropy;
        if (url_.secure) {
            client_.tls_context = net::TlsContext::client(config.verify_tls);
        }
    }

    const WsUrl& url() const { return url_; }
    std::string own_origin() const { return url_.own_origin(); }
    const ScanConfig& config() const { return config_; }
    EntropySource& entropy() const { return config_.entropy ? *config_.entropy : system_entropy(); }

    std::optional<std::string> next_token() {
        std::lock_guard lock(mu_);
        if (!config_.token_header) {
            return std::nullopt;
        }
        if (config_.token_source) {
            return config_.token_source();
        }
        return config_.token_header->value;
    }

    // token: nullopt sends no token header.
    Shot handshake(std::string_view what, const std::optional<std::string>& origin, bool with_cookies,
                   const std::optional<std::string>& token, bool keep_open = false) {
        RequestOptions req;
        req.origin = origin;
        if (with_cookies) {
            req.cookies = config_.cookies;
        }
        if (token && config_.token_header) {
            req.token_header = Header{config_.token_header->name, *token};
        }
        Shot shot;
        try {
            auto opened = WsConnection::open(url_, req, client_);
            shot.attempt = std::move(opened.attempt);
            // A server that hangs up instead of answering has still refused the upgrade.
            shot.transport_ok = true;
            if (opened.connection && keep_open) {
                shot.connection = std::move(opened.connection);
            } else if (opened.connection) {
                opened.connection->close();
            }
            record(shot.attempt.transcript());
        } catch (const std::exception& e) {
            shot.error = std::string(what) + ": " + e.what();
        }
        if (!shot.error.empty()) {
            error(shot.error);
        }
        return shot;
    }

    // Sends message and gathers replies. The exchange is recorded as its own transcript.
    std::vector<std::string> exchange(WsConnection& conn, ByteView message) {
        std::string transcript = "ws> " + to_string(message) + "\n";
        std::vector<std::string> replies;
        try {
            conn.send_text(to_string(message));
            auto first = conn.receive(config_.reply_wait);
            if (first) {
                replies.push_back(to_string(first->data));
                for (auto& m : conn.receive_all(config_.reply_quiet)) {
                    replies.push_back(to_string(m.data));
                }
            }
        } catch (const std::exception& e) {
            error(std::string("message exchange: ") + e.what());
        }
        for (const auto& r : replies) {
            transcript += "ws< " + r + "\n";
        }
        record(std::move(transcript));
        conn.close();
        return replies;
    }

    void record(std::string transcript) {
        std::lock_guard lock(mu_);
        result.transcripts.push_back(std::move(transcript));
    }

    void error(std::string text) {
        std::lock_guard lock(mu_);
        result.errors.push_back(std::move(text));
    }

    void run(CheckId id, CheckStatus status, std::string note = {}) {
        result.runs.push_back(CheckRun{id, status, std::move(note)});
    }

    CheckResult result;

private:
    const ScanConfig& config_;
    WsUrl url_;
    ClientOptions client_;
    std::mutex mu_;
};

bool is_foreign(const std::string& origin, const std::string& own) {
    try {
        return !same_origin(parse_origin(origin), parse_origin(own)).same;
    } catch (const ParseError&) {
        return true;
    }
}

std::string first_foreign_origin(const ScanConfig& config, const std::string& own) {
    for (const auto& o : config.probe_origins) {
        if (is_foreign(o, own)) {
            return o;
        }
    }
    return std::string(kDefaultForeignOrigin);
}

// Cookie gating: the cookieless handshake is refused, or both succeed but answer the echo
// probe differently.
bool cookie_gated(Probe& probe, Shot& with, Shot& without) {
    if (!without.switched()) {
        return true;
    }
    if (!with.connection || !without.connection) {
        return false;
    }
    const auto a = probe.exchange(*with.connection, as_bytes(kEchoProbe));
    const auto b = probe.exchange(*without.connection, as_bytes(kEchoProbe));
    return a != b;
}

void close_all(std::initializer_list<Shot*> shots) {
    for (auto* s : shots) {
        if (s->connection) {
            s->connection->close();
        }
    }
}

}  // namespace

void AuthzProbe::validate() const {
    if (message.empty()) {
        throw InputError("authz probe '" + name + "': message must not be empty");
    }
    if (success_pattern.empty()) {
        throw InputError("authz probe '" + name + "': success pattern must not be empty");
    }
}

void ScanConfig::validate() const {
    (void)WsUrl::parse(target);
    if (timeout.count() <= 0) {
        throw InputError("timeout must be positive");
    }
    if (parallelism < 1) {
        throw InputError("parallelism must be at least 1");
    }
    if (token_header && token_header->name.empty()) {
        throw InputError("token header name must not be empty");
    }
    for (const auto& p : authz_probes) {
        p.validate();
    }
}

std::optional<Finding> CheckResult::find(CheckId id) const {
    for (const auto& f : findings) {
        if (f.check == id) {
            return f;
        }
    }
    return std::nullopt;
}

CheckResult check_encryption(const ScanConfig& config) {
    const WsUrl url = WsUrl::parse(config.target);
    CheckResult result;
    if (!url.secure) {
        result.findings.push_back(make_finding(CheckId::unencrypted_transport, {config.target}));
    }
    result.runs.push_back(CheckRun{CheckId::unencrypted_transport, CheckStatus::ran, {}});
    return result;
}

CheckResult check_origin_enforcement(const ScanConfig& config) {
    Probe probe(config);
    const std::string own = probe.own_origin();

    std::vector<std::string> origins = config.probe_origins;
    std::optional<std::string> random_origin;
    if (config.random_probe_origin) {
        random_origin = "https://wsaudit-" + random_hex(probe.entropy(), 6) + ".invalid";
        origins.push_back(*random_origin);
    }

    const Shot baseline = probe.handshake("origin baseline", own, true, probe.next_token());

    std::vector<Shot> shots(origins.size());
    const std::size_t batch = static_cast<std::size_t>(std::max(1, config.parallelism));
    for (std::size_t start = 0; start < origins.size(); start += batch) {
        const std::size_t end = std::min(origins.size(), start + batch);
        if (batch == 1) {
            shots[start] = probe.handshake("origin probe " + origins[start], origins[start], true, probe.next_token());
            continue;
        }
        std::vector<std::future<Shot>> pending;
        for (std::size_t i = start; i < end; ++i) {
            pending.push_back(std::async(std::launch::async, [&, i] {
                return probe.handshake("origin probe " + origins[i], origins[i], true, probe.next_token());
            }));
        }
        for (std::size_t i = start; i < end; ++i) {
            shots[i] = pending[i - start].get();
        }
    }

    std::vector<std::string> accepted_foreign;
    bool all_accepted = true;
    bool any_error = !baseline.transport_ok;
    std::vector<std::string> random_evidence;
    for (std::size_t i = 0; i < origins.size(); ++i) {
        const Shot& s = shots[i];
        any_error = any_error || !s.transport_ok;
        all_accepted = all_accepted && s.switched();
        if (s.switched() && is_foreign(origins[i], own)) {
            accepted_foreign.push_back(s.attempt.transcript());
        }
        if (random_origin && origins[i] == *random_origin && s.switched()) {
            random_evidence.push_back(s.attempt.transcript());
        }
    }

    if (!accepted_foreign.empty()) {
        probe.result.findings.push_back(make_finding(CheckId::origin_not_enforced, accepted_foreign));
        probe.run(CheckId::origin_not_enforced, CheckStatus::ran);
    } else if (any_error) {
        probe.run(CheckId::origin_not_enforced, CheckStatus::inconclusive, "transport errors during origin probes");
    } else if (!baseline.switched()) {
        probe.run(CheckId::origin_not_enforced, CheckStatus::inconclusive,
                  "handshake with the target's own origin was refused; rejections cannot be attributed to "
                  "origin enforcement");
    } else {
        probe.run(CheckId::origin_not_enforced, CheckStatus::ran);
    }

    if (all_accepted && !any_error && !accepted_foreign.empty()) {
        auto evidence = random_evidence.empty() ? accepted_foreign : random_evidence;
        probe.result.findings.push_back(make_finding(CheckId::wildcard_origin, std::move(evidence)));
        probe.run(CheckId::wildcard_origin, CheckStatus::ran);
    } else {
        probe.run(CheckId::wildcard_origin, any_error ? CheckStatus::inconclusive : CheckStatus::ran);
    }
    return std::move(probe.result);
}

CheckResult check_cookie_auth(const ScanConfig& config) {
    Probe probe(config);
    if (config.cookies.empty()) {
        probe.run(CheckId::cookie_only_auth, CheckStatus::skipped, "no cookies configured");
        return std::move(probe.result);
    }
    const std::string own = probe.own_origin();
    Shot with = probe.handshake("cookies, no token", own, true, std::nullopt, true);
    Shot without = probe.handshake("no cookies, no token", own, false, std::nullopt, true);
    if (!with.transport_ok || !without.transport_ok) {
        close_all({&with, &without});
        probe.run(CheckId::cookie_only_auth, CheckStatus::inconclusive, "transport errors");
        return std::move(probe.result);
    }
    if (with.switched() && cookie_gated(probe, with, without)) {
        probe.result.findings.push_back(
            make_finding(CheckId::cookie_only_auth, {with.attempt.transcript(), without.attempt.transcript()}));
    }
    close_all({&with, &without});
    probe.run(CheckId::cookie_only_auth, CheckStatus::ran);
    return std::move(probe.result);
}

CheckResult check_cswh(const ScanConfig& config) {
    Probe probe(config);
    if (config.cookies.empty()) {
        probe.run(CheckId::cswh, CheckStatus::skipped, "no cookies configured: no session to ride");
        return std::move(probe.result);
    }
    const std::string foreign = first_foreign_origin(config, probe.own_origin());

    // (a) full credentials from a foreign origin
    bool credentialed = false;
    bool transport_ok = true;
    std::optional<Shot> full;
    if (config.token_header) {
        full = probe.handshake("cswh: foreign origin, cookies, token", foreign, true, probe.next_token());
        credentialed = full->switched();
        transport_ok = full->transport_ok;
    }
    // (b) same without the token, (c) without cookies either
    Shot ambient = probe.handshake("cswh: foreign origin, cookies only", foreign, true, std::nullopt, true);
    Shot anonymous = probe.handshake("cswh: foreign origin, no cookies", foreign, false, std::nullopt, true);
    transport_ok = transport_ok && ambient.transport_ok && anonymous.transport_ok;
    if (!config.token_header) {
        credentialed = ambient.switched();
    }

    if (!transport_ok) {
        close_all({&ambient, &anonymous});
        probe.run(CheckId::cswh, CheckStatus::inconclusive, "transport errors");
        return std::move(probe.result);
    }
    if (credentialed && ambient.switched() && cookie_gated(probe, ambient, anonymous)) {
        probe.result.findings.push_back(
            make_finding(CheckId::cswh, {ambient.attempt.transcript(), anonymous.attempt.transcript()}));
    }
    close_all({&ambient, &anonymous});
    probe.run(CheckId::cswh, CheckStatus::ran);
    return std::move(probe.result);
}

CheckResult check_token_mitigation(const ScanConfig& config) {
    Probe probe(config);
    if (!config.token_header) {
        probe.run(CheckId::missing_token, CheckStatus::skipped, "no token header configured");
        return std::move(probe.result);
    }
    const std::string own = probe.own_origin();
    const Shot stripped = probe.handshake("token stripped", own, true, std::nullopt);
    if (!stripped.transport_ok) {
        probe.run(CheckId::missing_token, CheckStatus::inconclusive, "transport errors");
        return std::move(probe.result);
    }
    std::optional<Finding> finding;
    if (stripped.switched()) {
        finding = make_finding(CheckId::missing_token, {stripped.attempt.transcript()});
    }

    std::string note;
    if (const auto token = probe.next_token()) {
        const Shot valid = probe.handshake("token presented", own, true, token);
        if (valid.switched()) {
            const Shot replay = probe.handshake("token replayed", own, true, token);
            if (replay.switched()) {
                note = "replayable-token: a used token was accepted again";
                if (finding) {
                    finding->evidence.push_back(replay.attempt.transcript());
                }
            }
        } else if (!stripped.switched()) {
            note = "handshake with the configured token was also refused";
        }
    }
    if (finding) {
        probe.result.findings.push_back(std::move(*finding));
    }
    probe.run(CheckId::missing_token, CheckStatus::ran, note);
    return std::move(probe.result);
}

CheckResult check_accept_computation(const ScanConfig& config) {
    Probe probe(config);
    const std::string own = probe.own_origin();
    const Shot first = probe.handshake("accept #1", own, true, probe.next_token());
    const Shot second = probe.handshake("accept #2", own, true, probe.next_token());

    if (!first.switched() || !second.switched()) {
        const std::string why = (!first.transport_ok || !second.transport_ok)
                                    ? "transport errors"
                                    : "server refused the handshakes; accept tokens unavailable";
        probe.run(CheckId::bad_accept, CheckStatus::inconclusive, why);
        probe.run(CheckId::static_accept, CheckStatus::inconclusive, why);
        return std::move(probe.result);
    }

    const std::vector<std::string> evidence{first.attempt.transcript(), second.attempt.transcript()};
    const auto& a1 = first.attempt.response->accept;
    const auto& a2 = second.attempt.response->accept;
    const auto wrong = [](const Shot& s) {
        return s.attempt.verdict.reason == HandshakeReason::accept_mismatch ||
               s.attempt.verdict.reason == HandshakeReason::missing_accept;
    };
    if (wrong(first) || wrong(second)) {
        probe.result.findings.push_back(make_finding(CheckId::bad_accept, evidence));
    }
    if (a1 && a2 && *a1 == *a2 && first.attempt.nonce != second.attempt.nonce) {
        probe.result.findings.push_back(make_finding(CheckId::static_accept, evidence));
    }
    probe.run(CheckId::bad_accept, CheckStatus::ran);
    probe.run(CheckId::static_accept, CheckStatus::ran);
    return std::move(probe.result);
}

CheckResult replay_authz_probe(const ScanConfig& config, const AuthzProbe& authz) {
    ScanConfig baseline_cfg = config;
    baseline_cfg.cookies = authz.baseline_cookies;
    ScanConfig probe_cfg = config;
    probe_cfg.cookies = authz.probe_cookies;

    Probe baseline(baseline_cfg);
    Probe attacker(probe_cfg);
    const std::string own = baseline.own_origin();
    const std::string label = "authz probe '" + authz.name + "'";

    Shot b = baseline.handshake(label + " baseline", own, true, baseline.next_token(), true);
    Shot p = attacker.handshake(label + " probe", own, true, attacker.next_token(), true);

    CheckResult result;
    auto merge = [&](Probe& from) {
        for (auto& t : from.result.transcripts) {
            result.transcripts.push_back(std::move(t));
        }
        for (auto& e : from.result.errors) {
            result.errors.push_back(std::move(e));
        }
        from.result = {};
    };

    if (!b.switched() || !p.switched()) {
        close_all({&b, &p});
        merge(baseline);
        merge(attacker);
        result.errors.push_back(label + ": both sessions must connect; inconclusive");
        result.runs.push_back(CheckRun{CheckId::authz_bypass, CheckStatus::inconclusive, authz.name});
        return result;
    }

    const auto base_replies = baseline.exchange(*b.connection, authz.message);
    const auto probe_replies = attacker.exchange(*p.connection, authz.message);
    merge(baseline);
    merge(attacker);

    const std::string pattern = to_string(authz.success_pattern);
    std::vector<std::string> leaked;
    for (const auto& r : probe_replies) {
        if (r.find(pattern) != std::string::npos) {
            leaked.push_back(r);
        }
    }
    if (!leaked.empty()) {
        std::vector<std::string> evidence = base_replies;
        evidence.insert(evidence.end(), leaked.begin(), leaked.end());
        result.findings.push_back(make_finding(CheckId::authz_bypass, std::move(evidence)));
        result.runs.push_back(CheckRun{CheckId::authz_bypass, CheckStatus::ran, authz.name});
    } else if (probe_replies.empty()) {
        result.errors.push_back(label + ": no reply on the probe session before timeout; inconclusive");
        result.runs.push_back(CheckRun{CheckId::authz_bypass, CheckStatus::inconclusive, authz.name});
    } else {
        result.runs.push_back(CheckRun{CheckId::authz_bypass, CheckStatus::ran, authz.name});
    }
    return result;
}

ScanReport run_scan(const ScanConfig& config) {
    config.validate();
    ScanReport report;
    report.target = config.target;
    report.started_at = now_ms();

    const WsUrl url = WsUrl::parse(config.target);
    try {
        net::ConnectOptions copts;
        copts.tls = url.secure;
        copts.timeout = config.timeout;
        copts.tls_context = url.secure ? net::TlsContext::client(config.verify_tls) : nullptr;
        net::Stream reach = net::connect(url.host, url.port, copts);
    } catch (const std::exception& e) {
        report.errors.push_back(std::string("target unreachable: ") + e.what());
        for (auto id : kAllChecks) {
            report.checks_run.push_back(CheckRun{id, CheckStatus::inconclusive, "target unreachable"});
        }
        report.finished_at = now_ms();
        return report;
    }

    auto absorb = [&](CheckResult r) {
        for (auto& f : r.findings) {
            report.findings.push_back(std::move(f));
        }
        for (auto& c : r.runs) {
            report.checks_run.push_back(std::move(c));
        }
        for (auto& e : r.errors) {
            report.errors.push_back(std::move(e));
        }
        for (auto& t : r.transcripts) {
            report.transcripts.push_back(std::move(t));
        }
    };

    absorb(check_encryption(config));
    absorb(check_origin_enforcement(config));
    absorb(check_cookie_auth(config));
    absorb(check_cswh(config));
    absorb(check_token_mitigation(config));
    absorb(check_accept_computation(config));
    if (config.authz_probes.empty()) {
        report.checks_run.push_back(CheckRun{CheckId::authz_bypass, CheckStatus::skipped, "no authz probes configured"});
    }
    for (const auto& p : config.authz_probes) {
        absorb(replay_authz_probe(config, p));
    }

    std::stable_sort(report.findings.begin(), report.findings.end(),
                     [](const Finding& a, const Finding& b) { return a.check < b.check; });
    std::stable_sort(report.checks_run.begin(), report.checks_run.end(),
                     [](const CheckRun& a, const CheckRun& b) { return a.check < b.check; });
    report.finished_at = now_ms();
    return report;
}

}  // namespace wsaudit
