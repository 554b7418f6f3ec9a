// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "generators.hpp"
#include "lab_fixture.hpp"
#include "sha1_oracle.hpp"
#include "wsaudit/client.hpp"
#include "wsaudit/frame.hpp"
#include "wsaudit/handshake.hpp"
#include "wsaudit/origin.hpp"
#include "wsaudit/report.hpp"
#include "wsaudit/scanner.hpp"

using namespace wsaudit;
using namespace std::chrono_literals;
namespace lab = wsaudit::lab;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

// Collects failures without stopping at the first one.
class Check {
public:
    void expect(bool cond, const std::string& what) {
        if (!cond && failures_++ < 5) {
            detail_ += (detail_.empty() ? "" : "; ") + what;
        }
    }
    Outcome done(std::string summary) const {
        if (failures_ == 0) {
            return {true, std::move(summary)};
        }
        return {false, std::to_string(failures_) + " failure(s): " + detail_};
    }

private:
    int failures_ = 0;
    std::string detail_;
};

int g_failed = 0;

void criterion(int n, const std::string& title, std::chrono::milliseconds limit, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    if (out.ok && ms > limit) {
        out = {false, "took " + std::to_string(ms.count()) + " ms, limit " + std::to_string(limit.count()) + " ms"};
    }
    if (!out.ok) {
        ++g_failed;
    }
    std::cout << (out.ok ? "[PASS]" : "[FAIL]") << " criterion " << n << ": " << title << " -- " << out.detail << " ("
              << ms.count() << " ms)" << std::endl;
}

// Same frames for criteria 3 and 4.
std::vector<Frame> corpus(std::size_t n) {
    std::mt19937_64 rng(20240601);
    std::vector<Frame> frames;
    frames.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        frames.push_back(gen::random_frame(rng));
    }
    return frames;
}

Outcome c1_handshake_vector() {
    // Recorded with `openssl sha1 -binary | base64` and Python hashlib before the library existed.
    const std::string frozen = "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=";
    const std::string key = "dGhlIHNhbXBsZSBub25jZQ==";
    const std::string got = compute_accept(key).value;
    Check c;
    c.expect(got == frozen, "compute_accept gave " + got);
    c.expect(oracle::accept_for(key, kHandshakeGuid) == frozen, "test oracle disagrees with frozen value");
    return c.done(got);
}

Outcome c2_same_origin_table() {
    const OriginTriple base = parse_origin("http://store.company.com/dir/page.html");
    const std::pair<const char*, SameOriginReason> rows[] = {
        {"http://store.company.com/dir2/other.html", SameOriginReason::same},
        {"http://store.company.com/dir/inner/another.html", SameOriginReason::same},
        {"https://store.company.com/secure.html", SameOriginReason::protocol_differs},
        {"http://store.company.com:81/dir/etc.html", SameOriginReason::port_differs},
        {"http://news.company.com/dir/other.html", SameOriginReason::host_differs},
    };
    Check c;
    std::string verdicts;
    for (const auto& [url, want] : rows) {
        const auto v = same_origin(base, parse_origin(url));
        c.expect(v.reason == want && v.same == (want == SameOriginReason::same),
                 std::string(url) + " -> " + std::string(to_string(v.reason)));
        verdicts += (verdicts.empty() ? "" : ", ") + std::string(v.same ? "yes" : "no/") +
                    (v.same ? "" : std::string(to_string(v.reason)));
    }
    return c.done(verdicts);
}

Outcome c3_round_trip(const std::vector<Frame>& frames) {
    Check c;
    std::size_t masked = 0, control = 0, len16 = 0, len64 = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Frame& f = frames[i];
        const Bytes wire = encode_frame(f);
        const auto r = decode_frame(wire);
        const auto* d = std::get_if<Decoded>(&r);
        c.expect(d && d->consumed == wire.size() && d->frame == f, "frame " + std::to_string(i));
        masked += f.masked();
        control += is_control(f.opcode);
        len16 += f.payload.size() >= 126 && f.payload.size() <= 0xFFFF;
        len64 += f.payload.size() > 0xFFFF;
    }
    c.expect(masked > 0 && control > 0 && len16 > 0 && len64 > 0, "corpus misses a frame class");
    std::ostringstream s;
    s << frames.size() << " frames, 0 mismatches (masked " << masked << ", control " << control << ", 16-bit "
      << len16 << ", 64-bit " << len64 << ")";
    return c.done(s.str());
}

Outcome c4_streaming(const std::vector<Frame>& frames) {
    Check c;
    std::size_t bytes = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Bytes wire = encode_frame(frames[i]);
        FrameDecoder dec;
        bool early = false;
        std::optional<Frame> got;
        for (std::size_t k = 0; k < wire.size(); ++k) {
            dec.feed(ByteView(&wire[k], 1));
            got = dec.next();
            if (got && k + 1 < wire.size()) {
                early = true;
                break;
            }
        }
        c.expect(!early, "frame " + std::to_string(i) + " decoded before its last byte");
        c.expect(got && *got == frames[i], "frame " + std::to_string(i) + " mismatch after last byte");
        c.expect(dec.buffered() == 0, "frame " + std::to_string(i) + " left bytes buffered");
        bytes += wire.size();
    }
    return c.done(std::to_string(frames.size()) + " frames fed byte-by-byte (" + std::to_string(bytes) +
                  " bytes), no early frames, no protocol errors");
}

Outcome c5_matrix() {
    Check c;
    int exact = 0;
    for (int i = 0; i < lab::kMatrixSize; ++i) {
        const auto axes = lab::MatrixAxes::from_index(i);
        fixture::LabTarget t(lab::matrix_profile(i));
        const ScanReport report = run_scan(t.config());
        const auto got = fixture::finding_ids(report.findings);
        const auto want = fixture::expected_findings(axes);
        c.expect(got == want, "profile " + std::to_string(i) + " got " + fixture::names(got) + " want " +
                                  fixture::names(want));
        c.expect(report.errors.empty(), "profile " + std::to_string(i) + " had errors");
        exact += got == want;
    }
    return c.done(std::to_string(exact) + "/32 profiles with exact finding sets");
}

Outcome c6_named() {
    Check c;
    std::set<CheckId> vuln_got;
    {
        fixture::LabTarget t(lab::named(lab::NamedProfile::vulnerable));
        vuln_got = fixture::finding_ids(run_scan(t.config()).findings);
        for (auto id : {CheckId::unencrypted_transport, CheckId::origin_not_enforced, CheckId::cookie_only_auth,
                        CheckId::cswh, CheckId::missing_token}) {
            c.expect(vuln_got.contains(id), std::string("vulnerable lab lacks ") + std::string(to_string(id)));
        }
    }
    std::size_t hardened_findings = 0;
    {
        fixture::LabTarget t(lab::named(lab::NamedProfile::hardened));
        c.expect(t.server->url().starts_with("wss://"), "hardened lab is not TLS");
        const ScanReport report = run_scan(t.config());
        hardened_findings = report.findings.size();
        c.expect(report.findings.empty(), "hardened lab findings " + fixture::names(fixture::finding_ids(report.findings)));
        c.expect(report.errors.empty(), "hardened scan had errors");
    }
    return c.done("vulnerable " + fixture::names(vuln_got) + "; hardened " + std::to_string(hardened_findings) +
                  " findings");
}

Outcome c7_accept_anti_pattern() {
    Check c;
    int static_flagged = 0, correct_flagged = 0;
    const int runs = 100;
    {
        fixture::LabTarget t(lab::matrix_profile(lab::MatrixAxes{true, false, false, true, false}.index()));
        for (int i = 0; i < runs; ++i) {
            const auto r = check_accept_computation(t.config());
            static_flagged += r.has(CheckId::static_accept) && r.has(CheckId::bad_accept);
        }
    }
    {
        fixture::LabTarget t(lab::matrix_profile(lab::MatrixAxes{true, false, false, false, false}.index()));
        for (int i = 0; i < runs; ++i) {
            const auto r = check_accept_computation(t.config());
            correct_flagged += r.has(CheckId::static_accept) || r.has(CheckId::bad_accept);
        }
    }
    c.expect(static_flagged == runs, "static mode flagged " + std::to_string(static_flagged) + "/100");
    c.expect(correct_flagged == 0, "correct mode flagged " + std::to_string(correct_flagged) + "/100");
    return c.done("static flagged " + std::to_string(static_flagged) + "/100, correct flagged " +
                  std::to_string(correct_flagged) + "/100");
}

Outcome c8_token_mitigation() {
    Check c;
    fixture::LabTarget t(lab::named(lab::NamedProfile::hardened));
    ClientOptions opts;
    opts.timeout = 3000ms;
    opts.verify_tls = false;
    const WsUrl url = WsUrl::parse(t.server->url());
    auto dial = [&](const std::optional<std::string>& token) {
        RequestOptions req;
        req.origin = t.server->own_origin();
        req.cookies = {t.session.cookie};
        if (token) {
            req.token_header = Header{t.server->profile().token_header_name, *token};
        }
        return WsConnection::open(url, req, opts).attempt;
    };
    const auto no_token = dial(std::nullopt);
    c.expect(!no_token.switched() && no_token.status() == 403,
             "tokenless handshake got " + std::to_string(no_token.status()));

    const auto r = check_token_mitigation(t.config());
    c.expect(!r.has(CheckId::missing_token), "missing-token emitted on hardened lab");

    const auto token = t.server->issue_token(t.session.cookie.value);
    const auto first = dial(token);
    const auto reuse = dial(token);
    c.expect(first.switched(), "fresh token refused: " + std::to_string(first.status()));
    c.expect(!reuse.switched(), "reused token accepted");
    return c.done("no token -> " + std::to_string(no_token.status()) + ", fresh token -> " +
                  std::to_string(first.status()) + ", reuse -> " + std::to_string(reuse.status()) +
                  ", missing-token not emitted");
}

Outcome c9_idempotence() {
    Check c;
    fixture::LabTarget t(lab::named(lab::NamedProfile::vulnerable));
    auto scan_once = [&] {
        SeededEntropy entropy(777);
        ScanConfig cfg = t.config();
        // Fixed inputs: seeded nonces/masks/probe origin and a static token value.
        cfg.entropy = &entropy;
        cfg.token_source = nullptr;
        cfg.token_header->value = "static-token";
        auto doc = report_to_json(run_scan(cfg));
        doc.erase("started_at");
        doc.erase("finished_at");
        return doc.dump(2);
    };
    const std::string a = scan_once();
    const std::string b = scan_once();
    c.expect(a == b, "reports differ beyond timestamps");
    return c.done("two consecutive scans identical modulo timestamps (" + std::to_string(a.size()) + " bytes)");
}

}  // namespace

int main() {
    net::ignore_sigpipe();
    criterion(1, "handshake vector", 1000ms, c1_handshake_vector);
    criterion(2, "same-origin table", 1000ms, c2_same_origin_table);
    const std::vector<Frame> frames = corpus(10'000);
    criterion(3, "frame codec round trip", 30'000ms, [&] { return c3_round_trip(frames); });
    criterion(4, "streaming decode", 120'000ms, [&] { return c4_streaming(frames); });
    criterion(5, "scanner ground-truth matrix", 120'000ms, c5_matrix);
    criterion(6, "named-profile end-to-end", 60'000ms, c6_named);
    criterion(7, "accept anti-pattern", 60'000ms, c7_accept_anti_pattern);
    criterion(8, "token mitigation", 30'000ms, c8_token_mitigation);
    criterion(9, "idempotence", 60'000ms, c9_idempotence);
    std::cout << (g_failed == 0 ? "all criteria passed" : std::to_string(g_failed) + " criterion(s) failed")
              << std::endl;
    return g_failed == 0 ? 0 : 1;
}
