// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "wsaudit/errors.hpp"
#include "wsaudit/origin.hpp"

using namespace wsaudit;

TEST_SUITE("origin") {

TEST_CASE("store.company.com comparison table") {
    const OriginTriple base = parse_origin("http://store.company.com/dir/page.html");
    struct Row {
        const char* url;
        SameOriginReason reason;
    };
    const Row rows[] = {
        {"http://store.company.com/dir2/other.html", SameOriginReason::same},
        {"http://store.company.com/dir/inner/another.html", SameOriginReason::same},
        {"https://store.company.com/secure.html", SameOriginReason::protocol_differs},
        {"http://store.company.com:81/dir/etc.html", SameOriginReason::port_differs},
        {"http://news.company.com/dir/other.html", SameOriginReason::host_differs},
    };
    for (const auto& row : rows) {
        CAPTURE(row.url);
        const auto v = same_origin(base, parse_origin(row.url));
        CHECK(v.reason == row.reason);
        CHECK(v.same == (row.reason == SameOriginReason::same));
    }
}

TEST_CASE("parse normalizes case and default ports") {
    CHECK(parse_origin("HTTP://Example.COM").serialize() == "http://example.com:80");
    CHECK(parse_origin("https://a.b").port == 443);
    CHECK(parse_origin("ws://a.b").port == 80);
    CHECK(parse_origin("wss://a.b:9443/x?y").port == 9443);
    CHECK(parse_origin("http://a.b:80") == parse_origin("http://a.b"));
    CHECK(parse_origin("http://[::1]:8080").host == "[::1]");
    CHECK(default_port_for("https") == 443);
}

TEST_CASE("parse rejects junk") {
    for (const char* bad : {"", "example.com", "ftp://a.b", "http://", "http://a.b:0", "http://a.b:65536",
                            "http://a.b:x", "http://user@a.b"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse_origin(bad), ParseError);
    }
}

TEST_CASE("null origin is opaque") {
    const OriginTriple n = parse_origin("null");
    CHECK(n.opaque);
    CHECK(n.serialize() == "null");
    CHECK_FALSE(same_origin(n, n).same);
    CHECK_FALSE(same_origin(n, parse_origin("http://a.b")).same);
    CHECK_FALSE(is_allowed(OriginPolicy::allowlist({n}), n));
    CHECK(is_allowed(OriginPolicy::wildcard(), n));
}

TEST_CASE("same_origin properties over random triples") {
    std::mt19937_64 rng(23);
    const char* schemes[] = {"http", "https", "ws"};
    const char* hosts[] = {"a.example", "b.example", "c.example"};
    const std::uint16_t ports[] = {80, 443, 8080};
    auto pick = [&] {
        return OriginTriple{schemes[rng() % 3], hosts[rng() % 3], ports[rng() % 3], false};
    };
    for (int i = 0; i < 2000; ++i) {
        const OriginTriple a = pick(), b = pick(), c = pick();
        const auto ab = same_origin(a, b);
        // Reflexive, symmetric, equality-based, first differing component reported.
        CHECK(same_origin(a, a).same);
        CHECK(ab == same_origin(b, a));
        CHECK(ab.same == (a == b));
        if (a.scheme != b.scheme) {
            CHECK(ab.reason == SameOriginReason::protocol_differs);
        } else if (a.host != b.host) {
            CHECK(ab.reason == SameOriginReason::host_differs);
        } else if (a.port != b.port) {
            CHECK(ab.reason == SameOriginReason::port_differs);
        }
        if (ab.same && same_origin(b, c).same) {
            CHECK(same_origin(a, c).same);
        }
        CHECK(parse_origin(a.serialize()) == a);
    }
}

TEST_CASE("is_allowed equals brute-force membership") {
    std::mt19937_64 rng(29);
    std::vector<OriginTriple> universe;
    for (const char* s : {"http", "https"}) {
        for (const char* h : {"a.example", "b.example", "c.example"}) {
            for (std::uint16_t p : {80, 443, 8000}) {
                universe.push_back(OriginTriple{s, h, p, false});
            }
        }
    }
    universe.push_back(OriginTriple::null_origin());
    for (int i = 0; i < 300; ++i) {
        std::vector<OriginTriple> allowed;
        for (const auto& o : universe) {
            if (rng() % 4 == 0) {
                allowed.push_back(o);
            }
        }
        const OriginPolicy policy = OriginPolicy::allowlist(allowed);
        for (const auto& o : universe) {
            const bool brute = !o.opaque && std::any_of(allowed.begin(), allowed.end(),
                                                         [&](const OriginTriple& x) { return same_origin(x, o).same; });
            CHECK(is_allowed(policy, o) == brute);
            CHECK(is_allowed(OriginPolicy::wildcard(), o));
        }
    }
}

TEST_CASE("policy parsing") {
    CHECK(OriginPolicy::parse("*").mode() == OriginPolicy::Mode::wildcard);
    CHECK(OriginPolicy::parse(" * ").mode() == OriginPolicy::Mode::wildcard);
    const OriginPolicy p = OriginPolicy::parse("https://app.example, http://localhost:50856");
    CHECK(p.mode() == OriginPolicy::Mode::allowlist);
    REQUIRE(p.allowed().size() == 2);
    CHECK(is_allowed(p, parse_origin("http://localhost:50856")));
    CHECK(is_allowed(p, parse_origin("https://app.example:443/")));
    CHECK_FALSE(is_allowed(p, parse_origin("http://localhost:50857")));
    CHECK_FALSE(is_allowed(p, parse_origin("http://app.example")));
    CHECK(OriginPolicy::parse(p.str()).allowed() == p.allowed());
    CHECK_THROWS_AS(OriginPolicy::parse("https://a.example, nonsense"), ParseError);

    OriginPolicy w = OriginPolicy::wildcard();
    w.allow(parse_origin("http://x.example"));
    CHECK(w.allowed().empty());
}

}  // TEST_SUITE
