// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "lab_fixture.hpp"
#include "wsaudit/cli.hpp"
#include "wsaudit/errors.hpp"
#include "wsaudit/poc.hpp"

using namespace wsaudit;
using namespace std::chrono_literals;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& content) {
        char name[] = "/tmp/wsaudit-test-XXXXXX";
        const int fd = mkstemp(name);
        REQUIRE(fd >= 0);
        close(fd);
        path = name;
        std::ofstream(path) << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

int usage_code(const std::vector<std::string>& args) {
    try {
        cli::parse_cli(args);
    } catch (const cli::UsageError& e) {
        return e.exit_code();
    }
    return -1;
}

std::map<std::string, std::string> key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) {
            out[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }
    return out;
}

}  // namespace

using cli::parse_cli;

TEST_SUITE("cli") {

TEST_CASE("scan arguments") {
    const auto inv = parse_cli({"scan", "wss://app.example/ws", "--origin", "https://a.example", "--origin",
                                "null", "--cookie", "session=abc", "--token-header", "X-CSRF-Token:t0k",
                                "--timeout-ms", "2500", "--format", "json", "--insecure-skip-tls-verify",
                                "--parallel", "3", "--verbose"});
    CHECK(inv.command == cli::Command::scan);
    CHECK(inv.scan.target == "wss://app.example/ws");
    CHECK(inv.scan.probe_origins == std::vector<std::string>{"https://a.example", "null"});
    REQUIRE(inv.scan.cookies.size() == 1);
    CHECK(inv.scan.cookies[0].str() == "session=abc");
    REQUIRE(inv.scan.token_header);
    CHECK(inv.scan.token_header->name == "X-CSRF-Token");
    CHECK(inv.scan.token_header->value == "t0k");
    CHECK(inv.scan.timeout == 2500ms);
    CHECK(inv.format == Format::json);
    CHECK_FALSE(inv.scan.verify_tls);
    CHECK(inv.scan.parallelism == 3);
    CHECK(inv.verbose);
}

TEST_CASE("scan defaults") {
    const auto inv = parse_cli({"scan", "ws://h/"});
    CHECK(inv.scan.probe_origins == std::vector<std::string>{std::string(kDefaultForeignOrigin)});
    CHECK(inv.scan.verify_tls);
    CHECK(inv.format == Format::text);
    CHECK_FALSE(inv.scan.token_header);
    CHECK(inv.scan.timeout == 10'000ms);
}

TEST_CASE("usage errors exit with 2, help with 0") {
    CHECK(usage_code({}) == 2);
    CHECK(usage_code({"scan"}) == 2);
    CHECK(usage_code({"scan", "http://h/"}) == 2);
    CHECK(usage_code({"scan", "ws://h/", "--bogus"}) == 2);
    CHECK(usage_code({"scan", "ws://h/", "--format", "xml"}) == 2);
    CHECK(usage_code({"scan", "ws://h/", "--timeout-ms", "0"}) == 2);
    CHECK(usage_code({"scan", "ws://h/", "--cookie", "novalue"}) == 2);
    CHECK(usage_code({"scan", "ws://h/", "--authz-probe", "/nonexistent/file.json"}) == 2);
    CHECK(usage_code({"lab", "--matrix-index", "32"}) == 2);
    CHECK(usage_code({"lab", "--profile", "weird"}) == 2);
    CHECK(usage_code({"poc", "ftp://h/"}) == 2);
    CHECK(usage_code({"--help"}) == 0);

    std::ostringstream out, err;
    CHECK(cli::run({"scan", "ws://h/", "--bogus"}, out, err) == 2);
    CHECK(out.str().empty());
    CHECK_FALSE(err.str().empty());
}

TEST_CASE("token header forms") {
    CHECK(cli::parse_token_header("X-T").name == "X-T");
    CHECK_FALSE(cli::parse_token_header("X-T").value);
    CHECK(cli::parse_token_header("X-T: abc").value == "abc");
    CHECK(cli::parse_token_header("X-T:a:b").value == "a:b");
    CHECK_THROWS_AS(cli::parse_token_header(":abc"), InputError);
}

TEST_CASE("authz probe files") {
    TempFile one(R"({"name":"n","baseline_cookies":["session=a"],"probe_cookies":["session=b"],)"
                 R"("message":"get","success_pattern":"secret"})");
    const auto probes = cli::load_authz_probes(one.path);
    REQUIRE(probes.size() == 1);
    CHECK(probes[0].name == "n");
    CHECK(probes[0].baseline_cookies[0].value == "a");
    CHECK(to_string(probes[0].success_pattern) == "secret");

    TempFile many(R"([{"message":"m1","success_pattern":"p"},{"message":"m2","success_pattern":"q"}])");
    CHECK(cli::load_authz_probes(many.path).size() == 2);

    TempFile empty_msg(R"({"message":"","success_pattern":"p"})");
    CHECK_THROWS_AS(cli::load_authz_probes(empty_msg.path), InputError);
    TempFile broken("{not json");
    CHECK_THROWS_AS(cli::load_authz_probes(broken.path), InputError);
    TempFile scalar("42");
    CHECK_THROWS_AS(cli::load_authz_probes(scalar.path), InputError);
}

TEST_CASE("scan exit codes follow the report") {
    SUBCASE("findings -> 1") {
        fixture::LabTarget t(lab::named(lab::NamedProfile::vulnerable));
        std::ostringstream out, err;
        const int code = cli::run({"scan", t.server->url(), "--cookie", t.session.cookie.str(), "--format", "json",
                                   "--timeout-ms", "3000"},
                                  out, err);
        CHECK(code == 1);
        const auto doc = nlohmann::json::parse(out.str());
        CHECK(doc["schema_version"] == 1);
        std::set<std::string> ids;
        for (const auto& f : doc["findings"]) {
            ids.insert(f["check_id"].get<std::string>());
        }
        CHECK(ids.contains("cswh"));
        CHECK(ids.contains("cookie-only-auth"));
        CHECK_FALSE(doc.contains("transcripts"));
    }
    SUBCASE("unreachable -> 2") {
        std::uint16_t port = 0;
        {
            net::Listener l("127.0.0.1", 0);
            port = l.port();
        }
        std::ostringstream out, err;
        CHECK(cli::run({"scan", "ws://127.0.0.1:" + std::to_string(port) + "/", "--timeout-ms", "500"}, out, err) == 2);
        CHECK(out.str().find("target unreachable") != std::string::npos);
    }
    SUBCASE("clean -> 0") {
        // Allowlisted origin, TLS, correct accept and no cookie/token demands: nothing to report
        // once the scan is told not to bring cookies or a token header.
        auto p = lab::matrix_profile(lab::MatrixAxes{false, false, false, false, true}.index());
        fixture::LabTarget t(p);
        std::ostringstream out, err;
        const int code = cli::run({"scan", t.server->url(), "--insecure-skip-tls-verify"}, out, err);
        CHECK(out.str().find("no findings") != std::string::npos);
        CHECK(code == 0);
    }
}

TEST_CASE("lab subcommand prints its coordinates and serves until told to stop") {
    std::ostringstream out, err;
    int scanned = -1;
    const int code = cli::run({"lab", "--profile", "vulnerable"}, out, err, [&] {
        const auto kv = key_values(out.str());
        REQUIRE(kv.contains("url"));
        REQUIRE(kv.contains("cookie"));
        CHECK(kv.at("ready") == "1");
        CHECK(kv.at("settings") == "origin=* auth=cookie accept=correct tls=off");
        std::ostringstream scan_out, scan_err;
        scanned = cli::run({"scan", kv.at("url"), "--cookie", kv.at("cookie"), "--timeout-ms", "3000"}, scan_out,
                           scan_err);
        CHECK(scan_out.str().find("[critical] cswh") != std::string::npos);
    });
    CHECK(code == 0);
    CHECK(scanned == 1);
}

TEST_CASE("matrix lab in token mode prints a token") {
    std::ostringstream out, err;
    cli::run({"lab", "--matrix-index", "6"}, out, err, [] {});
    const auto kv = key_values(out.str());
    CHECK(kv.at("profile") == "matrix-6");
    CHECK(kv.at("token").size() == 32);
}

TEST_CASE("poc subcommand") {
    std::ostringstream out, err;
    CHECK(cli::run({"poc", "ws://h/chat", "--note", "log in first"}, out, err) == 0);
    CHECK(out.str().find("log in first") != std::string::npos);

    TempFile target("");
    std::ostringstream out2;
    CHECK(cli::run({"poc", "ws://h/chat", "--out", target.path}, out2, err) == 0);
    CHECK(out2.str().empty());
    std::ifstream in(target.path);
    const std::string written((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(written == generate_cswh_poc("ws://h/chat"));
}

}  // TEST_SUITE
