// SPDX-License-Identifier: Apache-2.0
#include "wsaudit/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "wsaudit/errors.hpp"
#include "wsaudit/lab.hpp"
#include "wsaudit/poc.hpp"

namespace wsaudit::cli {

namespace {

struct Parser {
    CLI::App app{"WebSocket attack-surface auditor", "wsaudit"};
    CLI::App* scan = nullptr;
    CLI::App* lab = nullptr;
    CLI::App* poc = nullptr;

    CliInvocation inv;
    std::vector<std::string> origins;
    std::vector<std::string> cookies;
    std::string token_header;
    int timeout_ms = 10'000;
    std::string format = "text";
    bool insecure = false;
    int parallel = 1;

    Parser() {
        app.require_subcommand(1);
        app.set_help_all_flag("--help-all", "Show help for every subcommand");

        scan = app.add_subcommand("scan", "Probe a ws:// or wss:// endpoint");
        scan->add_option("url", inv.scan.target, "Target URL")->required();
        scan->add_option("--origin", origins, "Probe origin (repeatable; replaces the default foreign origin)");
        scan->add_option("--cookie", cookies, "Session cookie NAME=VALUE (repeatable)");
        scan->add_option("--token-header", token_header, "Expected CSRF token header NAME[:VALUE]");
        scan->add_option("--timeout-ms", timeout_ms, "Per-handshake timeout")->check(CLI::PositiveNumber);
        scan->add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "json"}));
        scan->add_flag("--insecure-skip-tls-verify", insecure, "Do not verify the server certificate");
        scan->add_option("--parallel", parallel, "Concurrent origin probes")->check(CLI::PositiveNumber);
        scan->add_option("--authz-probe", inv.authz_file, "JSON file with authorization probes")
            ->check(CLI::ExistingFile);
        scan->add_flag("--verbose", inv.verbose, "Full evidence and raw transcripts");

        lab = app.add_subcommand("lab", "Run the ground-truth lab server");
        lab->add_option("--profile", inv.lab.profile, "Named profile")
            ->check(CLI::IsMember({"vulnerable", "hardened"}));
        lab->add_option("--port", inv.lab.port, "Listen port (0 = ephemeral)");
        lab->add_option("--matrix-index", inv.lab.matrix_index, "Matrix profile 0..31 (overrides --profile)")
            ->check(CLI::Range(0, lab::kMatrixSize - 1));

        poc = app.add_subcommand("poc", "Write a cross-site hijacking proof-of-concept page");
        poc->add_option("url", inv.poc.url, "Target URL")->required();
        poc->add_option("--out", inv.poc.out, "Output file (default stdout)");
        poc->add_option("--note", inv.poc.note, "Text shown on the page");
    }
};

void wait_for_signal() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    int sig = 0;
    sigwait(&set, &sig);
}

void block_shutdown_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

Bytes bytes_field(const nlohmann::json& item, const char* key) {
    if (!item.contains(key) || !item.at(key).is_string()) {
        throw InputError(std::string("authz probe needs string field '") + key + "'");
    }
    return to_bytes(item.at(key).get<std::string>());
}

std::vector<Cookie> cookie_list(const nlohmann::json& item, const char* key) {
    std::vector<Cookie> out;
    if (!item.contains(key)) {
        return out;
    }
    if (!item.at(key).is_array()) {
        throw InputError(std::string("authz probe field '") + key + "' must be an array");
    }
    for (const auto& c : item.at(key)) {
        if (!c.is_string()) {
            throw InputError(std::string("authz probe field '") + key + "' must hold strings");
        }
        out.push_back(Cookie::parse(c.get<std::string>()));
    }
    return out;
}

int run_lab(const CliInvocation& inv, std::ostream& out, std::ostream& err, const std::function<void()>& wait) {
    lab::ServerProfile profile;
    if (inv.lab.matrix_index) {
        profile = lab::matrix_profile(*inv.lab.matrix_index);
    } else {
        profile = lab::named(*lab::named_profile_from(inv.lab.profile));
    }
    if (!wait) {
        block_shutdown_signals();
    }
    std::unique_ptr<lab::LabServer> server;
    try {
        server = lab::LabServer::start(profile, inv.lab.host, inv.lab.port);
    } catch (const std::exception& e) {
        err << "wsaudit lab: " << e.what() << "\n";
        return kExitError;
    }
    const auto session = server->issue_session();
    out << "address=" << server->host() << ":" << server->port() << "\n";
    out << "url=" << server->url() << "\n";
    out << "origin=" << server->own_origin() << "\n";
    out << "profile=" << (inv.lab.matrix_index ? "matrix-" + std::to_string(*inv.lab.matrix_index) : inv.lab.profile)
        << "\n";
    out << "settings=" << server->profile().describe() << "\n";
    out << "cookie=" << session.cookie.str() << "\n";
    out << "token_header=" << server->profile().token_header_name << "\n";
    if (session.token) {
        out << "token=" << *session.token << "\n";
    }
    out << "ready=1" << std::endl;

    if (wait) {
        wait();
    } else {
        wait_for_signal();
    }
    server->stop();
    return kExitClean;
}

int run_poc(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
    std::string page;
    try {
        page = generate_cswh_poc(inv.poc.url, inv.poc.note);
    } catch (const InputError& e) {
        err << "wsaudit poc: " << e.what() << "\n";
        return kExitError;
    }
    if (!inv.poc.out) {
        out << page;
        return kExitClean;
    }
    std::ofstream file(*inv.poc.out, std::ios::binary);
    file << page;
    if (!file) {
        err << "wsaudit poc: cannot write " << *inv.poc.out << "\n";
        return kExitError;
    }
    return kExitClean;
}

int run_scan_command(CliInvocation inv, std::ostream& out, std::ostream& err) {
    try {
        if (inv.authz_file) {
            inv.scan.authz_probes = load_authz_probes(*inv.authz_file);
        }
        inv.scan.validate();
    } catch (const InputError& e) {
        err << "wsaudit scan: " << e.what() << "\n";
        return kExitError;
    }
    const ScanReport report = run_scan(inv.scan);
    out << render(report, inv.format, RenderOptions{inv.verbose});
    return exit_code(report);
}

}  // namespace

TokenHeader parse_token_header(std::string_view text) {
    TokenHeader header;
    const std::size_t colon = text.find(':');
    header.name = std::string(trim_ows(text.substr(0, colon)));
    if (colon != std::string_view::npos) {
        header.value = std::string(trim_ows(text.substr(colon + 1)));
    }
    if (header.name.empty()) {
        throw InputError("--token-header needs a header name");
    }
    return header;
}

std::vector<AuthzProbe> load_authz_probes(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open authz probe file " + path);
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("authz probe file " + path + ": " + e.what());
    }
    if (doc.is_object()) {
        doc = nlohmann::json::array({doc});
    }
    if (!doc.is_array()) {
        throw InputError("authz probe file must hold an object or an array");
    }
    std::vector<AuthzProbe> probes;
    for (const auto& item : doc) {
        if (!item.is_object()) {
            throw InputError("authz probe entries must be objects");
        }
        AuthzProbe p;
        p.name = item.value("name", "probe-" + std::to_string(probes.size() + 1));
        p.baseline_cookies = cookie_list(item, "baseline_cookies");
        p.probe_cookies = cookie_list(item, "probe_cookies");
        p.message = bytes_field(item, "message");
        p.success_pattern = bytes_field(item, "success_pattern");
        p.validate();
        probes.push_back(std::move(p));
    }
    return probes;
}

CliInvocation parse_cli(const std::vector<std::string>& args) {
    Parser p;
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        p.app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream out;
        std::ostringstream err;
        const int code = p.app.exit(e, out, err);
        throw UsageError(out.str() + err.str(), code == 0 ? 0 : kExitError);
    }

    CliInvocation inv = p.inv;
    if (*p.scan) {
        inv.command = Command::scan;
        try {
            if (!p.origins.empty()) {
                inv.scan.probe_origins = p.origins;
            }
            for (const auto& c : p.cookies) {
                inv.scan.cookies.push_back(Cookie::parse(c));
            }
            if (!p.token_header.empty()) {
                inv.scan.token_header = parse_token_header(p.token_header);
            }
            inv.scan.timeout = std::chrono::milliseconds(p.timeout_ms);
            inv.scan.verify_tls = !p.insecure;
            inv.scan.parallelism = p.parallel;
            inv.format = *format_from(p.format);
            (void)WsUrl::parse(inv.scan.target);
        } catch (const InputError& e) {
            throw UsageError(std::string("error: ") + e.what() + "\n" + p.scan->help(), kExitError);
        }
    } else if (*p.lab) {
        inv.command = Command::lab;
    } else {
        inv.command = Command::poc;
        try {
            (void)WsUrl::parse(inv.poc.url);
        } catch (const InputError& e) {
            throw UsageError(std::string("error: ") + e.what() + "\n" + p.poc->help(), kExitError);
        }
    }
    return inv;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::function<void()>& wait_for_shutdown) {
    CliInvocation inv;
    try {
        inv = parse_cli(args);
    } catch (const UsageError& e) {
        (e.exit_code() == 0 ? out : err) << e.what();
        return e.exit_code();
    }
    switch (inv.command) {
        case Command::scan: return run_scan_command(std::move(inv), out, err);
        case Command::lab: return run_lab(inv, out, err, wait_for_shutdown);
        case Command::poc: return run_poc(inv, out, err);
    }
    return kExitError;
}

}  // namespace wsaudit::cli
