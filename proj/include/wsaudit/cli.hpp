// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsaudit/report.hpp"
#include "wsaudit/scanner.hpp"

namespace wsaudit::cli {

enum class Command { scan, lab, poc };

struct LabArgs {
    std::string profile = "vulnerable";
    std::optional<int> matrix_index;
    std::uint16_t port = 0;
    std::string host = "127.0.0.1";
};

struct PocArgs {
    std::string url;
    std::optional<std::string> out;
    std::string note;
};

struct CliInvocation {
    Command command = Command::scan;
    ScanConfig scan;
    std::optional<std::string> authz_file;
    Format format = Format::text;
    bool verbose = false;
    LabArgs lab;
    PocArgs poc;
};

// Carries the text to print and the exit code (2 for usage errors, 0 for --help).
class UsageError : public std::runtime_error {
public:
    UsageError(const std::string& text, int exit_code) : std::runtime_error(text), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

// args excludes the program name.
CliInvocation parse_cli(const std::vector<std::string>& args);

// "NAME" or "NAME:VALUE".
TokenHeader parse_token_header(std::string_view text);

// A JSON object or array of objects with name, baseline_cookies, probe_cookies, message and
// success_pattern. Throws InputError.
std::vector<AuthzProbe> load_authz_probes(const std::string& path);

// Executes an invocation. wait_for_shutdown blocks the lab subcommand until it should stop;
// the default waits for SIGINT or SIGTERM.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::function<void()>& wait_for_shutdown = {});

}  // namespace wsaudit::cli
