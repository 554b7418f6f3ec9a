// SPDX-License-Identifier: Apache-2.0
#include "wsaudit/report.hpp"

#include <algorithm>
#include <sstream>

#include "wsaudit/errors.hpp"

namespace wsaudit {

namespace {

std::string indent(const std::string& text, std::string_view prefix) {
    std::string out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            nl = text.size();
        }
        std::string_view line(text.data() + start, nl - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        out.append(prefix).append(line).push_back('\n');
        start = nl + 1;
    }
    return out;
}

template <typename T>
T require(const nlohmann::json& doc, const char* key) {
    if (!doc.contains(key)) {
        throw InputError(std::string("report document lacks '") + key + "'");
    }
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("report field '") + key + "': " + e.what());
    }
}

CheckId parse_check(const std::string& s) {
    if (auto id = check_id_from(s)) {
        return *id;
    }
    throw InputError("unknown check id '" + s + "'");
}

}  // namespace

std::optional<Format> format_from(std::string_view text) {
    if (text == "text") {
        return Format::text;
    }
    if (text == "json") {
        return Format::json;
    }
    return std::nullopt;
}

std::string truncate_excerpt(const std::string& text, std::size_t limit) {
    if (text.size() <= limit) {
        return text;
    }
    return text.substr(0, limit) + "\n[... truncated " + std::to_string(text.size() - limit) + " bytes]";
}

nlohmann::ordered_json report_to_json(const ScanReport& report, const RenderOptions& options) {
    nlohmann::ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["target"] = report.target;
    doc["started_at"] = format_timestamp(report.started_at);
    doc["finished_at"] = format_timestamp(report.finished_at);
    auto findings = nlohmann::ordered_json::array();
    for (const auto& f : report.findings) {
        nlohmann::ordered_json item;
        item["check_id"] = std::string(to_string(f.check));
        item["severity"] = std::string(to_string(f.severity));
        auto evidence = nlohmann::ordered_json::array();
        for (const auto& e : f.evidence) {
            evidence.push_back(options.verbose ? e : truncate_excerpt(e));
        }
        item["evidence"] = std::move(evidence);
        item["remediation"] = f.remediation;
        findings.push_back(std::move(item));
    }
    doc["findings"] = std::move(findings);
    auto checks = nlohmann::ordered_json::array();
    for (const auto& c : report.checks_run) {
        checks.push_back({{"check_id", std::string(to_string(c.check))},
                          {"status", std::string(to_string(c.status))},
                          {"note", c.note}});
    }
    doc["checks_run"] = std::move(checks);
    doc["errors"] = report.errors;
    if (options.verbose) {
        doc["transcripts"] = report.transcripts;
    }
    return doc;
}

ScanReport report_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        throw InputError("report document must be a JSON object");
    }
    const int version = require<int>(doc, "schema_version");
    if (version != kSchemaVersion) {
        throw InputError("unsupported schema_version " + std::to_string(version));
    }
    ScanReport report;
    report.target = require<std::string>(doc, "target");
    report.started_at = parse_timestamp(require<std::string>(doc, "started_at"));
    report.finished_at = parse_timestamp(require<std::string>(doc, "finished_at"));
    for (const auto& item : require<nlohmann::json>(doc, "findings")) {
        Finding f;
        f.check = parse_check(require<std::string>(item, "check_id"));
        const auto sev = severity_from(require<std::string>(item, "severity"));
        if (!sev) {
            throw InputError("unknown severity");
        }
        f.severity = *sev;
        f.evidence = require<std::vector<std::string>>(item, "evidence");
        f.remediation = require<std::string>(item, "remediation");
        report.findings.push_back(std::move(f));
    }
    for (const auto& item : require<nlohmann::json>(doc, "checks_run")) {
        CheckRun c;
        c.check = parse_check(require<std::string>(item, "check_id"));
        const auto status = check_status_from(require<std::string>(item, "status"));
        if (!status) {
            throw InputError("unknown check status");
        }
        c.status = *status;
        c.note = require<std::string>(item, "note");
        report.checks_run.push_back(std::move(c));
    }
    report.errors = require<std::vector<std::string>>(doc, "errors");
    if (doc.contains("transcripts")) {
        report.transcripts = require<std::vector<std::string>>(doc, "transcripts");
    }
    return report;
}

std::string render(const ScanReport& report, Format format, const RenderOptions& options) {
    if (format == Format::json) {
        return report_to_json(report, options).dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
    }

    std::ostringstream out;
    out << "wsaudit scan of " << report.target << "\n";
    out << "started " << format_timestamp(report.started_at) << ", finished " << format_timestamp(report.finished_at)
        << "\n\n";

    std::vector<const Finding*> sorted;
    for (const auto& f : report.findings) {
        sorted.push_back(&f);
    }
    std::stable_sort(sorted.begin(), sorted.end(), [](const Finding* a, const Finding* b) {
        if (a->severity != b->severity) {
            return a->severity > b->severity;
        }
        return a->check < b->check;
    });

    if (sorted.empty()) {
        out << "findings: none\n";
        out << "no findings\n";
    } else {
        out << "findings: " << sorted.size() << "\n";
        for (const Finding* f : sorted) {
            out << "[" << to_string(f->severity) << "] " << to_string(f->check) << " (" << f->evidence.size()
                << " evidence excerpt" << (f->evidence.size() == 1 ? "" : "s") << ")\n";
            out << "  remediation: " << f->remediation << "\n";
            for (std::size_t i = 0; i < f->evidence.size(); ++i) {
                out << "  evidence " << (i + 1) << ":\n";
                out << indent(options.verbose ? f->evidence[i] : truncate_excerpt(f->evidence[i]), "    | ");
            }
        }
    }

    out << "\nchecks:\n";
    for (const auto& c : report.checks_run) {
        out << "  " << to_string(c.check) << ": " << to_string(c.status);
        if (!c.note.empty()) {
            out << " (" << c.note << ")";
        }
        out << "\n";
    }
    if (!report.errors.empty()) {
        out << "\nerrors:\n";
        for (const auto& e : report.errors) {
            out << "  " << e << "\n";
        }
    }
    if (options.verbose && !report.transcripts.empty()) {
        out << "\ntranscripts:\n";
        for (std::size_t i = 0; i < report.transcripts.size(); ++i) {
            out << "  #" << (i + 1) << "\n" << indent(report.transcripts[i], "    | ");
        }
    }
    return out.str();
}

int exit_code(const ScanReport& report) {
    if (report.has_errors()) {
        return kExitError;
    }
    return report.has_findings() ? kExitFindings : kExitClean;
}

}  // namespace wsaudit
