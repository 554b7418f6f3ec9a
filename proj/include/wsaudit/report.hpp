// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "wsaudit/findings.hpp"

namespace wsaudit {

enum class Format { text, json };

std::optional<Format> format_from(std::string_view text);

inline constexpr int kSchemaVersion = 1;
inline constexpr std::size_t kEvidenceLimit = 2048;

struct RenderOptions {
    // Full evidence and the raw transcripts instead of 2 KiB excerpts.
    bool verbose = false;
};

std::string truncate_excerpt(const std::string& text, std::size_t limit = kEvidenceLimit);

nlohmann::ordered_json report_to_json(const ScanReport& report, const RenderOptions& options = {});
// Throws InputError when the document does not follow the schema.
ScanReport report_from_json(const nlohmann::json& doc);

// Text lists findings critical first; json is the schema-versioned document. Both are
// deterministic for a fixed report.
std::string render(const ScanReport& report, Format format, const RenderOptions& options = {});

inline constexpr int kExitClean = 0;
inline constexpr int kExitFindings = 1;
inline constexpr int kExitError = 2;

// 2 if the scan recorded errors, else 1 if it found something, else 0.
int exit_code(const ScanReport& report);

}  // namespace wsaudit
