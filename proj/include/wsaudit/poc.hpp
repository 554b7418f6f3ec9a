// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace wsaudit {

// Static HTML page that opens a WebSocket to target_url from whatever origin serves it, sends one
// marker message and logs every frame it receives. No external resources. Throws InputError for
// a non-ws(s) URL.
std::string generate_cswh_poc(std::string_view target_url, std::string_view victim_note = {});

inline constexpr std::string_view kPocMarker = "wsaudit-cswh-poc";

}  // namespace wsaudit
