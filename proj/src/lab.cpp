// SPDX-License-Identifier: Apache-2.0
#include "wsaudit/lab.hpp"

#include <array>
#include <sstream>

#include "wsaudit/errors.hpp"
#include "wsaudit/frame.hpp"

namespace wsaudit::lab {

namespace {

constexpr std::chrono::milliseconds kPollInterval{50};
constexpr std::chrono::milliseconds kIoTimeout{10'000};
constexpr std::size_t kMaxHeadBytes = 16 * 1024;

std::string reject_response(int status, std::string_view why) {
    UpgradeResponse resp;
    resp.status = status;
    resp.headers = {{"Content-Type", "text/plain"},
                    {"Content-Length", std::to_string(why.size())},
                    {"Connection", "close"}};
    if (status == 426) {
        resp.headers.push_back({"Sec-WebSocket-Version", std::string(kWebSocketVersion)});
    }
    return resp.serialize() + std::string(why);
}

std::optional<std::string> cookie_value(const UpgradeRequest& req, const std::string& name) {
    for (const auto& c : req.cookies) {
        if (c.name == name) {
            return c.value;
        }
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(AuthMode mode) {
    switch (mode) {
        case AuthMode::none: return "none";
        case AuthMode::cookie: return "cookie";
        case AuthMode::token: return "token";
        case AuthMode::cookie_token: return "cookie+token";
    }
    return "unknown";
}

AuthMode ServerProfile::auth_mode() const {
    if (require_cookie) {
        return require_token ? AuthMode::cookie_token : AuthMode::cookie;
    }
    return require_token ? AuthMode::token : AuthMode::none;
}

void ServerProfile::validate() const {
    if (require_token && token_header_name.empty()) {
        throw InputError("token auth requires a token header name");
    }
    if (require_cookie && session_cookie_name.empty()) {
        throw InputError("cookie auth requires a session cookie name");
    }
    if (accept_mode == AcceptMode::fixed && fixed_accept.empty()) {
        throw InputError("fixed accept mode requires a configured accept constant");
    }
    if (origin_policy.mode() == OriginPolicy::Mode::wildcard && !origin_policy.allowed().empty()) {
        throw InputError("wildcard origin policy must not list origins");
    }
}

std::string ServerProfile::describe() const {
    std::ostringstream out;
    out << "origin=" << (origin_policy.mode() == OriginPolicy::Mode::wildcard ? "*" : "allowlist")
        << " auth=" << to_string(auth_mode())
        << " accept=" << (accept_mode == AcceptMode::correct ? "correct" : "static")
        << " tls=" << (tls ? "on" : "off");
    return out.str();
}

std::optional<NamedProfile> named_profile_from(std::string_view name) {
    if (name == "vulnerable") {
        return NamedProfile::vulnerable;
    }
    if (name == "hardened") {
        return NamedProfile::hardened;
    }
    return std::nullopt;
}

int MatrixAxes::index() const {
    return (wildcard_origin ? 1 : 0) | (cookie ? 2 : 0) | (token ? 4 : 0) | (fixed_accept ? 8 : 0) | (tls ? 16 : 0);
}

MatrixAxes MatrixAxes::from_index(int index) {
    if (index < 0 || index >= kMatrixSize) {
        throw InputError("matrix index must be in 0.." + std::to_string(kMatrixSize - 1));
    }
    return MatrixAxes{(index & 1) != 0, (index & 2) != 0, (index & 4) != 0, (index & 8) != 0, (index & 16) != 0};
}

std::string default_fixed_accept() {
    // Any constant works; this is the token for an all-zero nonce.
    return compute_accept("AAAAAAAAAAAAAAAAAAAAAA==").value;
}

ServerProfile matrix_profile(int index) {
    const MatrixAxes axes = MatrixAxes::from_index(index);
    ServerProfile p;
    p.origin_policy = axes.wildcard_origin ? OriginPolicy::wildcard() : OriginPolicy::allowlist({});
    p.require_cookie = axes.cookie;
    p.require_token = axes.token;
    p.accept_mode = axes.fixed_accept ? AcceptMode::fixed : AcceptMode::correct;
    if (axes.fixed_accept) {
        p.fixed_accept = default_fixed_accept();
    }
    p.tls = axes.tls;
    return p;
}

ServerProfile named(NamedProfile which) {
    switch (which) {
        case NamedProfile::vulnerable: return matrix_profile(MatrixAxes{true, true, false, false, false}.index());
        case NamedProfile::hardened: return matrix_profile(MatrixAxes{false, true, true, false, true}.index());
    }
    throw InputError("unknown profile");
}

int handshake_status(const ServerProfile& profile, bool origin_allowed, bool cookie_valid, bool token_valid) {
    if (!origin_allowed) {
        return 403;
    }
    if (profile.require_cookie && !cookie_valid) {
        return 401;
    }
    if (profile.require_token && !token_valid) {
        return 403;
    }
    return 101;
}

// --- server lifecycle -----------------------------------------------------

LabServer::LabServer(ServerProfile profile, const std::string& host, std::uint16_t port)
    : profile_(std::move(profile)), host_(host) {
    profile_.validate();
    if (profile_.tls) {
        tls_ = net::TlsContext::self_signed_server();
    }
    listener_ = std::make_unique<net::Listener>(host, port);
    port_ = listener_->port();
    if (profile_.allow_self_origin) {
        profile_.origin_policy.allow(parse_origin(own_origin()));
    }
}

std::unique_ptr<LabServer> LabServer::start(ServerProfile profile, const std::string& bind_host, std::uint16_t port) {
    std::unique_ptr<LabServer> server(new LabServer(std::move(profile), bind_host, port));
    server->acceptor_ = std::thread([s = server.get()] { s->accept_loop(); });
    return server;
}

LabServer::~LabServer() { stop(); }

std::string LabServer::url(std::string_view path) const {
    const std::string host = host_.find(':') != std::string::npos ? "[" + host_ + "]" : host_;
    return std::string(profile_.tls ? "wss" : "ws") + "://" + host + ":" + std::to_string(port_) + std::string(path);
}

std::string LabServer::own_origin() const {
    const std::string host = host_.find(':') != std::string::npos ? "[" + host_ + "]" : host_;
    return std::string(profile_.tls ? "https" : "http") + "://" + host + ":" + std::to_string(port_);
}

Stats LabServer::stats() const { return Stats{handshakes_.load(), upgrades_.load()}; }

void LabServer::stop() {
    std::lock_guard lock(stop_mu_);
    if (stopped_.load()) {
        return;
    }
    stopping_ = true;
    if (acceptor_.joinable()) {
        acceptor_.join();
    }
    reap(true);
    stopped_ = true;
}

void LabServer::reap(bool all) {
    std::list<Worker> finished;
    {
        std::lock_guard lock(workers_mu_);
        for (auto it = workers_.begin(); it != workers_.end();) {
            if (all || it->done->load()) {
                finished.splice(finished.end(), workers_, it++);
            } else {
                ++it;
            }
        }
    }
    for (auto& w : finished) {
        w.thread.join();
    }
}

void LabServer::accept_loop() {
    while (!stopping_.load()) {
        const auto fd = listener_->accept(kPollInterval);
        reap(false);
        if (!fd) {
            continue;
        }
        auto done = std::make_shared<std::atomic<bool>>(false);
        std::lock_guard lock(workers_mu_);
        workers_.push_back(Worker{std::thread([this, f = *fd, done] {
                                      try {
                                          serve(f);
                                      } catch (const std::exception&) {
                                          // Per-connection failures never take the server down.
                                      }
                                      done->store(true);
                                  }),
                                  done});
    }
    listener_->close();
}

// --- sessions -------------------------------------------------------------

Session LabServer::issue_session() { return adopt_session(random_hex(entropy_, 16)); }

Session LabServer::adopt_session(const std::string& value) {
    if (value.empty()) {
        throw InputError("session value must not be empty");
    }
    Session s;
    s.cookie = Cookie{profile_.session_cookie_name, value};
    {
        std::lock_guard lock(store_mu_);
        sessions_[s.cookie.value] = true;
    }
    if (profile_.require_token) {
        s.token = issue_token(s.cookie.value);
    }
    return s;
}

std::optional<std::string> LabServer::issue_token(const std::string& session_value) {
    std::string token = random_hex(entropy_, 16);
    std::lock_guard lock(store_mu_);
    if (!sessions_.contains(session_value)) {
        return std::nullopt;
    }
    tokens_[token] = TokenRecord{session_value, false};
    return token;
}

bool LabServer::session_valid(const std::string& value) const {
    std::lock_guard lock(store_mu_);
    return sessions_.contains(value);
}

bool LabServer::token_valid_locked(const std::string& token, const std::optional<std::string>& session) const {
    const auto it = tokens_.find(token);
    if (it == tokens_.end() || it->second.used) {
        return false;
    }
    // Binding is enforced whenever sessions are part of authentication.
    if (profile_.require_cookie && (!session || *session != it->second.session)) {
        return false;
    }
    return true;
}

// --- per connection -------------------------------------------------------

void LabServer::serve(int fd) {
    const net::Deadline handshake_deadline = net::deadline_in(kIoTimeout);
    net::Stream stream = net::accept_stream(fd, tls_, handshake_deadline);

    std::string buffer;
    std::array<std::uint8_t, 8192> chunk{};
    std::size_t head_end = std::string::npos;
    while (head_end == std::string::npos) {
        if (stopping_.load()) {
            return;
        }
        if (buffer.size() > kMaxHeadBytes) {
            stream.write_all(as_bytes(reject_response(400, "request head too large")), handshake_deadline);
            return;
        }
        if (!stream.wait_readable(std::min(handshake_deadline, net::deadline_in(kPollInterval)))) {
            if (net::Clock::now() >= handshake_deadline) {
                return;
            }
            continue;
        }
        const std::size_t n = stream.read_some(chunk, handshake_deadline);
        if (n == 0) {
            return;
        }
        buffer.append(reinterpret_cast<const char*>(chunk.data()), n);
        head_end = find_head_end(buffer);
    }
    ++handshakes_;

    UpgradeRequest req;
    try {
        req = parse_upgrade_request(std::string_view(buffer).substr(0, head_end));
    } catch (const ParseError& e) {
        stream.write_all(as_bytes(reject_response(400, e.what())), handshake_deadline);
        return;
    }
    if (req.method != "GET") {
        stream.write_all(as_bytes(reject_response(400, "method must be GET")), handshake_deadline);
        return;
    }
    if (req.version != kWebSocketVersion) {
        stream.write_all(as_bytes(reject_response(426, "unsupported version")), handshake_deadline);
        return;
    }
    try {
        (void)Nonce::from_encoded(req.key);
    } catch (const InputError&) {
        stream.write_all(as_bytes(reject_response(400, "Sec-WebSocket-Key is not a 16-byte nonce")),
                         handshake_deadline);
        return;
    }

    OriginTriple origin = OriginTriple::null_origin();
    if (req.origin) {
        try {
            origin = parse_origin(*req.origin);
        } catch (const ParseError&) {
        }
    }
    const bool origin_ok = is_allowed(profile_.origin_policy, origin);
    const auto session = cookie_value(req, profile_.session_cookie_name);
    const bool cookie_ok = session && session_valid(*session);
    const auto token = find_header(req.extra_headers, profile_.token_header_name);

    int status = 0;
    {
        // Check and burn the token atomically so concurrent reuse cannot both pass.
        std::lock_guard lock(store_mu_);
        const bool token_ok = token && token_valid_locked(std::string(*token), session);
        status = handshake_status(profile_, origin_ok, cookie_ok, token_ok);
        if (status == 101 && profile_.require_token) {
            tokens_[std::string(*token)].used = true;
        }
    }
    if (status != 101) {
        const char* why = status == 401 ? "session cookie missing or invalid"
                          : !origin_ok  ? "origin not allowed"
                                        : "CSRF token missing or invalid";
        stream.write_all(as_bytes(reject_response(status, why)), handshake_deadline);
        return;
    }

    UpgradeResponse resp;
    resp.status = 101;
    resp.headers = {{"Upgrade", "websocket"},
                    {"Connection", "Upgrade"},
                    {"Sec-WebSocket-Accept", profile_.accept_mode == AcceptMode::correct
                                                 ? compute_accept(req.key).value
                                                 : profile_.fixed_accept}};
    stream.write_all(as_bytes(resp.serialize()), handshake_deadline);
    ++upgrades_;

    Bytes privileged;
    if (profile_.privileged && cookie_ok) {
        const auto& p = *profile_.privileged;
        if (p.gate == PrivilegedReply::Gate::any_session || *session == p.required_cookie_value) {
            privileged = p.reply;
        }
    }

    FrameDecoder decoder;
    MessageAssembler assembler;
    decoder.feed(ByteView(reinterpret_cast<const std::uint8_t*>(buffer.data()) + head_end, buffer.size() - head_end));
    auto send = [&](const Frame& f) { stream.write_all(encode_frame(f), net::deadline_in(kIoTimeout)); };
    auto send_close = [&](std::uint16_t code, std::string_view reason) {
        send(Frame{true, {}, Opcode::close, std::nullopt, close_payload(CloseInfo{code, std::string(reason)})});
    };

    while (true) {
        try {
            while (auto frame = decoder.next()) {
                if (!frame->masked()) {
                    throw ProtocolError("client frames must be masked");
                }
                const std::size_t pings = assembler.pings().size();
                auto msg = assembler.push(*frame);
                if (assembler.pings().size() > pings) {
                    send(Frame{true, {}, Opcode::pong, std::nullopt, assembler.pings().back()});
                }
                if (assembler.closed()) {
                    send(Frame{true, {}, Opcode::close, std::nullopt, close_payload(*assembler.close())});
                    return;
                }
                if (msg) {
                    Bytes echo = std::move(msg->data);
                    echo.insert(echo.end(), privileged.begin(), privileged.end());
                    send(Frame{true, {}, msg->kind == MessageKind::text ? Opcode::text : Opcode::binary, std::nullopt,
                               std::move(echo)});
                }
            }
        } catch (const ProtocolError& e) {
            const bool utf8 = e.rule().find("UTF-8") != std::string::npos;
            send_close(utf8 ? 1007 : 1002, e.rule().substr(0, 120));
            return;
        }
        if (stopping_.load()) {
            send_close(1001, "server stopping");
            return;
        }
        if (!stream.wait_readable(net::deadline_in(kPollInterval))) {
            continue;
        }
        const std::size_t n = stream.read_some(chunk, net::deadline_in(kIoTimeout));
        if (n == 0) {
            return;
        }
        decoder.feed(ByteView(chunk.data(), n));
    }
}

}  // namespace wsaudit::lab
