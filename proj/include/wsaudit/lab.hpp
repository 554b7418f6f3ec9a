// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>

#include "wsaudit/bytes.hpp"
#include "wsaudit/entropy.hpp"
#include "wsaudit/handshake.hpp"
#include "wsaudit/net.hpp"
#include "wsaudit/origin.hpp"

namespace wsaudit::lab {

enum class AuthMode { none, cookie, token, cookie_token };
enum class AcceptMode { correct, fixed };

std::string_view to_string(AuthMode mode);

struct PrivilegedReply {
    enum class Gate {
        exact_session,  // only the session whose cookie equals required_cookie_value
        any_session,    // any valid session: broken access control, leaks to other users
    };

    std::string required_cookie_value;
    Bytes reply;
    Gate gate = Gate::exact_session;
};

struct ServerProfile {
    OriginPolicy origin_policy = OriginPolicy::wildcard();
    // Allowlist mode also admits http(s)://<bind-host>:<port> once the port is known.
    bool allow_self_origin = true;
    bool require_cookie = false;
    bool require_token = false;
    AcceptMode accept_mode = AcceptMode::correct;
    std::string fixed_accept;  // required when accept_mode is fixed
    bool tls = false;
    std::string session_cookie_name = "session";
    std::string token_header_name = "X-CSRF-Token";
    std::optional<PrivilegedReply> privileged;

    AuthMode auth_mode() const;
    // Throws InputError when the profile is inconsistent.
    void validate() const;
    std::string describe() const;
};

enum class NamedProfile { vulnerable, hardened };

std::optional<NamedProfile> named_profile_from(std::string_view name);
ServerProfile named(NamedProfile which);

inline constexpr int kMatrixSize = 32;

// Bits of a matrix index: 0 wildcard origin, 1 cookie required, 2 token required,
// 3 fixed accept token, 4 TLS.
struct MatrixAxes {
    bool wildcard_origin = false;
    bool cookie = false;
    bool token = false;
    bool fixed_accept = false;
    bool tls = false;

    static MatrixAxes from_index(int index);
    int index() const;
};

ServerProfile matrix_profile(int index);
std::string default_fixed_accept();

// HTTP status the lab answers for a handshake with these properties: 101, 401 or 403.
// Origin is checked first, then the session cookie, then the token.
int handshake_status(const ServerProfile& profile, bool origin_allowed, bool cookie_valid, bool token_valid);

struct Session {
    Cookie cookie;
    std::optional<std::string> token;  // issued when the profile requires tokens
};

struct Stats {
    std::uint64_t handshakes = 0;
    std::uint64_t upgrades = 0;
};

class LabServer {
public:
    // Binds and starts serving. Throws TransportError on bind failure or bad TLS material,
    // InputError on an invalid profile.
    static std::unique_ptr<LabServer> start(ServerProfile profile, const std::string& bind_host = "127.0.0.1",
                                            std::uint16_t port = 0);

    ~LabServer();
    LabServer(const LabServer&) = delete;
    LabServer& operator=(const LabServer&) = delete;

    // Fresh random session cookie (128 bits) and, in token modes, a single-use token bound to it.
    Session issue_session();
    // Registers a caller-chosen session value, e.g. the required_cookie_value of a privileged reply.
    Session adopt_session(const std::string& value);
    // Another single-use token for an existing session; nullopt for unknown sessions.
    std::optional<std::string> issue_token(const std::string& session_value);

    // Closes the listener, sends a close frame on every live connection and joins all threads.
    // Idempotent.
    void stop();
    bool running() const { return !stopped_.load(); }

    std::uint16_t port() const { return port_; }
    const std::string& host() const { return host_; }
    std::string url(std::string_view path = "/") const;
    std::string own_origin() const;
    const ServerProfile& profile() const { return profile_; }
    Stats stats() const;

private:
    LabServer(ServerProfile profile, const std::string& host, std::uint16_t port);

    void accept_loop();
    void serve(int fd);
    void reap(bool all);

    struct TokenRecord {
        std::string session;
        bool used = false;
    };

    bool session_valid(const std::string& value) const;
    // Checks and, when consume is true, burns the token. Caller holds store_mu_.
    bool token_valid_locked(const std::string& token, const std::optional<std::string>& session) const;

    ServerProfile profile_;
    std::string host_;
    std::uint16_t port_ = 0;
    std::unique_ptr<net::Listener> listener_;
    std::shared_ptr<net::TlsContext> tls_;
    SystemEntropy entropy_;

    mutable std::mutex store_mu_;
    std::unordered_map<std::string, bool> sessions_;
    std::unordered_map<std::string, TokenRecord> tokens_;

    std::atomic<bool> stopping_{false};
    std::atomic<bool> stopped_{false};
    std::mutex stop_mu_;
    std::thread acceptor_;

    struct Worker {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done;
    };
    std::mutex workers_mu_;
    std::list<Worker> workers_;

    std::atomic<std::uint64_t> handshakes_{0};
    std::atomic<std::uint64_t> upgrades_{0};
};

}  // namespace wsaudit::lab
