// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "wsaudit/bytes.hpp"

using SSL = struct ssl_st;
using SSL_CTX = struct ssl_ctx_st;

namespace wsaudit::net {

using Clock = std::chrono::steady_clock;
using Deadline = Clock::time_point;

inline Deadline deadline_in(std::chrono::milliseconds ms) { return Clock::now() + ms; }

// Shared OpenSSL context. Client contexts verify peers unless told otherwise.
class TlsContext {
public:
    static std::shared_ptr<TlsContext> client(bool verify_peer);
    // Fresh EC key and self-signed certificate for localhost / 127.0.0.1 / ::1.
    static std::shared_ptr<TlsContext> self_signed_server();
    // PEM certificate chain and key from disk. Throws TransportError when unreadable.
    static std::shared_ptr<TlsContext> server_from_files(const std::string& cert_pem, const std::string& key_pem);

    ~TlsContext();
    TlsContext(const TlsContext&) = delete;
    TlsContext& operator=(const TlsContext&) = delete;

    SSL_CTX* get() const { return ctx_; }
    bool verifies_peer() const { return verify_; }

private:
    TlsContext(SSL_CTX* ctx, bool verify) : ctx_(ctx), verify_(verify) {}

    SSL_CTX* ctx_;
    bool verify_;
};

// A connected socket, optionally wrapped in TLS. Non-blocking underneath; every call takes a
// deadline and throws TransportError when it passes.
class Stream {
public:
    Stream() = default;
    Stream(int fd, SSL* ssl, std::shared_ptr<TlsContext> ctx);
    ~Stream();
    Stream(Stream&& other) noexcept;
    Stream& operator=(Stream&& other) noexcept;
    Stream(const Stream&) = delete;
    Stream& operator=(const Stream&) = delete;

    bool is_open() const { return fd_ >= 0; }
    bool is_tls() const { return ssl_ != nullptr; }

    void write_all(ByteView data, Deadline deadline);
    // Returns 0 on orderly EOF.
    std::size_t read_some(std::span<std::uint8_t> out, Deadline deadline);
    // True if read_some would not block (buffered TLS data or a readable socket).
    bool wait_readable(Deadline deadline);

    void close();

private:
    int fd_ = -1;
    SSL* ssl_ = nullptr;
    std::shared_ptr<TlsContext> ctx_;
};

struct ConnectOptions {
    bool tls = false;
    std::shared_ptr<TlsContext> tls_context;  // defaults to a verifying client context
    std::chrono::milliseconds timeout{10'000};
};

// TCP connect plus TLS handshake (SNI and hostname verification when verifying).
Stream connect(const std::string& host, std::uint16_t port, const ConnectOptions& options);

class Listener {
public:
    // Port 0 picks an ephemeral port. Throws TransportError on bind failure.
    Listener(const std::string& host, std::uint16_t port);
    ~Listener();
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    std::uint16_t port() const { return port_; }
    const std::string& host() const { return host_; }

    // Accepted fd, or nullopt after the timeout or once closed.
    std::optional<int> accept(std::chrono::milliseconds timeout);
    void close();

private:
    int fd_ = -1;
    std::string host_;
    std::uint16_t port_ = 0;
};

// Wraps an accepted fd, running the server-side TLS handshake when ctx is given.
Stream accept_stream(int fd, const std::shared_ptr<TlsContext>& ctx, Deadline deadline);

void ignore_sigpipe();

}  // namespace wsaudit::net
