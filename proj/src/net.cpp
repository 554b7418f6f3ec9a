// SPDX-License-Identifier: Apache-2.0
#include "wsaudit/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/ssl.h>
#include <openssl/x509v3.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <mutex>

#include "wsaudit/errors.hpp"

namespace wsaudit::net {

namespace {

std::string openssl_error() {
    const unsigned long code = ERR_get_error();
    if (code == 0) {
        return "unknown TLS error";
    }
    char buf[256];
    ERR_error_string_n(code, buf, sizeof buf);
    ERR_clear_error();
    return buf;
}

std::string errno_text(int err) { return std::strerror(err); }

int remaining_ms(Deadline deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return left <= 0 ? 0 : static_cast<int>(left);
}

// Waits for events on fd. False on timeout.
bool wait_fd(int fd, short events, Deadline deadline) {
    while (true) {
        pollfd p{fd, events, 0};
        const int rc = ::poll(&p, 1, remaining_ms(deadline));
        if (rc > 0) {
            return true;
        }
        if (rc == 0) {
            return false;
        }
        if (errno != EINTR) {
            throw TransportError("poll: " + errno_text(errno));
        }
    }
}

void set_nonblocking(int fd) {
    const int flags = ::fcntl(fd, F_GETFL, 0);
    if (flags < 0 || ::fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0) {
        throw TransportError("fcntl: " + errno_text(errno));
    }
}

bool is_ip_literal(const std::string& host) {
    in6_addr buf{};
    return ::inet_pton(AF_INET, host.c_str(), &buf) == 1 || ::inet_pton(AF_INET6, host.c_str(), &buf) == 1;
}

std::string strip_brackets(const std::string& host) {
    if (host.size() >= 2 && host.front() == '[' && host.back() == ']') {
        return host.substr(1, host.size() - 2);
    }
    return host;
}

// Drives an SSL call that may need to wait on the socket.
template <typename Fn>
int ssl_io(SSL* ssl, int fd, Deadline deadline, const char* what, Fn&& fn) {
    while (true) {
        ERR_clear_error();
        const int rc = fn();
        if (rc > 0) {
            return rc;
        }
        const int err = SSL_get_error(ssl, rc);
        if (err == SSL_ERROR_WANT_READ) {
            if (!wait_fd(fd, POLLIN, deadline)) {
                throw TransportError(std::string(what) + ": timed out");
            }
        } else if (err == SSL_ERROR_WANT_WRITE) {
            if (!wait_fd(fd, POLLOUT, deadline)) {
                throw TransportError(std::string(what) + ": timed out");
            }
        } else if (err == SSL_ERROR_ZERO_RETURN) {
            return 0;
        } else if (err == SSL_ERROR_SYSCALL && rc == 0) {
            return 0;  // peer closed without close_notify
        } else {
            throw TransportError(std::string(what) + ": " + openssl_error());
        }
    }
}

}  // namespace

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

// --- TLS contexts ---------------------------------------------------------

TlsContext::~TlsContext() { SSL_CTX_free(ctx_); }

std::shared_ptr<TlsContext> TlsContext::client(bool verify_peer) {
    SSL_CTX* ctx = SSL_CTX_new(TLS_client_method());
    if (!ctx) {
        throw TransportError("SSL_CTX_new: " + openssl_error());
    }
    SSL_CTX_set_min_proto_version(ctx, TLS1_2_VERSION);
    if (verify_peer) {
        SSL_CTX_set_verify(ctx, SSL_VERIFY_PEER, nullptr);
        SSL_CTX_set_default_verify_paths(ctx);
    } else {
        SSL_CTX_set_verify(ctx, SSL_VERIFY_NONE, nullptr);
    }
    return std::shared_ptr<TlsContext>(new TlsContext(ctx, verify_peer));
}

std::shared_ptr<TlsContext> TlsContext::self_signed_server() {
    std::unique_ptr<EVP_PKEY, decltype(&EVP_PKEY_free)> key(EVP_EC_gen("P-256"), EVP_PKEY_free);
    if (!key) {
        throw TransportError("key generation failed: " + openssl_error());
    }
    std::unique_ptr<X509, decltype(&X509_free)> cert(X509_new(), X509_free);
    X509_set_version(cert.get(), 2);
    ASN1_INTEGER_set(X509_get_serialNumber(cert.get()), 1);
    X509_gmtime_adj(X509_getm_notBefore(cert.get()), -3600);
    X509_gmtime_adj(X509_getm_notAfter(cert.get()), 7L * 24 * 3600);
    X509_set_pubkey(cert.get(), key.get());
    X509_NAME* name = X509_get_subject_name(cert.get());
    X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC, reinterpret_cast<const unsigned char*>("localhost"), -1, -1, 0);
    X509_set_issuer_name(cert.get(), name);

    X509V3_CTX v3{};
    X509V3_set_ctx_nodb(&v3);
    X509V3_set_ctx(&v3, cert.get(), cert.get(), nullptr, nullptr, 0);
    if (X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &v3, NID_subject_alt_name,
                                                  "DNS:localhost,IP:127.0.0.1,IP:::1")) {
        X509_add_ext(cert.get(), ext, -1);
        X509_EXTENSION_free(ext);
    }
    if (X509_sign(cert.get(), key.get(), EVP_sha256()) == 0) {
        throw TransportError("certificate signing failed: " + openssl_error());
    }

    SSL_CTX* ctx = SSL_CTX_new(TLS_server_method());
    if (!ctx) {
        throw TransportError("SSL_CTX_new: " + openssl_error());
    }
    if (SSL_CTX_use_certificate(ctx, cert.get()) != 1 || SSL_CTX_use_PrivateKey(ctx, key.get()) != 1) {
        SSL_CTX_free(ctx);
        throw TransportError("loading generated certificate: " + openssl_error());
    }
    return std::shared_ptr<TlsContext>(new TlsContext(ctx, false));
}

std::shared_ptr<TlsContext> TlsContext::server_from_files(const std::string& cert_pem, const std::string& key_pem) {
    SSL_CTX* ctx = SSL_CTX_new(TLS_server_method());
    if (!ctx) {
        throw TransportError("SSL_CTX_new: " + openssl_error());
    }
    if (SSL_CTX_use_certificate_chain_file(ctx, cert_pem.c_str()) != 1 ||
        SSL_CTX_use_PrivateKey_file(ctx, key_pem.c_str(), SSL_FILETYPE_PEM) != 1) {
        SSL_CTX_free(ctx);
        throw TransportError("TLS material missing or unreadable: " + openssl_error());
    }
    return std::shared_ptr<TlsContext>(new TlsContext(ctx, false));
}

// --- Stream ---------------------------------------------------------------

Stream::Stream(int fd, SSL* ssl, std::shared_ptr<TlsContext> ctx) : fd_(fd), ssl_(ssl), ctx_(std::move(ctx)) {}

Stream::~Stream() { close(); }

Stream::Stream(Stream&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), ssl_(std::exchange(other.ssl_, nullptr)), ctx_(std::move(other.ctx_)) {}

Stream& Stream::operator=(Stream&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = std::exchange(other.fd_, -1);
        ssl_ = std::exchange(other.ssl_, nullptr);
        ctx_ = std::move(other.ctx_);
    }
    return *this;
}

void Stream::close() {
    if (ssl_) {
        SSL_shutdown(ssl_);  // best effort close_notify, non-blocking
        SSL_free(ssl_);
        ssl_ = nullptr;
    }
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void Stream::write_all(ByteView data, Deadline deadline) {
    if (fd_ < 0) {
        throw TransportError("write on closed stream");
    }
    std::size_t sent = 0;
    while (sent < data.size()) {
        const ByteView rest = data.subspan(sent);
        if (ssl_) {
            const int n = ssl_io(ssl_, fd_, deadline, "TLS write", [&] {
                return SSL_write(ssl_, rest.data(), static_cast<int>(std::min<std::size_t>(rest.size(), 1 << 30)));
            });
            if (n == 0) {
                throw TransportError("TLS write: connection closed");
            }
            sent += static_cast<std::size_t>(n);
            continue;
        }
        const ssize_t n = ::send(fd_, rest.data(), rest.size(), MSG_NOSIGNAL);
        if (n > 0) {
            sent += static_cast<std::size_t>(n);
        } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            if (!wait_fd(fd_, POLLOUT, deadline)) {
                throw TransportError("write: timed out");
            }
        } else if (n < 0 && errno == EINTR) {
            continue;
        } else {
            throw TransportError("write: " + errno_text(errno));
        }
    }
}

bool Stream::wait_readable(Deadline deadline) {
    if (fd_ < 0) {
        return false;
    }
    if (ssl_ && SSL_pending(ssl_) > 0) {
        return true;
    }
    return wait_fd(fd_, POLLIN, deadline);
}

std::size_t Stream::read_some(std::span<std::uint8_t> out, Deadline deadline) {
    if (fd_ < 0) {
        throw TransportError("read on closed stream");
    }
    if (ssl_) {
        const int n = ssl_io(ssl_, fd_, deadline, "TLS read", [&] {
            return SSL_read(ssl_, out.data(), static_cast<int>(std::min<std::size_t>(out.size(), 1 << 30)));
        });
        return static_cast<std::size_t>(n);
    }
    while (true) {
        const ssize_t n = ::recv(fd_, out.data(), out.size(), 0);
        if (n >= 0) {
            return static_cast<std::size_t>(n);
        }
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
            if (!wait_fd(fd_, POLLIN, deadline)) {
                throw TransportError("read: timed out");
            }
        } else if (errno != EINTR) {
            if (errno == ECONNRESET) {
                return 0;
            }
            throw TransportError("read: " + errno_text(errno));
        }
    }
}

// --- Client connect -------------------------------------------------------

Stream connect(const std::string& host, std::uint16_t port, const ConnectOptions& options) {
    ignore_sigpipe();
    const Deadline deadline = deadline_in(options.timeout);
    const std::string bare_host = strip_brackets(host);

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    const int gai = ::getaddrinfo(bare_host.c_str(), std::to_string(port).c_str(), &hints, &found);
    if (gai != 0) {
        throw TransportError("resolve " + host + ": " + gai_strerror(gai));
    }
    std::unique_ptr<addrinfo, decltype(&freeaddrinfo)> guard(found, freeaddrinfo);

    std::string last_error = "no addresses";
    int fd = -1;
    for (addrinfo* ai = found; ai != nullptr && fd < 0; ai = ai->ai_next) {
        const int s = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (s < 0) {
            last_error = errno_text(errno);
            continue;
        }
        set_nonblocking(s);
        if (::connect(s, ai->ai_addr, ai->ai_addrlen) == 0) {
            fd = s;
            break;
        }
        if (errno != EINPROGRESS) {
            last_error = errno_text(errno);
            ::close(s);
            continue;
        }
        if (!wait_fd(s, POLLOUT, deadline)) {
            last_error = "connect timed out";
            ::close(s);
            continue;
        }
        int so_error = 0;
        socklen_t len = sizeof so_error;
        ::getsockopt(s, SOL_SOCKET, SO_ERROR, &so_error, &len);
        if (so_error != 0) {
            last_error = errno_text(so_error);
            ::close(s);
            continue;
        }
        fd = s;
    }
    if (fd < 0) {
        throw TransportError("connect " + host + ":" + std::to_string(port) + ": " + last_error);
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);

    if (!options.tls) {
        return Stream(fd, nullptr, nullptr);
    }

    auto ctx = options.tls_context ? options.tls_context : TlsContext::client(true);
    SSL* ssl = SSL_new(ctx->get());
    if (!ssl) {
        ::close(fd);
        throw TransportError("SSL_new: " + openssl_error());
    }
    Stream stream(fd, ssl, ctx);
    SSL_set_fd(ssl, fd);
    if (!is_ip_literal(bare_host)) {
        SSL_set_tlsext_host_name(ssl, bare_host.c_str());
    }
    if (ctx->verifies_peer()) {
        if (is_ip_literal(bare_host)) {
            X509_VERIFY_PARAM_set1_ip_asc(SSL_get0_param(ssl), bare_host.c_str());
        } else {
            SSL_set1_host(ssl, bare_host.c_str());
        }
    }
    try {
        if (ssl_io(ssl, fd, deadline, "TLS handshake", [&] { return SSL_connect(ssl); }) == 0) {
            throw TransportError("TLS handshake: connection closed");
        }
    } catch (const TransportError& e) {
        const long verify = SSL_get_verify_result(ssl);
        if (verify != X509_V_OK) {
            throw TransportError(std::string("TLS certificate verification failed: ") +
                                 X509_verify_cert_error_string(verify));
        }
        throw;
    }
    return stream;
}

Stream accept_stream(int fd, const std::shared_ptr<TlsContext>& ctx, Deadline deadline) {
    set_nonblocking(fd);
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    if (!ctx) {
        return Stream(fd, nullptr, nullptr);
    }
    SSL* ssl = SSL_new(ctx->get());
    if (!ssl) {
        ::close(fd);
        throw TransportError("SSL_new: " + openssl_error());
    }
    Stream stream(fd, ssl, ctx);
    SSL_set_fd(ssl, fd);
    if (ssl_io(ssl, fd, deadline, "TLS accept", [&] { return SSL_accept(ssl); }) == 0) {
        throw TransportError("TLS accept: connection closed");
    }
    return stream;
}

// --- Listener -------------------------------------------------------------

Listener::Listener(const std::string& host, std::uint16_t port) : host_(host) {
    ignore_sigpipe();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* found = nullptr;
    const std::string bare = strip_brackets(host);
    const int gai = ::getaddrinfo(bare.empty() ? nullptr : bare.c_str(), std::to_string(port).c_str(), &hints, &found);
    if (gai != 0) {
        throw TransportError("resolve bind address " + host + ": " + gai_strerror(gai));
    }
    std::unique_ptr<addrinfo, decltype(&freeaddrinfo)> guard(found, freeaddrinfo);

    std::string last_error = "no addresses";
    for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
        const int s = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (s < 0) {
            last_error = errno_text(errno);
            continue;
        }
        const int one = 1;
        ::setsockopt(s, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(s, ai->ai_addr, ai->ai_addrlen) != 0 || ::listen(s, 128) != 0) {
            last_error = errno_text(errno);
            ::close(s);
            continue;
        }
        set_nonblocking(s);
        fd_ = s;
        break;
    }
    if (fd_ < 0) {
        throw TransportError("bind " + host + ":" + std::to_string(port) + ": " + last_error);
    }
    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                       : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

Listener::~Listener() { close(); }

void Listener::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

std::optional<int> Listener::accept(std::chrono::milliseconds timeout) {
    if (fd_ < 0) {
        return std::nullopt;
    }
    if (!wait_fd(fd_, POLLIN, deadline_in(timeout))) {
        return std::nullopt;
    }
    const int client = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (client < 0) {
        return std::nullopt;
    }
    return client;
}

}  // namespace wsaudit::net
