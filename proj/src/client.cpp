// SPDX-License-Identifier: Apache-2.0
#include "wsaudit/client.hpp"

#include <array>

#include "wsaudit/errors.hpp"

namespace wsaudit {

namespace {

constexpr std::size_t kMaxHeadBytes = 16 * 1024;

EntropySource& pick(EntropySource* e) { return e ? *e : system_entropy(); }

}  // namespace

WsConnection::WsConnection(net::Stream stream, Bytes leftover, const ClientOptions& options)
    : stream_(std::move(stream)), entropy_(options.entropy), timeout_(options.timeout) {
    decoder_.feed(leftover);
}

OpenResult WsConnection::open(const WsUrl& url, const RequestOptions& request, const ClientOptions& options) {
    OpenResult out;
    HandshakeAttempt& attempt = out.attempt;
    attempt.nonce = generate_nonce(pick(options.entropy));
    attempt.request = build_upgrade_request(url, request, attempt.nonce);
    attempt.request_bytes = attempt.request.serialize();

    net::ConnectOptions copts;
    copts.tls = url.secure;
    copts.timeout = options.timeout;
    copts.tls_context = options.tls_context;
    if (url.secure && !copts.tls_context) {
        copts.tls_context = net::TlsContext::client(options.verify_tls);
    }
    net::Stream stream = net::connect(url.host, url.port, copts);
    const net::Deadline deadline = net::deadline_in(options.timeout);
    stream.write_all(as_bytes(attempt.request_bytes), deadline);

    std::string buffer;
    std::array<std::uint8_t, 4096> chunk{};
    std::size_t head_end = std::string::npos;
    while (head_end == std::string::npos) {
        if (buffer.size() > kMaxHeadBytes) {
            attempt.error = "response head exceeds " + std::to_string(kMaxHeadBytes) + " bytes";
            attempt.response_bytes = buffer.substr(0, kMaxHeadBytes);
            return out;
        }
        const std::size_t n = stream.read_some(chunk, deadline);
        if (n == 0) {
            attempt.response_bytes = buffer;
            attempt.error = buffer.empty() ? "connection closed before any response" : "connection closed mid-response";
            return out;
        }
        buffer.append(reinterpret_cast<const char*>(chunk.data()), n);
        head_end = find_head_end(buffer);
    }
    attempt.response_bytes = buffer.substr(0, head_end);
    try {
        attempt.response = parse_upgrade_response(attempt.response_bytes);
    } catch (const ParseError& e) {
        attempt.error = e.what();
        return out;
    }
    attempt.verdict = validate_upgrade_response(*attempt.response, attempt.nonce, options.magic);
    if (attempt.switched()) {
        Bytes leftover(buffer.begin() + static_cast<std::ptrdiff_t>(head_end), buffer.end());
        out.connection.emplace(WsConnection(std::move(stream), std::move(leftover), options));
    }
    return out;
}

void WsConnection::send_frame(Frame frame) {
    MaskKey key{};
    pick(entropy_).fill(key);
    frame.mask = key;
    stream_.write_all(encode_frame(frame), net::deadline_in(timeout_));
}

void WsConnection::send_text(std::string_view text) { send_frame(text_frame(text)); }

void WsConnection::send_binary(ByteView data) { send_frame(binary_frame(data)); }

std::optional<Message> WsConnection::receive(std::chrono::milliseconds timeout) {
    const net::Deadline deadline = net::deadline_in(timeout);
    std::array<std::uint8_t, 8192> chunk{};
    while (!assembler_.closed()) {
        while (auto frame = decoder_.next()) {
            const std::size_t pings_before = assembler_.pings().size();
            auto msg = assembler_.push(*frame);
            if (assembler_.pings().size() > pings_before) {
                send_frame(Frame{true, {}, Opcode::pong, std::nullopt, assembler_.pings().back()});
            }
            if (assembler_.closed()) {
                if (!close_sent_) {
                    close_sent_ = true;
                    try {
                        send_frame(Frame{true, {}, Opcode::close, std::nullopt, close_payload(*assembler_.close())});
                    } catch (const TransportError&) {
                    }
                }
                return std::nullopt;
            }
            if (msg) {
                return msg;
            }
        }
        if (!stream_.is_open() || !stream_.wait_readable(deadline)) {
            return std::nullopt;
        }
        std::size_t n = 0;
        try {
            n = stream_.read_some(chunk, deadline);
        } catch (const TransportError&) {
            return std::nullopt;
        }
        if (n == 0) {
            stream_.close();
            return std::nullopt;
        }
        decoder_.feed(ByteView(chunk.data(), n));
    }
    return std::nullopt;
}

std::vector<Message> WsConnection::receive_all(std::chrono::milliseconds quiet) {
    std::vector<Message> out;
    while (auto msg = receive(quiet)) {
        out.push_back(std::move(*msg));
    }
    return out;
}

void WsConnection::close(std::uint16_t code) {
    if (!stream_.is_open()) {
        return;
    }
    if (!close_sent_) {
        close_sent_ = true;
        try {
            send_frame(Frame{true, {}, Opcode::close, std::nullopt, close_payload(CloseInfo{code, ""})});
            // Drain until the echo close arrives or the short wait expires.
            while (!assembler_.closed() && receive(std::chrono::milliseconds(200))) {
            }
        } catch (const std::exception&) {
        }
    }
    stream_.close();
}

}  // namespace wsaudit
