// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include "wsaudit/entropy.hpp"
#include "wsaudit/frame.hpp"
#include "wsaudit/handshake.hpp"
#include "wsaudit/net.hpp"

namespace wsaudit {

struct ClientOptions {
    std::chrono::milliseconds timeout = kDefaultHandshakeTimeout;
    bool verify_tls = true;
    std::shared_ptr<net::TlsContext> tls_context;  // overrides verify_tls when set
    EntropySource* entropy = nullptr;              // nonces and mask keys; system entropy if null
    std::string_view magic = kHandshakeGuid;
};

// One opening handshake as seen on the wire.
struct HandshakeAttempt {
    Nonce nonce = Nonce::from_raw({});
    UpgradeRequest request;
    std::string request_bytes;
    std::string response_bytes;  // status line and headers only
    std::optional<UpgradeResponse> response;
    HandshakeVerdict verdict;
    std::string error;  // unparseable or missing response

    // The server agreed to switch protocols, whether or not its accept token is right.
    bool switched() const { return response && response->is_switch(); }
    int status() const { return response ? response->status : 0; }
    std::string transcript() const { return request_bytes + response_bytes; }
};

struct OpenResult;

// Client end of an upgraded connection. Outgoing frames are always masked.
class WsConnection {
public:
    // Throws TransportError for connect/TLS/timeout failures before a response arrives.
    static OpenResult open(const WsUrl& url, const RequestOptions& request, const ClientOptions& options);

    void send_text(std::string_view text);
    void send_binary(ByteView data);
    void send_frame(Frame frame);

    // Next complete data message, answering pings on the way. nullopt on timeout or close.
    std::optional<Message> receive(std::chrono::milliseconds timeout);
    // Collects messages until the timeout elapses with nothing new or the peer closes.
    std::vector<Message> receive_all(std::chrono::milliseconds quiet);

    const std::optional<CloseInfo>& peer_close() const { return assembler_.close(); }
    // Sends a close frame and waits briefly for the echo.
    void close(std::uint16_t code = 1000);

private:
    WsConnection(net::Stream stream, Bytes leftover, const ClientOptions& options);

    net::Stream stream_;
    FrameDecoder decoder_;
    MessageAssembler assembler_;
    EntropySource* entropy_;
    std::chrono::milliseconds timeout_;
    bool close_sent_ = false;
};

struct OpenResult {
    HandshakeAttempt attempt;
    std::optional<WsConnection> connection;  // set only when the server switched
};

}  // namespace wsaudit
