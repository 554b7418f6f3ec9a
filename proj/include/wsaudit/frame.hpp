// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "wsaudit/bytes.hpp"

namespace wsaudit {

enum class Opcode : std::uint8_t {
    continuation = 0x0,
    text = 0x1,
    binary = 0x2,
    close = 0x8,
    ping = 0x9,
    pong = 0xA,
};

// nullopt for the reserved values 0x3-0x7 and 0xB-0xF.
std::optional<Opcode> opcode_from_bits(std::uint8_t bits);
inline bool is_control(Opcode op) { return static_cast<std::uint8_t>(op) >= 0x8; }

using MaskKey = std::array<std::uint8_t, 4>;

inline constexpr std::size_t kMaxControlPayload = 125;
inline constexpr std::size_t kDefaultMaxPayload = 16 * 1024 * 1024;

struct Frame {
    bool fin = true;
    std::array<bool, 3> rsv{};
    Opcode opcode = Opcode::text;
    std::optional<MaskKey> mask;  // present iff the frame is masked
    Bytes payload;                // always unmasked in memory

    bool masked() const { return mask.has_value(); }

    friend bool operator==(const Frame&, const Frame&) = default;
};

Frame text_frame(std::string_view text, std::optional<MaskKey> mask = std::nullopt, bool fin = true);
Frame binary_frame(ByteView data, std::optional<MaskKey> mask = std::nullopt, bool fin = true);

// XOR with key[(offset + i) % 4].
void apply_mask_inplace(std::span<std::uint8_t> data, const MaskKey& key, std::size_t offset = 0);
Bytes apply_mask(ByteView payload, const MaskKey& key);

// Smallest length encoding; masked frames carry XOR-masked payload on the wire.
// Throws EncodeError when the frame breaks the control-frame or RSV rules.
Bytes encode_frame(const Frame& frame);

struct Decoded {
    Frame frame;
    std::size_t consumed = 0;
};

struct Incomplete {
    std::size_t need = 0;  // lower bound on total bytes required
};

using DecodeResult = std::variant<Decoded, Incomplete>;

// Throws ProtocolError for reserved opcodes, RSV bits, bad control frames, 64-bit lengths
// with the top bit set and payloads above max_payload.
DecodeResult decode_frame(ByteView bytes, std::size_t max_payload = kDefaultMaxPayload);

// Buffers a byte stream and yields complete frames in order.
class FrameDecoder {
public:
    explicit FrameDecoder(std::size_t max_payload = kDefaultMaxPayload) : max_payload_(max_payload) {}

    void feed(ByteView bytes);
    std::optional<Frame> next();
    std::size_t buffered() const { return buffer_.size() - start_; }

private:
    std::size_t max_payload_;
    Bytes buffer_;
    std::size_t start_ = 0;
};

bool is_valid_utf8(ByteView data);

enum class MessageKind { text, binary };

struct Message {
    MessageKind kind = MessageKind::text;
    Bytes data;

    friend bool operator==(const Message&, const Message&) = default;
};

struct CloseInfo {
    std::optional<std::uint16_t> code;
    std::string reason;

    friend bool operator==(const CloseInfo&, const CloseInfo&) = default;
};

// Throws ProtocolError on a 1-byte payload or non-UTF-8 reason.
CloseInfo parse_close_payload(ByteView payload);
Bytes close_payload(const CloseInfo& info);

// Reassembles fragmented data frames. One instance per direction of a connection.
class MessageAssembler {
public:
    // Returns the message completed by this frame, if any. Control frames never complete
    // a message; pings are recorded, a close is recorded and ends the stream.
    std::optional<Message> push(const Frame& frame);

    bool closed() const { return close_.has_value(); }
    const std::optional<CloseInfo>& close() const { return close_; }
    const std::vector<Bytes>& pings() const { return pings_; }
    bool in_message() const { return open_.has_value(); }

private:
    std::optional<Message> open_;
    std::optional<CloseInfo> close_;
    std::vector<Bytes> pings_;
};

struct AssembledStream {
    std::vector<Message> messages;
    std::optional<CloseInfo> close;
    std::vector<Bytes> pings;
};

// Frames after a close are ignored.
AssembledStream assemble_messages(std::span<const Frame> frames);

}  // namespace wsaudit
