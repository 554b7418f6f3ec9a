// SPDX-License-Identifier: Apache-2.0
#include "wsaudit/frame.hpp"

#include <algorithm>

#include "wsaudit/errors.hpp"

namespace wsaudit {

std::optional<Opcode> opcode_from_bits(std::uint8_t bits) {
    switch (bits) {
        case 0x0:
        case 0x1:
        case 0x2:
        case 0x8:
        case 0x9:
        case 0xA:
            return static_cast<Opcode>(bits);
        default:
            return std::nullopt;
    }
}

Frame text_frame(std::string_view text, std::optional<MaskKey> mask, bool fin) {
    return Frame{fin, {}, Opcode::text, mask, to_bytes(text)};
}

Frame binary_frame(ByteView data, std::optional<MaskKey> mask, bool fin) {
    return Frame{fin, {}, Opcode::binary, mask, Bytes(data.begin(), data.end())};
}

void apply_mask_inplace(std::span<std::uint8_t> data, const MaskKey& key, std::size_t offset) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] ^= key[(offset + i) & 3];
    }
}

Bytes apply_mask(ByteView payload, const MaskKey& key) {
    Bytes out(payload.begin(), payload.end());
    apply_mask_inplace(out, key);
    return out;
}

Bytes encode_frame(const Frame& frame) {
    if (frame.rsv[0] || frame.rsv[1] || frame.rsv[2]) {
        throw EncodeError("RSV bits must be clear");
    }
    if (is_control(frame.opcode)) {
        if (!frame.fin) {
            throw EncodeError("control frames cannot be fragmented");
        }
        if (frame.payload.size() > kMaxControlPayload) {
            throw EncodeError("control frame payload exceeds 125 bytes");
        }
    }

    const std::size_t len = frame.payload.size();
    Bytes out;
    out.reserve(len + 14);
    out.push_back(static_cast<std::uint8_t>((frame.fin ? 0x80 : 0x00) | static_cast<std::uint8_t>(frame.opcode)));
    const std::uint8_t mask_bit = frame.masked() ? 0x80 : 0x00;
    if (len <= 125) {
        out.push_back(static_cast<std::uint8_t>(mask_bit | len));
    } else if (len <= 0xFFFF) {
        out.push_back(mask_bit | 126);
        out.push_back(static_cast<std::uint8_t>(len >> 8));
        out.push_back(static_cast<std::uint8_t>(len));
    } else {
        out.push_back(mask_bit | 127);
        for (int shift = 56; shift >= 0; shift -= 8) {
            out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(len) >> shift));
        }
    }
    const std::size_t header = out.size();
    if (frame.mask) {
        out.insert(out.end(), frame.mask->begin(), frame.mask->end());
    }
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    if (frame.mask) {
        apply_mask_inplace(std::span(out).subspan(header + 4), *frame.mask);
    }
    return out;
}

DecodeResult decode_frame(ByteView bytes, std::size_t max_payload) {
    if (bytes.size() < 2) {
        return Incomplete{2};
    }
    const std::uint8_t b0 = bytes[0];
    const std::uint8_t b1 = bytes[1];

    Frame frame;
    frame.fin = (b0 & 0x80) != 0;
    frame.rsv = {(b0 & 0x40) != 0, (b0 & 0x20) != 0, (b0 & 0x10) != 0};
    if (frame.rsv[0] || frame.rsv[1] || frame.rsv[2]) {
        throw ProtocolError("nonzero RSV bits without a negotiated extension");
    }
    const auto op = opcode_from_bits(b0 & 0x0F);
    if (!op) {
        throw ProtocolError("reserved opcode 0x" + std::string(1, "0123456789ABCDEF"[b0 & 0x0F]));
    }
    frame.opcode = *op;

    const bool masked = (b1 & 0x80) != 0;
    const std::uint8_t len7 = b1 & 0x7F;
    if (is_control(frame.opcode)) {
        if (!frame.fin) {
            throw ProtocolError("fragmented control frame");
        }
        if (len7 > kMaxControlPayload) {
            throw ProtocolError("control frame payload exceeds 125 bytes");
        }
    }

    std::size_t pos = 2;
    std::uint64_t len = len7;
    if (len7 == 126) {
        if (bytes.size() < pos + 2) {
            return Incomplete{pos + 2};
        }
        len = (std::uint64_t{bytes[2]} << 8) | bytes[3];
        pos += 2;
    } else if (len7 == 127) {
        if (bytes.size() < pos + 8) {
            return Incomplete{pos + 8};
        }
        len = 0;
        for (std::size_t i = 0; i < 8; ++i) {
            len = (len << 8) | bytes[pos + i];
        }
        if (len >> 63) {
            throw ProtocolError("64-bit payload length with most significant bit set");
        }
        pos += 8;
    }
    if (len > max_payload) {
        throw ProtocolError("payload length " + std::to_string(len) + " exceeds limit " + std::to_string(max_payload));
    }

    if (masked) {
        if (bytes.size() < pos + 4) {
            return Incomplete{pos + 4};
        }
        MaskKey key{};
        std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), 4, key.begin());
        frame.mask = key;
        pos += 4;
    }

    const std::size_t total = pos + static_cast<std::size_t>(len);
    if (bytes.size() < total) {
        return Incomplete{total};
    }
    frame.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(total));
    if (frame.mask) {
        apply_mask_inplace(frame.payload, *frame.mask);
    }
    return Decoded{std::move(frame), total};
}

void FrameDecoder::feed(ByteView bytes) {
    if (start_ > 0 && start_ == buffer_.size()) {
        buffer_.clear();
        start_ = 0;
    }
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameDecoder::next() {
    auto result = decode_frame(ByteView(buffer_).subspan(start_), max_payload_);
    auto* decoded = std::get_if<Decoded>(&result);
    if (!decoded) {
        return std::nullopt;
    }
    start_ += decoded->consumed;
    if (start_ > 64 * 1024 && start_ * 2 > buffer_.size()) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(start_));
        start_ = 0;
    }
    return std::move(decoded->frame);
}

bool is_valid_utf8(ByteView data) {
    std::size_t i = 0;
    while (i < data.size()) {
        const std::uint8_t c = data[i];
        if (c < 0x80) {
            ++i;
            continue;
        }
        std::size_t n = 0;
        std::uint32_t cp = 0;
        std::uint32_t min = 0;
        if ((c & 0xE0) == 0xC0) {
            n = 1, cp = c & 0x1F, min = 0x80;
        } else if ((c & 0xF0) == 0xE0) {
            n = 2, cp = c & 0x0F, min = 0x800;
        } else if ((c & 0xF8) == 0xF0) {
            n = 3, cp = c & 0x07, min = 0x10000;
        } else {
            return false;
        }
        if (i + n >= data.size()) {
            return false;
        }
        for (std::size_t k = 1; k <= n; ++k) {
            const std::uint8_t cc = data[i + k];
            if ((cc & 0xC0) != 0x80) {
                return false;
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += n + 1;
    }
    return true;
}

CloseInfo parse_close_payload(ByteView payload) {
    CloseInfo info;
    if (payload.empty()) {
        return info;
    }
    if (payload.size() == 1) {
        throw ProtocolError("close payload of length 1");
    }
    info.code = static_cast<std::uint16_t>((payload[0] << 8) | payload[1]);
    const ByteView reason = payload.subspan(2);
    if (!is_valid_utf8(reason)) {
        throw ProtocolError("close reason is not valid UTF-8");
    }
    info.reason = to_string(reason);
    return info;
}

Bytes close_payload(const CloseInfo& info) {
    Bytes out;
    if (!info.code) {
        return out;
    }
    out.push_back(static_cast<std::uint8_t>(*info.code >> 8));
    out.push_back(static_cast<std::uint8_t>(*info.code));
    out.insert(out.end(), info.reason.begin(), info.reason.end());
    return out;
}

std::optional<Message> MessageAssembler::push(const Frame& frame) {
    if (close_) {
        return std::nullopt;
    }
    switch (frame.opcode) {
        case Opcode::close:
            close_ = parse_close_payload(frame.payload);
            return std::nullopt;
        case Opcode::ping:
            pings_.push_back(frame.payload);
            return std::nullopt;
        case Opcode::pong:
            return std::nullopt;
        case Opcode::continuation:
            if (!open_) {
                throw ProtocolError("continuation frame without an open message");
            }
            open_->data.insert(open_->data.end(), frame.payload.begin(), frame.payload.end());
            break;
        case Opcode::text:
        case Opcode::binary:
            if (open_) {
                throw ProtocolError("new data frame while a fragmented message is open");
            }
            open_ = Message{frame.opcode == Opcode::text ? MessageKind::text : MessageKind::binary, frame.payload};
            break;
    }
    if (!frame.fin) {
        return std::nullopt;
    }
    Message done = std::move(*open_);
    open_.reset();
    if (done.kind == MessageKind::text && !is_valid_utf8(done.data)) {
        throw ProtocolError("text message is not valid UTF-8");
    }
    return done;
}

AssembledStream assemble_messages(std::span<const Frame> frames) {
    MessageAssembler assembler;
    AssembledStream out;
    for (const auto& f : frames) {
        if (auto msg = assembler.push(f)) {
            out.messages.push_back(std::move(*msg));
        }
        if (assembler.closed()) {
            break;
        }
    }
    out.close = assembler.close();
    out.pings = assembler.pings();
    return out;
}

}  // namespace wsaudit
