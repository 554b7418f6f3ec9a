// SPDX-License-Identifier: Apache-2.0
#include "wsaudit/bytes.hpp"

#include <openssl/evp.h>

#include "wsaudit/errors.hpp"

namespace wsaudit {

std::string base64_encode(ByteView data) {
    std::string out(4 * ((data.size() + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                  static_cast<int>(data.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

Bytes base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) {
        throw InputError("base64: length not a multiple of 4");
    }
    std::size_t pad = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        const bool alnum = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
        if (alnum || c == '+' || c == '/') {
            if (pad != 0) {
                throw InputError("base64: data after padding");
            }
        } else if (c == '=' && i + 2 >= text.size()) {
            ++pad;
        } else {
            throw InputError("base64: invalid character");
        }
    }
    Bytes out(3 * (text.size() / 4));
    if (text.empty()) {
        return out;
    }
    // EVP_DecodeBlock keeps the zero bytes produced by padding; trim them here.
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) {
        throw InputError("base64: decode failed");
    }
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

}  // namespace wsaudit
