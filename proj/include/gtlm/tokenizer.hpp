#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gtlm {

// Byte-level tokenizer: ids 0..255 are raw bytes, 256 is a BOS marker
// prepended to every node's token sequence. Reversible by construction.
struct Tokenizer {
    static constexpr int kBos = 256;
    static constexpr int kVocabSize = 257;

    static std::vector<int> encode(const std::string& text) {
        std::vector<int> ids;
        ids.reserve(text.size());
        for (unsigned char c : text) ids.push_back(static_cast<int>(c));
        return ids;
    }

    static std::string decode(const std::vector<int>& ids) {
        std::string out;
        out.reserve(ids.size());
        for (int id : ids) {
            if (id >= 0 && id < 256) out.push_back(static_cast<char>(id));
        }
        return out;
    }
};

}  // namespace gtlm
