#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace divkit {

/// Lowercased word tokens of a text. Word counts everywhere in the toolkit
/// (length parity, decile buckets, lexical metrics) come from this type.
struct TokenizedText {
    std::string source;
    std::vector<std::string> tokens;

    std::size_t word_count() const noexcept { return tokens.size(); }
};

/// Splits on Unicode whitespace, strips leading and trailing punctuation
/// from each piece, lowercases; pieces left empty are dropped.
/// Invalid UTF-8 bytes are kept as-is inside tokens.
TokenizedText tokenize(std::string_view text);

/// Token count of tokenize(text).
std::size_t word_count(std::string_view text);

}  // namespace divkit
