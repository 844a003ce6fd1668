#include "divkit/tokenize.hpp"

#include <cctype>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

namespace divkit {

namespace {

struct CodePoint {
    UChar32 cp;       // negative for an invalid byte
    std::size_t begin;
    std::size_t end;
};

std::vector<CodePoint> decode(std::string_view s) {
    std::vector<CodePoint> out;
    out.reserve(s.size());
    const auto* p = reinterpret_cast<const uint8_t*>(s.data());
    const auto len = static_cast<int32_t>(s.size());
    int32_t i = 0;
    while (i < len) {
        const int32_t start = i;
        UChar32 c;
        U8_NEXT(p, i, len, c);
        out.push_back({c, static_cast<std::size_t>(start), static_cast<std::size_t>(i)});
    }
    return out;
}

bool is_space(UChar32 c) { return c >= 0 && u_isUWhiteSpace(c); }

// Unicode general category P* plus the ASCII punctuation set (which also
// covers symbols such as $ + < = > ^ ` | ~).
bool is_punct(UChar32 c) {
    if (c < 0) return false;
    if (c < 0x80) return std::ispunct(static_cast<int>(c)) != 0;
    return u_ispunct(c);
}

void append_utf8(std::string& out, UChar32 c) {
    char buf[U8_MAX_LENGTH];
    int32_t n = 0;
    UBool err = false;
    U8_APPEND(reinterpret_cast<uint8_t*>(buf), n, U8_MAX_LENGTH, c, err);
    if (!err) out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace

TokenizedText tokenize(std::string_view text) {
    TokenizedText result;
    result.source = std::string(text);
    const auto cps = decode(text);
    std::size_t i = 0;
    while (i < cps.size()) {
        while (i < cps.size() && is_space(cps[i].cp)) ++i;
        std::size_t j = i;
        while (j < cps.size() && !is_space(cps[j].cp)) ++j;
        std::size_t lo = i;
        std::size_t hi = j;
        while (lo < hi && is_punct(cps[lo].cp)) ++lo;
        while (hi > lo && is_punct(cps[hi - 1].cp)) --hi;
        if (lo < hi) {
            std::string tok;
            for (std::size_t k = lo; k < hi; ++k) {
                if (cps[k].cp < 0) {
                    tok.append(text.substr(cps[k].begin, cps[k].end - cps[k].begin));
                } else {
                    append_utf8(tok, u_tolower(cps[k].cp));
                }
            }
            result.tokens.push_back(std::move(tok));
        }
        i = j;
    }
    return result;
}

std::size_t word_count(std::string_view text) { return tokenize(text).word_count(); }

}  // namespace divkit
