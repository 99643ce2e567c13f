#include "litrev/text_metrics.hpp"

#include <algorithm>
#include <array>
#include <unordered_map>

#include "litrev/common.hpp"

namespace litrev {

namespace {

struct CpRange {
    char32_t lo;
    char32_t hi;
};

// Letter/digit ranges for the scripts that show up in scholarly search
// results. Not exhaustive Unicode, but deterministic and locale-free.
constexpr std::array<CpRange, 30> kWordRanges = {{
    {U'0', U'9'},
    {U'A', U'Z'},
    {U'a', U'z'},
    {0x00C0, 0x00D6},  // Latin-1 letters (excludes × and ÷)
    {0x00D8, 0x00F6},
    {0x00F8, 0x02AF},  // Latin Extended-A/B, IPA
    {0x0370, 0x0373},
    {0x0376, 0x0377},
    {0x037B, 0x037D},
    {0x0386, 0x0386},
    {0x0388, 0x03FF},  // Greek
    {0x0400, 0x04FF},  // Cyrillic
    {0x0530, 0x058F},  // Armenian
    {0x05D0, 0x05EA},  // Hebrew
    {0x0620, 0x064A},  // Arabic letters
    {0x0660, 0x0669},  // Arabic-Indic digits
    {0x0900, 0x097F},  // Devanagari
    {0x0966, 0x096F},
    {0x0E01, 0x0E3A},  // Thai
    {0x0E40, 0x0E4E},
    {0x0E50, 0x0E59},
    {0x1E00, 0x1FFF},  // Latin Extended Additional, Greek Extended
    {0x3040, 0x309F},  // Hiragana
    {0x30A0, 0x30FF},  // Katakana
    {0x3400, 0x4DBF},  // CJK Extension A
    {0x4E00, 0x9FFF},  // CJK Unified
    {0xAC00, 0xD7A3},  // Hangul syllables
    {0xF900, 0xFAFF},  // CJK Compatibility
    {0xFF10, 0xFF19},  // Fullwidth digits
    {0xFF21, 0xFF5A},  // Fullwidth Latin
}};

bool is_word_cp(char32_t cp) {
    for (const auto& r : kWordRanges) {
        if (cp >= r.lo && cp <= r.hi) return true;
    }
    return false;
}

char32_t to_lower_cp(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') return cp + 32;
    if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 32;  // Latin-1
    if (cp >= 0x0391 && cp <= 0x03A9 && cp != 0x03A2) return cp + 32;  // Greek
    if (cp >= 0x0410 && cp <= 0x042F) return cp + 32;                  // Cyrillic А-Я
    if (cp >= 0x0400 && cp <= 0x040F) return cp + 80;                  // Cyrillic Ѐ-Џ
    if (cp >= 0x0100 && cp <= 0x017F) {                                // Latin Extended-A pairs
        if (cp % 2 == 0 && cp <= 0x0136) return cp + 1;
        if (cp >= 0x0139 && cp <= 0x0147 && cp % 2 == 1) return cp + 1;
        if (cp >= 0x014A && cp <= 0x0176 && cp % 2 == 0) return cp + 1;
    }
    if (cp >= 0xFF21 && cp <= 0xFF3A) return cp + 32;  // Fullwidth A-Z
    return cp;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

// Decodes one UTF-8 code point starting at `i`; advances `i`. Malformed
// sequences decode to U+FFFD and consume a single byte.
char32_t next_cp(std::string_view text, size_t& i) {
    unsigned char b0 = static_cast<unsigned char>(text[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int extra = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        extra = 1;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        extra = 2;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        extra = 3;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + static_cast<size_t>(extra) >= text.size()) {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k <= extra; ++k) {
        unsigned char b = static_cast<unsigned char>(text[i + static_cast<size_t>(k)]);
        if ((b & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    i += static_cast<size_t>(extra) + 1;
    return cp;
}

}  // namespace

RougeVariant rouge_variant_from_string(std::string_view name) {
    std::string n = to_lower_ascii(name);
    if (n == "f1") return RougeVariant::f1;
    if (n == "recall") return RougeVariant::recall;
    throw Error("unknown rouge variant: " + std::string(name));
}

std::string to_string(RougeVariant variant) {
    return variant == RougeVariant::f1 ? "f1" : "recall";
}

TokenSequence tokenize(std::string_view text) {
    TokenSequence seq;
    std::string current;
    size_t i = 0;
    while (i < text.size()) {
        char32_t cp = next_cp(text, i);
        if (is_word_cp(cp)) {
            append_utf8(current, to_lower_cp(cp));
        } else if (!current.empty()) {
            seq.tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) seq.tokens.push_back(std::move(current));
    return seq;
}

std::size_t word_count(std::string_view text) {
    return tokenize(text).tokens.size();
}

RougeScore rouge1_tokens(const TokenSequence& candidate, const TokenSequence& reference) {
    RougeScore score;
    if (candidate.empty() || reference.empty()) return score;

    std::unordered_map<std::string, long> ref_counts;
    for (const auto& t : reference.tokens) ++ref_counts[t];

    long overlap = 0;
    for (const auto& t : candidate.tokens) {
        auto it = ref_counts.find(t);
        if (it != ref_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }

    score.precision = static_cast<double>(overlap) / static_cast<double>(candidate.size());
    score.recall = static_cast<double>(overlap) / static_cast<double>(reference.size());
    if (score.precision + score.recall > 0.0) {
        score.f1 = 2.0 * score.precision * score.recall / (score.precision + score.recall);
    }
    return score;
}

RougeScore rouge1(std::string_view candidate, std::string_view reference) {
    return rouge1_tokens(tokenize(candidate), tokenize(reference));
}

double rouge_similarity(std::string_view candidate, std::string_view reference,
                        RougeVariant variant) {
    RougeScore s = rouge1(candidate, reference);
    return variant == RougeVariant::f1 ? s.f1 : s.recall;
}

}  // namespace litrev
