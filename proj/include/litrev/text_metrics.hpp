#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace litrev {

/// Lowercased alphanumeric tokens derived deterministically from input text.
struct TokenSequence {
    std::vector<std::string> tokens;

    bool empty() const { return tokens.empty(); }
    std::size_t size() const { return tokens.size(); }
};

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Which component of the ROUGE-1 score is used as the draft-convergence
/// similarity. F1 is the default; recall is kept as a selectable variant.
enum class RougeVariant { f1, recall };

RougeVariant rouge_variant_from_string(std::string_view name);
std::string to_string(RougeVariant variant);

/// Lowercases and splits on every character that is not a letter or digit.
/// Unicode-aware: input is decoded as UTF-8 and classified against a compact
/// table of letter/digit ranges (major scripts); malformed bytes act as
/// separators. Case mapping covers ASCII, Latin-1 and the Greek/Cyrillic
/// alphabets; other code points pass through unchanged.
TokenSequence tokenize(std::string_view text);

/// Number of tokens produced by tokenize(); the complexity measure for
/// outline directions.
std::size_t word_count(std::string_view text);

/// Unigram overlap with multiplicity (clipped counts). Empty candidate or
/// reference yields all zeros.
RougeScore rouge1(std::string_view candidate, std::string_view reference);
RougeScore rouge1_tokens(const TokenSequence& candidate, const TokenSequence& reference);

double rouge_similarity(std::string_view candidate, std::string_view reference,
                        RougeVariant variant);

}  // namespace litrev
