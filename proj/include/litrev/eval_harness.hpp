#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "litrev/domain.hpp"
#include "litrev/llm_gateway.hpp"
#include "litrev/prompt_library.hpp"

namespace litrev {

enum class Verdict { supported, unsupported, unjudged };

std::string to_string(Verdict v);

struct Claim {
    std::string text;
    std::vector<std::string> cited_keys;  // resolved in-text keys, in order
};

struct ClaimExtraction {
    std::vector<Claim> claims;                  // citation-bearing sentences
    std::vector<std::string> uncited_sentences; // reported, not scored
};

struct ClaimJudgment {
    Claim claim;
    std::vector<Verdict> citation_verdicts;  // one per cited key
    Verdict statement_verdict = Verdict::unjudged;
};

struct EvalCounts {
    int total_statements = 0;
    int supported_statements = 0;
    int unjudged_statements = 0;
    int total_citations = 0;
    int supporting_citations = 0;
    int unjudged_citations = 0;
};

struct EvalReport {
    double citation_recall = 0.0;     // percent
    double citation_precision = 0.0;  // percent
    double coverage = 0.0;            // 1..5, fractional allowed, never rounded
    double structure = 0.0;
    double relevance = 0.0;
    EvalCounts counts;
    std::vector<ClaimJudgment> details;
    std::vector<std::string> uncited_sentences;
};

json to_json(const EvalReport& report);

/// Sentences carrying at least one resolvable citation key become claims;
/// keys are resolved against the manuscript's citation map.
ClaimExtraction extract_claims(const Manuscript& manuscript);

/// Pure scoring arithmetic over verdict counts; unjudged pairs are excluded
/// from both numerator and denominator.
EvalCounts tally(const std::vector<ClaimJudgment>& judgments);
double recall_percent(const EvalCounts& counts);
double precision_percent(const EvalCounts& counts);

class EvalHarness {
public:
    EvalHarness(LlmGateway& llm, const PromptLibrary& prompts, Logger logger = {});

    /// One judge call per (claim, citation) pair plus one per multi-citation
    /// claim for the combined sources. Gateway errors mark pairs unjudged.
    Verdict judge_support(const std::string& claim, const std::string& source_text);

    /// Full pipeline: claims, support judgments, rubric scores.
    /// `snippets_by_record` augments each record's abstract with stored
    /// snippet texts as judged source material.
    EvalReport evaluate(const Manuscript& manuscript,
                        const std::map<std::string, std::vector<std::string>>& snippets_by_record);

private:
    double rubric_score(const std::string& tag, const Manuscript& manuscript);
    std::string source_text_for(
        const Manuscript& manuscript, const std::string& key,
        const std::map<std::string, std::vector<std::string>>& snippets_by_record) const;

    LlmGateway& llm_;
    const PromptLibrary& prompts_;
    Logger logger_;
};

}  // namespace litrev
