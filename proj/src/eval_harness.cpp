#include "litrev/eval_harness.hpp"

#include <algorithm>
#include <cstdlib>

namespace litrev {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::supported: return "supported";
        case Verdict::unsupported: return "unsupported";
        case Verdict::unjudged: return "unjudged";
    }
    throw Error("invalid verdict value");
}

// ---------------------------------------------------------------------------
// Claim extraction
// ---------------------------------------------------------------------------

ClaimExtraction extract_claims(const Manuscript& manuscript) {
    ClaimExtraction out;
    for (const auto& section : manuscript.sections) {
        if (!section.finalized()) continue;
        const std::string& body = section.final_revision().body;
        for (const auto& sentence : split_sentences(body)) {
            std::vector<std::string> keys;
            for (const auto& key : citation_keys(sentence)) {
                if (manuscript.citation_map.count(key)) keys.push_back(key);
            }
            if (keys.empty()) {
                out.uncited_sentences.push_back(sentence);
            } else {
                out.claims.push_back({sentence, std::move(keys)});
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scoring arithmetic
// ---------------------------------------------------------------------------

EvalCounts tally(const std::vector<ClaimJudgment>& judgments) {
    EvalCounts counts;
    for (const auto& j : judgments) {
        if (j.statement_verdict == Verdict::unjudged) {
            ++counts.unjudged_statements;
        } else {
            ++counts.total_statements;
            if (j.statement_verdict == Verdict::supported) ++counts.supported_statements;
        }
        for (const auto& v : j.citation_verdicts) {
            if (v == Verdict::unjudged) {
                ++counts.unjudged_citations;
            } else {
                ++counts.total_citations;
                if (v == Verdict::supported) ++counts.supporting_citations;
            }
        }
    }
    return counts;
}

double recall_percent(const EvalCounts& counts) {
    if (counts.total_statements == 0) return 0.0;
    return 100.0 * static_cast<double>(counts.supported_statements) /
           static_cast<double>(counts.total_statements);
}

double precision_percent(const EvalCounts& counts) {
    if (counts.total_citations == 0) return 0.0;
    return 100.0 * static_cast<double>(counts.supporting_citations) /
           static_cast<double>(counts.total_citations);
}

json to_json(const EvalReport& report) {
    json details = json::array();
    for (const auto& d : report.details) {
        json verdicts = json::array();
        for (const auto& v : d.citation_verdicts) verdicts.push_back(to_string(v));
        details.push_back(json{{"claim", d.claim.text},
                               {"cited_keys", d.claim.cited_keys},
                               {"citation_verdicts", verdicts},
                               {"statement_verdict", to_string(d.statement_verdict)}});
    }
    return json{{"citation_recall", report.citation_recall},
                {"citation_precision", report.citation_precision},
                {"coverage", report.coverage},
                {"structure", report.structure},
                {"relevance", report.relevance},
                {"counts",
                 json{{"total_statements", report.counts.total_statements},
                      {"supported_statements", report.counts.supported_statements},
                      {"unjudged_statements", report.counts.unjudged_statements},
                      {"total_citations", report.counts.total_citations},
                      {"supporting_citations", report.counts.supporting_citations},
                      {"unjudged_citations", report.counts.unjudged_citations}}},
                {"details", details},
                {"uncited_sentences", report.uncited_sentences}};
}

// ---------------------------------------------------------------------------
// EvalHarness
// ---------------------------------------------------------------------------

EvalHarness::EvalHarness(LlmGateway& llm, const PromptLibrary& prompts, Logger logger)
    : llm_(llm), prompts_(prompts), logger_(std::move(logger)) {}

Verdict EvalHarness::judge_support(const std::string& claim, const std::string& source_text) {
    if (trim(source_text).empty()) return Verdict::unjudged;
    ChatRequest request;
    request.agent_role = AgentRole::manager;
    request.request_tag = "support-judge";
    request.system_prompt = prompts_.system_prompt(AgentRole::manager);
    request.user_prompt =
        PromptLibrary::render(prompts_.get(AgentRole::manager, "support-judge"),
                              {{"claim", claim}, {"source_text", source_text}});
    try {
        ChatResponse response = llm_.complete(request);
        std::string verdict = to_lower_ascii(trim(response.text));
        if (verdict == "supported") return Verdict::supported;
        if (verdict == "unsupported") return Verdict::unsupported;
        // Tolerate prose around the verdict word.
        bool has_supported = verdict.find("supported") != std::string::npos;
        bool has_unsupported = verdict.find("unsupported") != std::string::npos;
        if (has_unsupported) return Verdict::unsupported;
        if (has_supported) return Verdict::supported;
        logger_.warn("support judge returned an unrecognized verdict: " + response.text);
        return Verdict::unjudged;
    } catch (const GatewayError& e) {
        logger_.warn(std::string("support judge call failed, pair left unjudged: ") + e.what());
        return Verdict::unjudged;
    }
}

std::string EvalHarness::source_text_for(
    const Manuscript& manuscript, const std::string& key,
    const std::map<std::string, std::vector<std::string>>& snippets_by_record) const {
    auto it = manuscript.citation_map.find(key);
    if (it == manuscript.citation_map.end()) return "";
    const LiteratureRecord& record = manuscript.bibliography.at(static_cast<size_t>(it->second));
    std::string text = record.title + "\n" + record.abstract;
    auto sit = snippets_by_record.find(record.record_id);
    if (sit != snippets_by_record.end()) {
        for (const auto& s : sit->second) text += "\n" + s;
    }
    return text;
}

double EvalHarness::rubric_score(const std::string& tag, const Manuscript& manuscript) {
    std::string text;
    for (const auto& section : manuscript.sections) {
        if (section.finalized()) text += section.final_revision().body + "\n\n";
    }
    ChatRequest request;
    request.agent_role = AgentRole::manager;
    request.request_tag = tag;
    request.system_prompt = prompts_.system_prompt(AgentRole::manager);
    request.user_prompt = PromptLibrary::render(prompts_.get(AgentRole::manager, tag),
                                                {{"topic", manuscript.title},
                                                 {"manuscript", text}});
    try {
        ChatResponse response = llm_.complete(request);
        char* end = nullptr;
        std::string trimmed = trim(response.text);
        double value = std::strtod(trimmed.c_str(), &end);
        if (end == trimmed.c_str() || value < 1.0 || value > 5.0) {
            logger_.warn("rubric judge (" + tag + ") returned an unusable score: " +
                         response.text);
            return 0.0;
        }
        return value;  // fractional scores preserved, never rounded
    } catch (const GatewayError& e) {
        logger_.warn("rubric judge (" + tag + ") failed: " + std::string(e.what()));
        return 0.0;
    }
}

EvalReport EvalHarness::evaluate(
    const Manuscript& manuscript,
    const std::map<std::string, std::vector<std::string>>& snippets_by_record) {
    EvalReport report;
    ClaimExtraction extraction = extract_claims(manuscript);
    report.uncited_sentences = extraction.uncited_sentences;

    for (const auto& claim : extraction.claims) {
        ClaimJudgment judgment;
        judgment.claim = claim;

        std::string combined;
        for (const auto& key : claim.cited_keys) {
            std::string source = source_text_for(manuscript, key, snippets_by_record);
            judgment.citation_verdicts.push_back(judge_support(claim.text, source));
            if (!source.empty()) combined += source + "\n---\n";
        }

        if (claim.cited_keys.size() == 1) {
            judgment.statement_verdict = judgment.citation_verdicts.front();
        } else {
            // Statement-level support is judged against the union of the
            // cited sources.
            judgment.statement_verdict = judge_support(claim.text, combined);
        }
        report.details.push_back(std::move(judgment));
    }

    report.counts = tally(report.details);
    report.citation_recall = recall_percent(report.counts);
    report.citation_precision = precision_percent(report.counts);
    report.coverage = rubric_score("rubric-coverage", manuscript);
    report.structure = rubric_score("rubric-structure", manuscript);
    report.relevance = rubric_score("rubric-relevance", manuscript);
    return report;
}

}  // namespace litrev
