#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "litrev/common.hpp"
#include "litrev/text_metrics.hpp"

namespace litrev {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Enums
// ---------------------------------------------------------------------------

enum class AgentRole { manager, searcher, outliner, locator, drafter };
enum class SourceKind { live_api, fixture };
enum class Phase { exploring, exploiting, assembling, done, failed };

std::string to_string(AgentRole role);
AgentRole agent_role_from_string(std::string_view name);
bool is_executor_role(AgentRole role);

std::string to_string(SourceKind kind);
SourceKind source_kind_from_string(std::string_view name);

std::string to_string(Phase phase);
Phase phase_from_string(std::string_view name);

// ---------------------------------------------------------------------------
// Core types
// ---------------------------------------------------------------------------

struct UserInstruction {
    std::string topic_text;
    int target_length_words = 0;
};

struct LiteratureRecord {
    std::string record_id;
    std::string title;
    std::string abstract;
    std::vector<std::string> authors;
    int year = 0;
    int citation_count = 0;
    std::optional<std::string> fulltext_locator;
    SourceKind source = SourceKind::fixture;
};

struct OutlineNode {
    std::string node_id;
    std::string heading;
    std::string description;
    int depth = 0;
    int word_budget = 0;
    std::vector<std::string> literature;  // LiteratureRecord ids
    std::vector<std::string> children;    // ordered node ids
    bool decomposed = false;

    bool is_leaf() const { return children.empty(); }
};

struct OutlineTree {
    UserInstruction root_instruction;
    std::map<std::string, OutlineNode> nodes;
    std::vector<std::string> root_children;

    const OutlineNode& node(const std::string& id) const;
    bool has_node(const std::string& id) const { return nodes.count(id) > 0; }
};

struct FactSnippet {
    std::string snippet_id;
    std::string source_record_id;
    std::string text;
    std::optional<int> page_hint;
    int iteration = 0;
};

struct DraftRevision {
    int iteration = 0;
    std::string body;
    std::vector<std::string> cited_record_ids;
};

struct DraftSection {
    std::string section_node_id;
    std::vector<DraftRevision> revisions;  // iterations strictly increasing from 0
    std::optional<int> final_iteration;

    const DraftRevision& revision(int iteration) const;
    const DraftRevision& final_revision() const;
    bool finalized() const { return final_iteration.has_value(); }
};

struct ExperienceRecord {
    std::string review_id;
    AgentRole agent_role = AgentRole::searcher;  // executor roles only
    std::string review_text;
    int revision_count = 0;
    int usage_count = 0;
};

struct RunConfig {
    int theta_words = 500;
    int d_max = 4;
    int t_max = 4;
    double epsilon = 0.80;
    int experience_max_iters = 4;
    int top_q_references = 20;
    bool deterministic_mode = false;
    std::uint64_t seed = 0;
    RougeVariant psi_variant = RougeVariant::f1;
    int preview_page_limit = 4;
    bool polish_enabled = true;

    void validate() const;  // throws SchemaError on out-of-range values
};

struct Manuscript {
    std::string title;
    std::vector<DraftSection> sections;          // finals, in tree order
    std::vector<LiteratureRecord> bibliography;  // deduplicated, cite order
    std::map<std::string, int> citation_map;     // in-text key -> bibliography index
};

/// The tree checkpoint pairs the outline tree with the literature records its
/// node literature ids resolve against.
struct TreeCheckpoint {
    OutlineTree tree;
    std::map<std::string, LiteratureRecord> records;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

struct TreeViolation {
    std::string code;
    std::string detail;
};

/// Checks every OutlineTree invariant. Violations are data, not failures:
/// an empty report means the tree is valid.
std::vector<TreeViolation> validate_tree(const OutlineTree& tree);

/// Leaves of a valid tree in depth-first pre-order. Throws StructureError
/// when the tree fails validation.
std::vector<std::string> leaf_set(const OutlineTree& tree);

/// All node ids in depth-first pre-order (valid trees only).
std::vector<std::string> preorder_ids(const OutlineTree& tree);

/// Deterministic fallback id for records whose source provides no stable key.
std::string normalized_record_id(std::string_view title, int year);

/// Bracketed citation keys appearing in a draft body, in order of appearance,
/// duplicates preserved.
std::vector<std::string> citation_keys(std::string_view body);

// ---------------------------------------------------------------------------
// JSON serialization (strict: unknown keys rejected)
// ---------------------------------------------------------------------------

json to_json(const UserInstruction& v);
json to_json(const LiteratureRecord& v);
json to_json(const OutlineNode& v);
json to_json(const OutlineTree& v);
json to_json(const FactSnippet& v);
json to_json(const DraftRevision& v);
json to_json(const DraftSection& v);
json to_json(const ExperienceRecord& v);
json to_json(const RunConfig& v);
json to_json(const Manuscript& v);
json to_json(const TreeCheckpoint& v);

void from_json_strict(const json& j, UserInstruction& v);
void from_json_strict(const json& j, LiteratureRecord& v);
void from_json_strict(const json& j, OutlineNode& v);
void from_json_strict(const json& j, OutlineTree& v);
void from_json_strict(const json& j, FactSnippet& v);
void from_json_strict(const json& j, DraftRevision& v);
void from_json_strict(const json& j, DraftSection& v);
void from_json_strict(const json& j, ExperienceRecord& v);
void from_json_strict(const json& j, RunConfig& v);
void from_json_strict(const json& j, Manuscript& v);
void from_json_strict(const json& j, TreeCheckpoint& v);

template <typename T>
T parse_json(const json& j) {
    T v;
    from_json_strict(j, v);
    return v;
}

template <typename T>
T parse_json_text(std::string_view text, const std::string& context) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw SchemaError(context + ": not valid JSON");
    try {
        return parse_json<T>(j);
    } catch (const SchemaError& e) {
        throw SchemaError(context + ": " + e.what());
    }
}

}  // namespace litrev
