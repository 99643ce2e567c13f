#include "litrev/domain.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

namespace litrev {

// ---------------------------------------------------------------------------
// Enum names
// ---------------------------------------------------------------------------

std::string to_string(AgentRole role) {
    switch (role) {
        case AgentRole::manager: return "manager";
        case AgentRole::searcher: return "searcher";
        case AgentRole::outliner: return "outliner";
        case AgentRole::locator: return "locator";
        case AgentRole::drafter: return "drafter";
    }
    throw Error("invalid agent role value");
}

AgentRole agent_role_from_string(std::string_view name) {
    if (name == "manager") return AgentRole::manager;
    if (name == "searcher") return AgentRole::searcher;
    if (name == "outliner") return AgentRole::outliner;
    if (name == "locator") return AgentRole::locator;
    if (name == "drafter") return AgentRole::drafter;
    throw SchemaError("unknown agent role: " + std::string(name));
}

bool is_executor_role(AgentRole role) { return role != AgentRole::manager; }

std::string to_string(SourceKind kind) {
    return kind == SourceKind::live_api ? "live-api" : "fixture";
}

SourceKind source_kind_from_string(std::string_view name) {
    if (name == "live-api") return SourceKind::live_api;
    if (name == "fixture") return SourceKind::fixture;
    throw SchemaError("unknown source kind: " + std::string(name));
}

std::string to_string(Phase phase) {
    switch (phase) {
        case Phase::exploring: return "exploring";
        case Phase::exploiting: return "exploiting";
        case Phase::assembling: return "assembling";
        case Phase::done: return "done";
        case Phase::failed: return "failed";
    }
    throw Error("invalid phase value");
}

Phase phase_from_string(std::string_view name) {
    if (name == "exploring") return Phase::exploring;
    if (name == "exploiting") return Phase::exploiting;
    if (name == "assembling") return Phase::assembling;
    if (name == "done") return Phase::done;
    if (name == "failed") return Phase::failed;
    throw SchemaError("unknown phase: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Member helpers
// ---------------------------------------------------------------------------

const OutlineNode& OutlineTree::node(const std::string& id) const {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw StructureError("unknown node id: " + id);
    return it->second;
}

const DraftRevision& DraftSection::revision(int iteration) const {
    for (const auto& r : revisions) {
        if (r.iteration == iteration) return r;
    }
    throw StructureError("no revision with iteration " + std::to_string(iteration) +
                         " in section " + section_node_id);
}

const DraftRevision& DraftSection::final_revision() const {
    if (!final_iteration) throw StructureError("section " + section_node_id + " not finalized");
    return revision(*final_iteration);
}

void RunConfig::validate() const {
    if (theta_words < 1 || d_max < 1 || t_max < 1 || experience_max_iters < 1 ||
        top_q_references < 1 || preview_page_limit < 1) {
        throw SchemaError("run config caps must all be >= 1");
    }
    if (epsilon < 0.0 || epsilon > 1.0) throw SchemaError("epsilon must be in [0,1]");
}

// ---------------------------------------------------------------------------
// Tree operations
// ---------------------------------------------------------------------------

namespace {

void preorder_walk(const OutlineTree& tree, const std::vector<std::string>& ids,
                   std::vector<std::string>& out) {
    for (const auto& id : ids) {
        auto it = tree.nodes.find(id);
        if (it == tree.nodes.end()) continue;
        out.push_back(id);
        preorder_walk(tree, it->second.children, out);
    }
}

}  // namespace

std::vector<TreeViolation> validate_tree(const OutlineTree& tree) {
    std::vector<TreeViolation> out;
    auto add = [&](std::string code, std::string detail) {
        out.push_back({std::move(code), std::move(detail)});
    };

    if (trim(tree.root_instruction.topic_text).empty()) {
        add("empty-topic", "root instruction topic_text is empty");
    }
    if (tree.root_instruction.target_length_words < 1) {
        add("bad-target-length", "target_length_words must be >= 1");
    }

    // Resolve references and count parents.
    std::map<std::string, int> parent_count;
    for (const auto& id : tree.root_children) {
        if (!tree.has_node(id)) {
            add("dangling-root-child", "root child " + id + " not in node map");
            continue;
        }
        ++parent_count[id];
        if (tree.nodes.at(id).depth != 1) {
            add("bad-depth", "root child " + id + " has depth " +
                                 std::to_string(tree.nodes.at(id).depth) + ", expected 1");
        }
    }
    for (const auto& [id, node] : tree.nodes) {
        if (node.node_id != id) {
            add("id-mismatch", "node keyed " + id + " carries node_id " + node.node_id);
        }
        if (node.word_budget < 0) {
            add("negative-budget", "node " + id + " has negative word_budget");
        }
        if (node.children.empty() == node.decomposed) {
            add("decomposed-mismatch",
                "node " + id + ": children empty iff decomposed = false violated");
        }
        std::set<std::string> seen_children;
        for (const auto& cid : node.children) {
            if (!seen_children.insert(cid).second) {
                add("duplicate-child", "node " + id + " lists child " + cid + " twice");
                continue;
            }
            if (!tree.has_node(cid)) {
                add("dangling-child", "node " + id + " references missing child " + cid);
                continue;
            }
            ++parent_count[cid];
            const auto& child = tree.nodes.at(cid);
            if (child.depth != node.depth + 1) {
                add("bad-depth", "child " + cid + " has depth " + std::to_string(child.depth) +
                                     " but parent " + id + " has depth " +
                                     std::to_string(node.depth));
            }
        }
    }

    for (const auto& [id, count] : parent_count) {
        if (count > 1) add("multiple-parents", "node " + id + " reachable from " +
                                                   std::to_string(count) + " parents");
    }

    // Reachability from the root, with cycle detection along the way.
    std::set<std::string> visited;
    std::vector<std::pair<std::string, size_t>> stack;  // (id, next child index)
    std::vector<std::string> path;
    std::set<std::string> on_path;
    auto visit_roots = tree.root_children;
    for (const auto& root_id : visit_roots) {
        if (!tree.has_node(root_id) || visited.count(root_id)) continue;
        stack.push_back({root_id, 0});
        path.push_back(root_id);
        on_path.insert(root_id);
        visited.insert(root_id);
        while (!stack.empty()) {
            auto& [id, next] = stack.back();
            const auto& node = tree.nodes.at(id);
            if (next >= node.children.size()) {
                on_path.erase(id);
                path.pop_back();
                stack.pop_back();
                continue;
            }
            std::string cid = node.children[next++];
            if (!tree.has_node(cid)) continue;
            if (on_path.count(cid)) {
                add("cycle", "cycle through nodes " + cid + " and " + id);
                continue;
            }
            if (visited.count(cid)) continue;
            visited.insert(cid);
            stack.push_back({cid, 0});
            path.push_back(cid);
            on_path.insert(cid);
        }
    }
    for (const auto& [id, node] : tree.nodes) {
        (void)node;
        if (!visited.count(id)) {
            add("unreachable", "node " + id + " not reachable from the root");
        }
    }

    return out;
}

std::vector<std::string> leaf_set(const OutlineTree& tree) {
    auto violations = validate_tree(tree);
    if (!violations.empty()) {
        throw StructureError("leaf_set on invalid tree: " + violations.front().code + " (" +
                             violations.front().detail + ")");
    }
    std::vector<std::string> order;
    preorder_walk(tree, tree.root_children, order);
    std::vector<std::string> leaves;
    for (const auto& id : order) {
        if (tree.nodes.at(id).is_leaf()) leaves.push_back(id);
    }
    return leaves;
}

std::vector<std::string> preorder_ids(const OutlineTree& tree) {
    std::vector<std::string> order;
    preorder_walk(tree, tree.root_children, order);
    return order;
}

std::string normalized_record_id(std::string_view title, int year) {
    std::string key = to_lower_ascii(trim(title));
    key += '\n';
    key += std::to_string(year);
    return "rec-" + hex64(fnv1a64(key));
}

std::vector<std::string> citation_keys(std::string_view body) {
    std::vector<std::string> keys;
    size_t i = 0;
    while (i < body.size()) {
        if (body[i] != '[') {
            ++i;
            continue;
        }
        size_t close = body.find(']', i + 1);
        if (close == std::string_view::npos) break;
        std::string_view inner = body.substr(i + 1, close - i - 1);
        bool plausible = !inner.empty();
        for (char c : inner) {
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
                  c == ':' || c == '.')) {
                plausible = false;
                break;
            }
        }
        if (plausible) keys.emplace_back(inner);
        i = close + 1;
    }
    return keys;
}

// ---------------------------------------------------------------------------
// Strict JSON helpers
// ---------------------------------------------------------------------------

namespace {

void expect_object(const json& j, const char* what) {
    if (!j.is_object()) throw SchemaError(std::string(what) + ": expected a JSON object");
}

void reject_unknown(const json& j, const char* what,
                    std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw SchemaError(std::string(what) + ": unknown key '" + it.key() + "'");
        }
    }
}

const json& field(const json& j, const char* what, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(std::string(what) + ": missing key '" + key + "'");
    return *it;
}

std::string get_string(const json& j, const char* what, const char* key) {
    const json& f = field(j, what, key);
    if (!f.is_string()) throw SchemaError(std::string(what) + ": '" + key + "' must be a string");
    return f.get<std::string>();
}

int get_int(const json& j, const char* what, const char* key) {
    const json& f = field(j, what, key);
    if (!f.is_number_integer())
        throw SchemaError(std::string(what) + ": '" + key + "' must be an integer");
    return f.get<int>();
}

double get_number(const json& j, const char* what, const char* key) {
    const json& f = field(j, what, key);
    if (!f.is_number()) throw SchemaError(std::string(what) + ": '" + key + "' must be a number");
    return f.get<double>();
}

bool get_bool(const json& j, const char* what, const char* key) {
    const json& f = field(j, what, key);
    if (!f.is_boolean())
        throw SchemaError(std::string(what) + ": '" + key + "' must be a boolean");
    return f.get<bool>();
}

std::vector<std::string> get_string_array(const json& j, const char* what, const char* key) {
    const json& f = field(j, what, key);
    if (!f.is_array()) throw SchemaError(std::string(what) + ": '" + key + "' must be an array");
    std::vector<std::string> out;
    for (const auto& e : f) {
        if (!e.is_string())
            throw SchemaError(std::string(what) + ": '" + key + "' must contain strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// to_json
// ---------------------------------------------------------------------------

json to_json(const UserInstruction& v) {
    return json{{"topic_text", v.topic_text}, {"target_length_words", v.target_length_words}};
}

json to_json(const LiteratureRecord& v) {
    json j{{"record_id", v.record_id}, {"title", v.title},
           {"abstract", v.abstract},  {"authors", v.authors},
           {"year", v.year},          {"citation_count", v.citation_count},
           {"source", to_string(v.source)}};
    j["fulltext_locator"] = v.fulltext_locator ? json(*v.fulltext_locator) : json(nullptr);
    return j;
}

json to_json(const OutlineNode& v) {
    return json{{"node_id", v.node_id},   {"heading", v.heading},
                {"description", v.description}, {"depth", v.depth},
                {"word_budget", v.word_budget}, {"literature", v.literature},
                {"children", v.children}, {"decomposed", v.decomposed}};
}

json to_json(const OutlineTree& v) {
    json nodes = json::object();
    for (const auto& [id, node] : v.nodes) nodes[id] = to_json(node);
    return json{{"root_instruction", to_json(v.root_instruction)},
                {"nodes", nodes},
                {"root_children", v.root_children}};
}

json to_json(const FactSnippet& v) {
    json j{{"snippet_id", v.snippet_id},
           {"source_record_id", v.source_record_id},
           {"text", v.text},
           {"iteration", v.iteration}};
    j["page_hint"] = v.page_hint ? json(*v.page_hint) : json(nullptr);
    return j;
}

json to_json(const DraftRevision& v) {
    return json{{"iteration", v.iteration},
                {"body", v.body},
                {"cited_record_ids", v.cited_record_ids}};
}

json to_json(const DraftSection& v) {
    json revs = json::array();
    for (const auto& r : v.revisions) revs.push_back(to_json(r));
    json j{{"section_node_id", v.section_node_id}, {"revisions", revs}};
    j["final_iteration"] = v.final_iteration ? json(*v.final_iteration) : json(nullptr);
    return j;
}

json to_json(const ExperienceRecord& v) {
    return json{{"review_id", v.review_id},
                {"agent_role", to_string(v.agent_role)},
                {"review_text", v.review_text},
                {"revision_count", v.revision_count},
                {"usage_count", v.usage_count}};
}

json to_json(const RunConfig& v) {
    return json{{"theta_words", v.theta_words},
                {"d_max", v.d_max},
                {"t_max", v.t_max},
                {"epsilon", v.epsilon},
                {"experience_max_iters", v.experience_max_iters},
                {"top_q_references", v.top_q_references},
                {"deterministic_mode", v.deterministic_mode},
                {"seed", v.seed},
                {"psi_variant", to_string(v.psi_variant)},
                {"preview_page_limit", v.preview_page_limit},
                {"polish_enabled", v.polish_enabled}};
}

json to_json(const Manuscript& v) {
    json sections = json::array();
    for (const auto& s : v.sections) sections.push_back(to_json(s));
    json bib = json::array();
    for (const auto& r : v.bibliography) bib.push_back(to_json(r));
    json cmap = json::object();
    for (const auto& [key, idx] : v.citation_map) cmap[key] = idx;
    return json{{"title", v.title},
                {"sections", sections},
                {"bibliography", bib},
                {"citation_map", cmap}};
}

json to_json(const TreeCheckpoint& v) {
    json records = json::array();
    for (const auto& [id, rec] : v.records) {
        (void)id;
        records.push_back(to_json(rec));
    }
    return json{{"tree", to_json(v.tree)}, {"records", records}};
}

// ---------------------------------------------------------------------------
// from_json_strict
// ---------------------------------------------------------------------------

void from_json_strict(const json& j, UserInstruction& v) {
    const char* W = "UserInstruction";
    expect_object(j, W);
    reject_unknown(j, W, {"topic_text", "target_length_words"});
    v.topic_text = get_string(j, W, "topic_text");
    v.target_length_words = get_int(j, W, "target_length_words");
    if (trim(v.topic_text).empty()) throw SchemaError("UserInstruction: topic_text is empty");
    if (v.target_length_words < 1)
        throw SchemaError("UserInstruction: target_length_words must be >= 1");
}

void from_json_strict(const json& j, LiteratureRecord& v) {
    const char* W = "LiteratureRecord";
    expect_object(j, W);
    reject_unknown(j, W, {"record_id", "title", "abstract", "authors", "year", "citation_count",
                          "fulltext_locator", "source"});
    v.record_id = get_string(j, W, "record_id");
    v.title = get_string(j, W, "title");
    v.abstract = get_string(j, W, "abstract");
    v.authors = get_string_array(j, W, "authors");
    v.year = get_int(j, W, "year");
    v.citation_count = get_int(j, W, "citation_count");
    const json& loc = field(j, W, "fulltext_locator");
    if (loc.is_null()) {
        v.fulltext_locator.reset();
    } else if (loc.is_string()) {
        v.fulltext_locator = loc.get<std::string>();
    } else {
        throw SchemaError("LiteratureRecord: fulltext_locator must be a string or null");
    }
    v.source = source_kind_from_string(get_string(j, W, "source"));
    if (trim(v.title).empty()) throw SchemaError("LiteratureRecord: title is empty");
    if (v.citation_count < 0) throw SchemaError("LiteratureRecord: citation_count must be >= 0");
}

void from_json_strict(const json& j, OutlineNode& v) {
    const char* W = "OutlineNode";
    expect_object(j, W);
    reject_unknown(j, W, {"node_id", "heading", "description", "depth", "word_budget",
                          "literature", "children", "decomposed"});
    v.node_id = get_string(j, W, "node_id");
    v.heading = get_string(j, W, "heading");
    v.description = get_string(j, W, "description");
    v.depth = get_int(j, W, "depth");
    v.word_budget = get_int(j, W, "word_budget");
    v.literature = get_string_array(j, W, "literature");
    v.children = get_string_array(j, W, "children");
    v.decomposed = get_bool(j, W, "decomposed");
    if (v.depth < 0) throw SchemaError("OutlineNode: depth must be >= 0");
    if (v.word_budget < 0) throw SchemaError("OutlineNode: word_budget must be >= 0");
}

void from_json_strict(const json& j, OutlineTree& v) {
    const char* W = "OutlineTree";
    expect_object(j, W);
    reject_unknown(j, W, {"root_instruction", "nodes", "root_children"});
    from_json_strict(field(j, W, "root_instruction"), v.root_instruction);
    const json& nodes = field(j, W, "nodes");
    if (!nodes.is_object()) throw SchemaError("OutlineTree: 'nodes' must be an object");
    v.nodes.clear();
    for (auto it = nodes.begin(); it != nodes.end(); ++it) {
        OutlineNode node;
        from_json_strict(it.value(), node);
        if (node.node_id != it.key()) {
            throw SchemaError("OutlineTree: node keyed '" + it.key() + "' carries node_id '" +
                              node.node_id + "'");
        }
        v.nodes.emplace(it.key(), std::move(node));
    }
    v.root_children = get_string_array(j, W, "root_children");
}

void from_json_strict(const json& j, FactSnippet& v) {
    const char* W = "FactSnippet";
    expect_object(j, W);
    reject_unknown(j, W, {"snippet_id", "source_record_id", "text", "page_hint", "iteration"});
    v.snippet_id = get_string(j, W, "snippet_id");
    v.source_record_id = get_string(j, W, "source_record_id");
    v.text = get_string(j, W, "text");
    const json& ph = field(j, W, "page_hint");
    if (ph.is_null()) {
        v.page_hint.reset();
    } else if (ph.is_number_integer()) {
        v.page_hint = ph.get<int>();
    } else {
        throw SchemaError("FactSnippet: page_hint must be an integer or null");
    }
    v.iteration = get_int(j, W, "iteration");
    if (trim(v.text).empty()) throw SchemaError("FactSnippet: text is empty");
    if (v.iteration < 0) throw SchemaError("FactSnippet: iteration must be >= 0");
}

void from_json_strict(const json& j, DraftRevision& v) {
    const char* W = "DraftRevision";
    expect_object(j, W);
    reject_unknown(j, W, {"iteration", "body", "cited_record_ids"});
    v.iteration = get_int(j, W, "iteration");
    v.body = get_string(j, W, "body");
    v.cited_record_ids = get_string_array(j, W, "cited_record_ids");
    if (v.iteration < 0) throw SchemaError("DraftRevision: iteration must be >= 0");
}

void from_json_strict(const json& j, DraftSection& v) {
    const char* W = "DraftSection";
    expect_object(j, W);
    reject_unknown(j, W, {"section_node_id", "revisions", "final_iteration"});
    v.section_node_id = get_string(j, W, "section_node_id");
    const json& revs = field(j, W, "revisions");
    if (!revs.is_array()) throw SchemaError("DraftSection: 'revisions' must be an array");
    v.revisions.clear();
    int expected = 0;
    for (const auto& r : revs) {
        DraftRevision rev;
        from_json_strict(r, rev);
        if (rev.iteration != expected) {
            throw SchemaError("DraftSection: revision iterations must increase strictly from 0");
        }
        ++expected;
        v.revisions.push_back(std::move(rev));
    }
    const json& fin = field(j, W, "final_iteration");
    if (fin.is_null()) {
        v.final_iteration.reset();
    } else if (fin.is_number_integer()) {
        v.final_iteration = fin.get<int>();
        if (*v.final_iteration < 0 || *v.final_iteration >= expected) {
            throw SchemaError("DraftSection: final_iteration does not index a revision");
        }
    } else {
        throw SchemaError("DraftSection: final_iteration must be an integer or null");
    }
}

void from_json_strict(const json& j, ExperienceRecord& v) {
    const char* W = "ExperienceRecord";
    expect_object(j, W);
    reject_unknown(j, W,
                   {"review_id", "agent_role", "review_text", "revision_count", "usage_count"});
    v.review_id = get_string(j, W, "review_id");
    v.agent_role = agent_role_from_string(get_string(j, W, "agent_role"));
    v.review_text = get_string(j, W, "review_text");
    v.revision_count = get_int(j, W, "revision_count");
    v.usage_count = get_int(j, W, "usage_count");
    if (!is_executor_role(v.agent_role)) {
        throw SchemaError("ExperienceRecord: agent_role must be an executor role");
    }
    if (v.revision_count < 0 || v.usage_count < 0) {
        throw SchemaError("ExperienceRecord: counters must be >= 0");
    }
}

void from_json_strict(const json& j, RunConfig& v) {
    const char* W = "RunConfig";
    expect_object(j, W);
    reject_unknown(j, W, {"theta_words", "d_max", "t_max", "epsilon", "experience_max_iters",
                          "top_q_references", "deterministic_mode", "seed", "psi_variant",
                          "preview_page_limit", "polish_enabled"});
    v.theta_words = get_int(j, W, "theta_words");
    v.d_max = get_int(j, W, "d_max");
    v.t_max = get_int(j, W, "t_max");
    v.epsilon = get_number(j, W, "epsilon");
    v.experience_max_iters = get_int(j, W, "experience_max_iters");
    v.top_q_references = get_int(j, W, "top_q_references");
    v.deterministic_mode = get_bool(j, W, "deterministic_mode");
    const json& seed = field(j, W, "seed");
    if (!seed.is_number_integer() && !seed.is_number_unsigned())
        throw SchemaError("RunConfig: 'seed' must be an integer");
    v.seed = seed.get<std::uint64_t>();
    v.psi_variant = rouge_variant_from_string(get_string(j, W, "psi_variant"));
    v.preview_page_limit = get_int(j, W, "preview_page_limit");
    v.polish_enabled = get_bool(j, W, "polish_enabled");
    v.validate();
}

void from_json_strict(const json& j, Manuscript& v) {
    const char* W = "Manuscript";
    expect_object(j, W);
    reject_unknown(j, W, {"title", "sections", "bibliography", "citation_map"});
    v.title = get_string(j, W, "title");
    const json& sections = field(j, W, "sections");
    if (!sections.is_array()) throw SchemaError("Manuscript: 'sections' must be an array");
    v.sections.clear();
    for (const auto& s : sections) {
        DraftSection sec;
        from_json_strict(s, sec);
        v.sections.push_back(std::move(sec));
    }
    const json& bib = field(j, W, "bibliography");
    if (!bib.is_array()) throw SchemaError("Manuscript: 'bibliography' must be an array");
    v.bibliography.clear();
    std::set<std::string> seen;
    for (const auto& r : bib) {
        LiteratureRecord rec;
        from_json_strict(r, rec);
        if (!seen.insert(rec.record_id).second) {
            throw SchemaError("Manuscript: duplicate bibliography record " + rec.record_id);
        }
        v.bibliography.push_back(std::move(rec));
    }
    const json& cmap = field(j, W, "citation_map");
    if (!cmap.is_object()) throw SchemaError("Manuscript: 'citation_map' must be an object");
    v.citation_map.clear();
    std::set<int> used_indices;
    for (auto it = cmap.begin(); it != cmap.end(); ++it) {
        if (!it.value().is_number_integer())
            throw SchemaError("Manuscript: citation_map values must be integers");
        int idx = it.value().get<int>();
        if (idx < 0 || idx >= static_cast<int>(v.bibliography.size())) {
            throw SchemaError("Manuscript: citation_map entry '" + it.key() +
                              "' does not index the bibliography");
        }
        if (!used_indices.insert(idx).second) {
            throw SchemaError("Manuscript: citation_map is not injective at index " +
                              std::to_string(idx));
        }
        v.citation_map[it.key()] = idx;
    }
}

void from_json_strict(const json& j, TreeCheckpoint& v) {
    const char* W = "TreeCheckpoint";
    expect_object(j, W);
    reject_unknown(j, W, {"tree", "records"});
    from_json_strict(field(j, W, "tree"), v.tree);
    const json& records = field(j, W, "records");
    if (!records.is_array()) throw SchemaError("TreeCheckpoint: 'records' must be an array");
    v.records.clear();
    for (const auto& r : records) {
        LiteratureRecord rec;
        from_json_strict(r, rec);
        std::string id = rec.record_id;
        if (!v.records.emplace(id, std::move(rec)).second) {
            throw SchemaError("TreeCheckpoint: duplicate record id " + id);
        }
    }
}

}  // namespace litrev
