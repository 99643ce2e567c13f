#include "litrev/exploitation.hpp"

#include <algorithm>
#include <set>

#include "litrev/text_metrics.hpp"

namespace litrev {

// ---------------------------------------------------------------------------
// Groups
// ---------------------------------------------------------------------------

std::vector<SectionGroup> section_groups(const OutlineTree& tree) {
    std::vector<SectionGroup> groups;
    std::set<std::string> root_ids(tree.root_children.begin(), tree.root_children.end());
    for (const auto& id : preorder_ids(tree)) {
        const OutlineNode& node = tree.node(id);
        if (node.is_leaf()) {
            if (root_ids.count(id)) {
                groups.push_back({id, {id}});  // root-parented leaf, drafted individually
            }
            continue;
        }
        SectionGroup group;
        group.group_node_id = id;
        for (const auto& cid : node.children) {
            if (tree.node(cid).is_leaf()) group.leaf_ids.push_back(cid);
        }
        if (!group.leaf_ids.empty()) groups.push_back(std::move(group));
    }
    return groups;
}

// ---------------------------------------------------------------------------
// SectionJob JSON
// ---------------------------------------------------------------------------

json to_json(const SectionJob& v) {
    json snippets = json::object();
    for (const auto& [iteration, list] : v.snippets_by_iteration) {
        json arr = json::array();
        for (const auto& s : list) arr.push_back(to_json(s));
        snippets[std::to_string(iteration)] = std::move(arr);
    }
    return json{{"parent_node_id", v.parent_node_id},
                {"literature_ids", v.literature_ids},
                {"snippets_by_iteration", snippets},
                {"draft", to_json(v.draft)}};
}

void from_json_strict(const json& j, SectionJob& v) {
    const char* W = "SectionJob";
    if (!j.is_object()) throw SchemaError("SectionJob: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() != "parent_node_id" && it.key() != "literature_ids" &&
            it.key() != "snippets_by_iteration" && it.key() != "draft") {
            throw SchemaError("SectionJob: unknown key '" + it.key() + "'");
        }
    }
    if (!j.contains("parent_node_id") || !j["parent_node_id"].is_string())
        throw SchemaError(std::string(W) + ": missing string 'parent_node_id'");
    v.parent_node_id = j["parent_node_id"].get<std::string>();
    if (!j.contains("literature_ids") || !j["literature_ids"].is_array())
        throw SchemaError(std::string(W) + ": missing array 'literature_ids'");
    v.literature_ids.clear();
    for (const auto& e : j["literature_ids"]) {
        if (!e.is_string()) throw SchemaError(std::string(W) + ": literature_ids must be strings");
        v.literature_ids.push_back(e.get<std::string>());
    }
    if (!j.contains("snippets_by_iteration") || !j["snippets_by_iteration"].is_object())
        throw SchemaError(std::string(W) + ": missing object 'snippets_by_iteration'");
    v.snippets_by_iteration.clear();
    for (auto it = j["snippets_by_iteration"].begin(); it != j["snippets_by_iteration"].end();
         ++it) {
        int iteration;
        try {
            iteration = std::stoi(it.key());
        } catch (...) {
            throw SchemaError(std::string(W) + ": snippet iteration key '" + it.key() +
                              "' is not an integer");
        }
        if (!it.value().is_array())
            throw SchemaError(std::string(W) + ": snippet iterations must map to arrays");
        std::vector<FactSnippet> list;
        for (const auto& e : it.value()) {
            FactSnippet snippet;
            from_json_strict(e, snippet);
            list.push_back(std::move(snippet));
        }
        v.snippets_by_iteration[iteration] = std::move(list);
    }
    if (!j.contains("draft")) throw SchemaError(std::string(W) + ": missing 'draft'");
    from_json_strict(j["draft"], v.draft);
}

// ---------------------------------------------------------------------------
// Exploitation
// ---------------------------------------------------------------------------

Exploitation::Exploitation(CorpusStore& corpus, LlmGateway& llm, const PromptLibrary& prompts,
                           ExperienceEngine* experience, RunConfig config,
                           const std::map<std::string, LiteratureRecord>& records, Logger logger)
    : corpus_(corpus), llm_(llm), prompts_(prompts), experience_(experience),
      config_(std::move(config)), records_(records), logger_(std::move(logger)) {
    config_.validate();
}

SectionJob Exploitation::make_job(const OutlineTree& tree, const SectionGroup& group) const {
    SectionJob job;
    job.parent_node_id = group.group_node_id;
    job.draft.section_node_id = group.group_node_id;

    // Union of literature over the group subtree, first occurrence in
    // pre-order wins so the order is stable.
    std::set<std::string> seen;
    std::vector<std::string> stack{group.group_node_id};
    std::vector<std::string> order;
    while (!stack.empty()) {
        std::string id = stack.back();
        stack.pop_back();
        order.push_back(id);
        const OutlineNode& node = tree.node(id);
        for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) {
            stack.push_back(*it);
        }
    }
    for (const auto& id : order) {
        for (const auto& rid : tree.node(id).literature) {
            if (seen.insert(rid).second) job.literature_ids.push_back(rid);
        }
    }
    return job;
}

std::string Exploitation::outline_digest_for(const SectionJob& job,
                                             const OutlineTree& tree) const {
    const OutlineNode& parent = tree.node(job.parent_node_id);
    std::string digest = parent.heading + ": " + parent.description + "\n";
    for (const auto& cid : parent.children) {
        const OutlineNode& child = tree.node(cid);
        digest += "- " + child.heading + ": " + child.description + "\n";
    }
    return digest;
}

std::vector<FactSnippet> Exploitation::locate_pass(SectionJob& job, const OutlineTree& tree,
                                                   const std::string& focus, int iteration) {
    (void)tree;
    std::set<std::pair<std::string, std::string>> known;  // (record, normalized text)
    for (const auto& [it_idx, list] : job.snippets_by_iteration) {
        (void)it_idx;
        for (const auto& s : list) {
            known.insert({s.source_record_id, to_lower_ascii(trim(s.text))});
        }
    }

    ShapeSpec shape;
    shape.summary = "{\"snippets\": [{\"text\": string, \"page_hint\": integer|null}, ...]}";
    shape.validate = [](const json& j) -> std::optional<std::string> {
        if (!j.is_object() || !j.contains("snippets") || !j["snippets"].is_array())
            return "missing array field 'snippets'";
        for (const auto& s : j["snippets"]) {
            if (!s.is_object() || !s.contains("text") || !s["text"].is_string())
                return "snippets entries need a string 'text'";
        }
        return std::nullopt;
    };

    std::vector<FactSnippet> fresh;
    int snippet_counter = 0;
    for (const auto& rid : job.literature_ids) {
        auto rec_it = records_.find(rid);
        if (rec_it == records_.end()) {
            logger_.warn("job " + job.parent_node_id + ": literature id " + rid +
                         " missing from the record registry, skipped");
            continue;
        }
        const LiteratureRecord& record = rec_it->second;
        try {
            DocumentPages doc = corpus_.fetch_document(record);
            std::vector<int> pages =
                corpus_.preview_pages(doc, focus, config_.preview_page_limit);
            std::string pages_text;
            for (int p : pages) {
                pages_text += "[page " + std::to_string(p) + "]\n" + doc.pages[static_cast<size_t>(p)] +
                              "\n";
            }
            if (trim(pages_text).empty()) continue;

            auto produce = [&](const std::optional<std::string>& comments) -> std::string {
                std::string comments_block;
                if (comments)
                    comments_block = "\nReviewer comments to address:\n" + *comments + "\n";
                ChatRequest request;
                request.agent_role = AgentRole::locator;
                request.request_tag = "snippet-extract";
                request.system_prompt = prompts_.system_prompt(AgentRole::locator);
                request.user_prompt = PromptLibrary::render(
                    prompts_.get(AgentRole::locator, "snippet-extract"),
                    {{"focus", focus},
                     {"record_id", record.record_id},
                     {"title", record.title},
                     {"pages_text", pages_text},
                     {"max_snippets", std::to_string(kMaxSnippetsPerDoc)},
                     {"comments_block", comments_block}});
                return complete_structured(llm_, request, shape).raw_text;
            };

            std::string text;
            if (experience_) {
                text = experience_->run_loop(produce, AgentRole::locator).first;
            } else {
                text = produce(std::nullopt);
            }
            ChatResponse as_response;
            as_response.text = text;
            ParseOutcome parsed = parse_structured(as_response, shape);
            if (!parsed.value) {
                logger_.warn("job " + job.parent_node_id + ": accepted extraction for " + rid +
                             " unparseable, skipped");
                continue;
            }
            int taken = 0;
            for (const auto& s : (*parsed.value)["snippets"]) {
                if (taken >= kMaxSnippetsPerDoc) break;
                std::string snippet_text = trim(s["text"].get<std::string>());
                if (snippet_text.empty()) continue;
                auto dedup_key = std::make_pair(rid, to_lower_ascii(snippet_text));
                if (!known.insert(dedup_key).second) continue;
                FactSnippet snippet;
                snippet.snippet_id = "sn-" + job.parent_node_id + "-" +
                                     std::to_string(iteration) + "-" +
                                     std::to_string(++snippet_counter);
                snippet.source_record_id = rid;
                snippet.text = snippet_text;
                if (s.contains("page_hint") && s["page_hint"].is_number_integer()) {
                    snippet.page_hint = s["page_hint"].get<int>();
                }
                snippet.iteration = iteration;
                fresh.push_back(std::move(snippet));
                ++taken;
            }
        } catch (const CorpusError& e) {
            logger_.warn("job " + job.parent_node_id + ": document " + rid + " skipped: " +
                         e.what());
        } catch (const StructuredOutputError& e) {
            logger_.warn("job " + job.parent_node_id + ": extraction for " + rid +
                         " failed after repair, skipped: " + e.what());
        }
    }
    return fresh;
}

std::vector<FactSnippet> Exploitation::locate_initial(SectionJob& job, const OutlineTree& tree) {
    if (job.snippets_by_iteration.count(0)) {
        throw ExploitationError("job " + job.parent_node_id + ": iteration 0 already populated");
    }
    if (job.literature_ids.empty()) {
        throw ExploitationError("no evidence: job " + job.parent_node_id +
                                " has an empty literature set");
    }
    std::string focus = outline_digest_for(job, tree);
    std::vector<FactSnippet> snippets = locate_pass(job, tree, focus, 0);
    if (snippets.empty()) {
        throw ExploitationError("no evidence: job " + job.parent_node_id +
                                " extracted zero snippets");
    }
    job.snippets_by_iteration[0] = snippets;
    return snippets;
}

std::vector<FactSnippet> Exploitation::locate_refine(SectionJob& job, const OutlineTree& tree,
                                                     int t) {
    const DraftRevision& current = job.draft.revision(t);
    std::vector<FactSnippet> snippets = locate_pass(job, tree, current.body, t + 1);
    job.snippets_by_iteration[t + 1] = snippets;  // empty is legal for refinement
    return snippets;
}

std::vector<std::string> Exploitation::validate_citations(const std::string& body,
                                                          const SectionJob& job) const {
    std::set<std::string> allowed(job.literature_ids.begin(), job.literature_ids.end());
    std::vector<std::string> unknown;
    for (const auto& key : citation_keys(body)) {
        if (!allowed.count(key)) unknown.push_back(key);
    }
    return unknown;
}

std::string Exploitation::drafting_call(SectionJob& job, const OutlineTree& tree,
                                        const std::string& tag,
                                        const std::vector<FactSnippet>& snippets,
                                        const std::string& previous_draft) {
    const OutlineNode& parent = tree.node(job.parent_node_id);
    std::string snippets_digest;
    for (const auto& s : snippets) {
        snippets_digest += "[" + s.source_record_id + "]: " + s.text + "\n";
    }
    std::string keys = join(job.literature_ids, ", ");
    std::string example_key = job.literature_ids.empty() ? "key" : job.literature_ids.front();

    ShapeSpec shape;
    shape.summary = "{\"body\": string}";
    shape.validate = [](const json& j) -> std::optional<std::string> {
        if (!j.is_object() || !j.contains("body") || !j["body"].is_string())
            return "missing string field 'body'";
        if (trim(j["body"].get<std::string>()).empty()) return "'body' is empty";
        return std::nullopt;
    };

    auto build_request = [&](const std::string& comments_block) {
        ChatRequest request;
        request.agent_role = AgentRole::drafter;
        request.request_tag = tag;
        request.system_prompt = prompts_.system_prompt(AgentRole::drafter);
        std::map<std::string, std::string> vars{
            {"heading", parent.heading},
            {"outline_digest", outline_digest_for(job, tree)},
            {"word_budget", std::to_string(parent.word_budget)},
            {"snippets_digest", snippets_digest},
            {"new_snippets_digest", snippets_digest},
            {"citation_keys", keys},
            {"example_key", example_key},
            {"previous_draft", previous_draft},
            {"comments_block", comments_block}};
        request.user_prompt =
            PromptLibrary::render(prompts_.get(AgentRole::drafter, tag), vars);
        return request;
    };

    // Produce a draft body; a body citing unknown keys gets one repair
    // re-prompt, then is a hard error.
    auto produce_body = [&](const std::optional<std::string>& comments) -> std::string {
        std::string comments_block;
        if (comments) comments_block = "\nReviewer comments to address:\n" + *comments + "\n";
        StructuredResult result = complete_structured(llm_, build_request(comments_block), shape);
        std::string body = result.value["body"].get<std::string>();
        std::vector<std::string> unknown = validate_citations(body, job);
        if (!unknown.empty()) {
            std::string repair_block =
                comments_block + "\nYour previous draft cited unknown keys: " +
                join(unknown, ", ") + ". Only the available citation keys may be used.\n";
            StructuredResult repaired =
                complete_structured(llm_, build_request(repair_block), shape);
            body = repaired.value["body"].get<std::string>();
            unknown = validate_citations(body, job);
            if (!unknown.empty()) {
                throw ExploitationError("draft for " + job.parent_node_id +
                                        " cites unknown keys after repair: " +
                                        join(unknown, ", "));
            }
        }
        return body;
    };

    if (experience_) {
        return experience_->run_loop(produce_body, AgentRole::drafter).first;
    }
    return produce_body(std::nullopt);
}

void Exploitation::draft_initial(SectionJob& job, const OutlineTree& tree) {
    auto it = job.snippets_by_iteration.find(0);
    if (it == job.snippets_by_iteration.end() || it->second.empty()) {
        throw ExploitationError("draft_initial requires iteration-0 snippets");
    }
    if (!job.draft.revisions.empty()) {
        throw ExploitationError("job " + job.parent_node_id + " already has a revision 0");
    }
    std::string body = drafting_call(job, tree, "section-draft", it->second, "");
    DraftRevision revision;
    revision.iteration = 0;
    revision.body = body;
    for (const auto& key : citation_keys(body)) revision.cited_record_ids.push_back(key);
    job.draft.revisions.push_back(std::move(revision));
}

void Exploitation::draft_refine(SectionJob& job, const OutlineTree& tree, int t) {
    const DraftRevision& previous = job.draft.revision(t);
    auto it = job.snippets_by_iteration.find(t + 1);
    if (it == job.snippets_by_iteration.end()) {
        throw ExploitationError("draft_refine requires iteration " + std::to_string(t + 1) +
                                " snippets");
    }
    std::string body = drafting_call(job, tree, "section-refine", it->second, previous.body);
    DraftRevision revision;
    revision.iteration = t + 1;
    revision.body = body;
    for (const auto& key : citation_keys(body)) revision.cited_record_ids.push_back(key);
    job.draft.revisions.push_back(std::move(revision));
}

SectionJob Exploitation::run_cycle(SectionJob job, const OutlineTree& tree) {
    if (!job.draft.revisions.empty() || job.draft.finalized()) {
        throw ExploitationError("run_cycle requires a fresh job");
    }

    locate_initial(job, tree);
    draft_initial(job, tree);

    int t = 0;
    try {
        while (t < config_.t_max) {
            locate_refine(job, tree, t);
            draft_refine(job, tree, t);
            ++t;
            double psi = rouge_similarity(job.draft.revision(t).body,
                                          job.draft.revision(t - 1).body, config_.psi_variant);
            if (psi > config_.epsilon) break;
        }
    } catch (const Error& e) {
        logger_.warn("job " + job.parent_node_id + ": refinement aborted at t=" +
                     std::to_string(t) + ", finalizing last good revision: " + e.what());
    }
    job.draft.final_iteration = static_cast<int>(job.draft.revisions.size()) - 1;
    return job;
}

}  // namespace litrev
