#include "litrev/exploration.hpp"

#include <algorithm>
#include <cstdio>

namespace litrev {

std::vector<int> split_budget(int total, int k) {
    if (k < 1) throw ExplorationError("cannot split a budget over zero children");
    if (total < 0) throw ExplorationError("cannot split a negative budget");
    int base = total / k;
    int remainder = total - base * k;
    std::vector<int> out(static_cast<std::size_t>(k), base);
    out[0] += remainder;
    return out;
}

Exploration::Exploration(SearchGateway& search, LlmGateway& llm, const PromptLibrary& prompts,
                         ExperienceEngine* experience, RunConfig config, Logger logger)
    : search_(search), llm_(llm), prompts_(prompts), experience_(experience),
      config_(std::move(config)), logger_(std::move(logger)) {
    config_.validate();
}

int Exploration::complexity(const OutlineNode& node) { return node.word_budget; }

bool Exploration::should_decompose(const OutlineNode& node, const RunConfig& config) {
    return complexity(node) > config.theta_words && node.depth < config.d_max;
}

std::vector<LiteratureRecord> Exploration::retrieve_for(const std::string& context) {
    auto queries = search_.formulate_queries(context);
    auto records = search_.search(queries);
    return select_top(std::move(records), config_.top_q_references);
}

std::vector<Exploration::ChildDraft> Exploration::outline_children(
    const std::string& heading, const std::string& description, int word_budget,
    const std::vector<LiteratureRecord>& literature) {
    std::string digest;
    for (const auto& record : literature) {
        digest += "- " + record.title + " - " + record.abstract + "\n";
    }

    ShapeSpec shape;
    shape.summary = "{\"children\": [{\"heading\": string, \"description\": string}, ...]} "
                    "with at least " +
                    std::to_string(kMinChildren) + " children";
    shape.validate = [](const json& j) -> std::optional<std::string> {
        if (!j.is_object() || !j.contains("children") || !j["children"].is_array())
            return "missing array field 'children'";
        for (const auto& c : j["children"]) {
            if (!c.is_object() || !c.contains("heading") || !c["heading"].is_string() ||
                !c.contains("description") || !c["description"].is_string()) {
                return "children entries need string 'heading' and 'description'";
            }
            if (trim(c["heading"].get<std::string>()).empty()) return "empty child heading";
        }
        if (j["children"].size() < static_cast<std::size_t>(kMinChildren))
            return "need at least " + std::to_string(kMinChildren) + " children";
        return std::nullopt;
    };

    auto produce = [&](const std::optional<std::string>& comments) -> std::string {
        std::string comments_block;
        if (comments) comments_block = "\nReviewer comments to address:\n" + *comments + "\n";
        ChatRequest request;
        request.agent_role = AgentRole::outliner;
        request.request_tag = "outline-expand";
        request.system_prompt = prompts_.system_prompt(AgentRole::outliner);
        request.user_prompt = PromptLibrary::render(
            prompts_.get(AgentRole::outliner, "outline-expand"),
            {{"heading", heading},
             {"description", description},
             {"word_budget", std::to_string(word_budget)},
             {"min_children", std::to_string(kMinChildren)},
             {"max_children", std::to_string(kMaxChildren)},
             {"literature_digest", digest},
             {"comments_block", comments_block}});
        return complete_structured(llm_, request, shape).raw_text;
    };

    std::string text;
    if (experience_) {
        text = experience_->run_loop(produce, AgentRole::outliner).first;
    } else {
        text = produce(std::nullopt);
    }

    ChatResponse as_response;
    as_response.text = text;
    ParseOutcome parsed = parse_structured(as_response, shape);
    if (!parsed.value) {
        throw StructuredOutputError("accepted outline became unparseable: " +
                                    parsed.report.message);
    }

    std::vector<ChildDraft> children;
    for (const auto& c : (*parsed.value)["children"]) {
        children.push_back({trim(c["heading"].get<std::string>()),
                            trim(c["description"].get<std::string>())});
        if (static_cast<int>(children.size()) >= kMaxChildren) break;
    }
    return children;
}

std::vector<OutlineNode> Exploration::expand_node(OutlineNode& node,
                                                  std::map<std::string, LiteratureRecord>* registry) {
    std::string context = node.heading + "\n" + node.description;
    std::vector<LiteratureRecord> top = retrieve_for(context);
    if (top.empty()) {
        logger_.warn("node " + node.node_id + " retrieved no literature, forced to leaf");
        return {};
    }
    for (const auto& record : top) {
        node.literature.push_back(record.record_id);
        if (registry) registry->emplace(record.record_id, record);
    }

    std::vector<ChildDraft> drafts;
    try {
        drafts = outline_children(node.heading, node.description, node.word_budget, top);
    } catch (const StructuredOutputError& e) {
        logger_.warn("node " + node.node_id + " outline unusable (" + std::string(e.what()) +
                     "), forced to leaf");
        return {};
    }
    if (static_cast<int>(drafts.size()) < kMinChildren) {
        logger_.warn("node " + node.node_id + " produced fewer than " +
                     std::to_string(kMinChildren) + " children, forced to leaf");
        return {};
    }

    std::vector<int> budgets = split_budget(node.word_budget, static_cast<int>(drafts.size()));
    std::vector<OutlineNode> children;
    for (size_t i = 0; i < drafts.size(); ++i) {
        OutlineNode child;
        child.heading = drafts[i].heading;
        child.description = drafts[i].description;
        child.depth = node.depth + 1;
        child.word_budget = budgets[i];
        children.push_back(std::move(child));
    }
    return children;
}

TreeCheckpoint Exploration::build_tree(const UserInstruction& instruction) {
    if (trim(instruction.topic_text).empty()) {
        throw ExplorationError("instruction topic is empty");
    }
    if (instruction.target_length_words < 1) {
        throw ExplorationError("target length must be >= 1");
    }

    ExplorationState state;
    state.tree.root_instruction = instruction;
    node_counter_ = 0;
    auto next_id = [&]() {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "n%04d", ++node_counter_);
        return std::string(buf);
    };

    try {
        // Root expansion: retrieve for the instruction itself, then outline
        // the root-level sub-directions. The root retrieval attaches to each
        // depth-1 child so root-level sections keep their evidence base.
        std::vector<LiteratureRecord> root_literature = retrieve_for(instruction.topic_text);
        if (root_literature.empty()) {
            throw ExplorationError("no evidence: the root instruction retrieved no literature");
        }
        std::vector<ChildDraft> root_drafts =
            outline_children(instruction.topic_text, "", instruction.target_length_words,
                             root_literature);
        if (static_cast<int>(root_drafts.size()) < kMinChildren) {
            throw ExplorationError("the outlining agent produced no usable root directions");
        }
        for (const auto& record : root_literature) {
            state.records.emplace(record.record_id, record);
        }
        std::vector<int> budgets = split_budget(instruction.target_length_words,
                                                static_cast<int>(root_drafts.size()));
        for (size_t i = 0; i < root_drafts.size(); ++i) {
            OutlineNode child;
            child.node_id = next_id();
            child.heading = root_drafts[i].heading;
            child.description = root_drafts[i].description;
            child.depth = 1;
            child.word_budget = budgets[i];
            for (const auto& record : root_literature) {
                child.literature.push_back(record.record_id);
            }
            state.tree.root_children.push_back(child.node_id);
            state.frontier.push_back(child.node_id);
            state.tree.nodes.emplace(child.node_id, std::move(child));
            state.depth_reached = 1;
        }

        // Breadth-first frontier processing; the frontier order is the
        // single-writer application order, so deterministic backends replay
        // byte-identically.
        while (!state.frontier.empty()) {
            std::string id = state.frontier.front();
            state.frontier.pop_front();
            OutlineNode& node = state.tree.nodes.at(id);
            if (!should_decompose(node, config_)) {
                node.decomposed = false;
                continue;
            }
            std::vector<OutlineNode> children = expand_node(node, &state.records);
            if (children.empty()) {
                node.decomposed = false;  // forced leaf, warning already logged
                continue;
            }
            node.decomposed = true;
            for (auto& child : children) {
                child.node_id = next_id();
                node.children.push_back(child.node_id);
                state.frontier.push_back(child.node_id);
                state.depth_reached = std::max(state.depth_reached, child.depth);
                state.tree.nodes.emplace(child.node_id, std::move(child));
            }
        }
    } catch (const ExplorationError&) {
        if (on_partial) on_partial(state);
        throw;
    } catch (const Error& e) {
        if (on_partial) on_partial(state);
        throw ExplorationError(std::string("exploration aborted: ") + e.what());
    }

    TreeCheckpoint checkpoint;
    checkpoint.tree = std::move(state.tree);
    checkpoint.records = std::move(state.records);

    auto violations = validate_tree(checkpoint.tree);
    if (!violations.empty()) {
        throw ExplorationError("built tree failed validation: " + violations.front().code +
                               " (" + violations.front().detail + ")");
    }
    return checkpoint;
}

}  // namespace litrev
