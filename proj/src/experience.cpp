#include "litrev/experience.hpp"

#include <algorithm>
#include <cstdio>

namespace litrev {

// ---------------------------------------------------------------------------
// ExperienceStore
// ---------------------------------------------------------------------------

void ExperienceStore::insert(ExperienceRecord record) {
    if (!is_executor_role(record.agent_role)) {
        throw StructureError("experience records belong to executor roles only");
    }
    std::string id = record.review_id;
    AgentRole role = record.agent_role;
    auto [it, fresh] = records.emplace(id, std::move(record));
    if (!fresh) throw StructureError("duplicate review id " + id);
    by_role[role].push_back(it->first);
}

ExperienceRecord& ExperienceStore::at(const std::string& review_id) {
    auto it = records.find(review_id);
    if (it == records.end()) throw StructureError("unknown review id " + review_id);
    return it->second;
}

ExperienceStore ExperienceStore::from_json_array(const json& j) {
    if (!j.is_array()) throw SchemaError("experience store: expected a JSON array");
    ExperienceStore store;
    for (const auto& e : j) {
        ExperienceRecord record;
        from_json_strict(e, record);
        store.insert(std::move(record));
    }
    return store;
}

json ExperienceStore::to_json_array() const {
    json out = json::array();
    for (const auto& [id, record] : records) {
        (void)id;
        out.push_back(to_json(record));
    }
    return out;
}

std::optional<ExperienceRecord> select_experience(const ExperienceStore& store, AgentRole role) {
    auto it = store.by_role.find(role);
    if (it == store.by_role.end() || it->second.empty()) return std::nullopt;

    // Records keyed by id in the map; scan in id order so ties resolve
    // independently of insertion order.
    std::vector<std::string> ids = it->second;
    std::sort(ids.begin(), ids.end());

    int min_revision = -1;
    for (const auto& id : ids) {
        int r = store.records.at(id).revision_count;
        if (min_revision < 0 || r < min_revision) min_revision = r;
    }
    const ExperienceRecord* best = nullptr;
    for (const auto& id : ids) {
        const auto& record = store.records.at(id);
        if (record.revision_count != min_revision) continue;
        if (!best || record.usage_count > best->usage_count) best = &record;
    }
    return *best;
}

// ---------------------------------------------------------------------------
// ExperienceEngine
// ---------------------------------------------------------------------------

ExperienceEngine::ExperienceEngine(LlmGateway& gateway, const PromptLibrary& prompts,
                                   std::string store_path, int max_iters, Logger logger)
    : gateway_(gateway), prompts_(prompts), store_path_(std::move(store_path)),
      max_iters_(max_iters), logger_(std::move(logger)) {
    if (max_iters_ < 1) throw Error("experience iteration cap must be >= 1");
}

void ExperienceEngine::load() {
    std::lock_guard<std::mutex> lock(mutex_);
    if (store_path_.empty() || !file_exists(store_path_)) return;  // cold start
    json j = json::parse(read_text_file(store_path_), nullptr, false);
    if (j.is_discarded()) throw SchemaError("experience store " + store_path_ + ": invalid JSON");
    store_ = ExperienceStore::from_json_array(j);
    id_counter_ = static_cast<int>(store_.records.size());
}

void ExperienceEngine::save() const {
    std::lock_guard<std::mutex> lock(mutex_);
    if (store_path_.empty()) return;
    write_text_file_atomic(store_path_, store_.to_json_array().dump(2) + "\n");
}

std::optional<ExperienceRecord> ExperienceEngine::select(AgentRole role) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return select_experience(store_, role);
}

std::optional<std::string> ExperienceEngine::review(
    const std::string& output, AgentRole role, const std::optional<ExperienceRecord>& exemplar,
    const std::vector<std::string>& checklist) {
    std::string exemplar_block;
    if (exemplar) {
        exemplar_block = "\nA past review that needed few follow-ups, for guidance:\n" +
                         exemplar->review_text + "\n";
    }
    std::map<std::string, std::string> vars{{"role", to_string(role)},
                                            {"checklist", join(checklist, "\n")},
                                            {"exemplar_block", exemplar_block},
                                            {"output", output}};
    ChatRequest request;
    request.agent_role = AgentRole::manager;
    request.request_tag = "review";
    request.system_prompt = prompts_.system_prompt(AgentRole::manager);
    request.user_prompt = PromptLibrary::render(prompts_.get(AgentRole::manager, "review"), vars);

    ChatResponse response = gateway_.complete(request);
    std::string verdict = trim(response.text);
    if (verdict == kAcceptSentinel) return std::nullopt;
    return verdict;
}

std::pair<std::string, ReviewOutcome> ExperienceEngine::run_loop(const ProduceFn& produce,
                                                                 AgentRole role) {
    ReviewOutcome outcome;
    std::vector<std::string> comments_history;
    std::string output;

    std::optional<ExperienceRecord> exemplar = select(role);
    if (exemplar) outcome.review_used = exemplar->review_id;
    std::vector<std::string> checklist = checklist_for(role);

    try {
        output = produce(std::nullopt);
        for (int x = 0; x < max_iters_; ++x) {
            std::optional<std::string> comments = review(output, role, exemplar, checklist);
            if (!comments) {
                outcome.accepted = true;
                outcome.comments.reset();
                break;
            }
            comments_history.push_back(*comments);
            outcome.comments = comments;
            output = produce(comments);
            ++outcome.iterations_used;
        }
    } catch (const Error& e) {
        logger_.warn("experience loop aborted for " + to_string(role) + ": " + e.what());
        outcome.accepted = false;
        outcome.iterations_used = static_cast<int>(comments_history.size());
        record_outcome(role, comments_history, outcome.iterations_used,
                       exemplar ? std::optional<std::string>(exemplar->review_id) : std::nullopt);
        throw;
    }

    record_outcome(role, comments_history, outcome.iterations_used,
                   exemplar ? std::optional<std::string>(exemplar->review_id) : std::nullopt);
    return {output, outcome};
}

void ExperienceEngine::record_outcome(AgentRole role,
                                      const std::vector<std::string>& comments_history,
                                      int iterations_used,
                                      const std::optional<std::string>& exemplar_id) {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        if (!comments_history.empty()) {
            ExperienceRecord record;
            record.review_id = next_review_id();
            record.agent_role = role;
            record.review_text = comments_history.front();
            record.revision_count = std::max(iterations_used - 1, 0);
            record.usage_count = 0;
            store_.insert(std::move(record));
        }
        if (exemplar_id) {
            ExperienceRecord& exemplar = store_.at(*exemplar_id);
            exemplar.usage_count += 1;
            // Pessimistic aggregation across uses: keep the worst observed
            // follow-up count.
            exemplar.revision_count = std::max(exemplar.revision_count, iterations_used);
        }
    }
    save();
}

std::vector<std::string> ExperienceEngine::checklist_for(AgentRole role) const {
    std::vector<std::string> lines = prompts_.checklist(role);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = store_.by_role.find(role);
    if (it != store_.by_role.end()) {
        std::vector<std::string> ids = it->second;
        std::sort(ids.begin(), ids.end());
        for (const auto& id : ids) {
            std::string sentence = first_sentence(store_.records.at(id).review_text);
            if (!sentence.empty() &&
                std::find(lines.begin(), lines.end(), sentence) == lines.end()) {
                lines.push_back(std::move(sentence));
            }
        }
    }
    return lines;
}

std::string ExperienceEngine::next_review_id() {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "rv-%06d", ++id_counter_);
    return buf;
}

}  // namespace litrev
