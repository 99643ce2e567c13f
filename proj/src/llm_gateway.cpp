#include "litrev/llm_gateway.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "litrev/text_metrics.hpp"

namespace litrev {

namespace {

TokenUsage word_count_usage(const ChatRequest& request, const std::string& response_text) {
    TokenUsage usage;
    usage.prompt = static_cast<std::int64_t>(word_count(request.system_prompt) +
                                             word_count(request.user_prompt));
    usage.completion = static_cast<std::int64_t>(word_count(response_text));
    return usage;
}

}  // namespace

// ---------------------------------------------------------------------------
// ScriptedChatBackend
// ---------------------------------------------------------------------------

ScriptedChatBackend::ScriptedChatBackend(std::vector<ScriptEntry> entries) {
    for (auto& e : entries) {
        queues_[key(e.role, e.tag)].texts.push_back(std::move(e.text));
    }
}

std::string ScriptedChatBackend::key(AgentRole role, const std::string& tag) {
    return to_string(role) + "/" + tag;
}

std::shared_ptr<ScriptedChatBackend> ScriptedChatBackend::from_file(const std::string& path) {
    json j = json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw SchemaError("chat script " + path + ": not a JSON object");
    }
    std::vector<ScriptEntry> entries;
    for (auto it = j.begin(); it != j.end(); ++it) {
        AgentRole role = agent_role_from_string(it.key());
        if (!it.value().is_array()) {
            throw SchemaError("chat script " + path + ": role '" + it.key() +
                              "' must map to an array");
        }
        for (const auto& e : it.value()) {
            if (!e.is_object() || !e.contains("tag") || !e.contains("text") ||
                !e["tag"].is_string() || !e["text"].is_string()) {
                throw SchemaError("chat script " + path +
                                  ": entries must be objects with string 'tag' and 'text'");
            }
            entries.push_back({role, e["tag"].get<std::string>(), e["text"].get<std::string>()});
        }
    }
    return std::make_shared<ScriptedChatBackend>(std::move(entries));
}

ChatResponse ScriptedChatBackend::complete(const ChatRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = queues_.find(key(request.agent_role, request.request_tag));
    if (it == queues_.end() || it->second.next >= it->second.texts.size()) {
        throw ScriptMissError("script has no entry for " +
                              key(request.agent_role, request.request_tag) + " (call #" +
                              std::to_string(it == queues_.end() ? 1 : it->second.next + 1) +
                              ")");
    }
    const std::string& text = it->second.texts[it->second.next++];
    ChatResponse response;
    response.text = text;
    response.token_usage = word_count_usage(request, text);
    response.backend_id = id();
    return response;
}

std::map<std::string, std::int64_t> ScriptedChatBackend::cursors() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::map<std::string, std::int64_t> out;
    for (const auto& [k, q] : queues_) {
        if (q.next > 0) out[k] = static_cast<std::int64_t>(q.next);
    }
    return out;
}

void ScriptedChatBackend::fast_forward(const std::map<std::string, std::int64_t>& cursors) {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const auto& [k, n] : cursors) {
        auto it = queues_.find(k);
        if (it == queues_.end()) {
            throw SchemaError("script cursor references unknown queue " + k);
        }
        if (n < 0 || static_cast<std::size_t>(n) > it->second.texts.size()) {
            throw SchemaError("script cursor out of range for queue " + k);
        }
        it->second.next = static_cast<std::size_t>(n);
    }
}

std::int64_t ScriptedChatBackend::calls_for(AgentRole role, const std::string& tag) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = queues_.find(key(role, tag));
    return it == queues_.end() ? 0 : static_cast<std::int64_t>(it->second.next);
}

// ---------------------------------------------------------------------------
// FunctionChatBackend
// ---------------------------------------------------------------------------

ChatResponse FunctionChatBackend::complete(const ChatRequest& request) {
    ChatResponse response;
    response.text = fn_(request);
    response.token_usage = word_count_usage(request, response.text);
    response.backend_id = id_;
    return response;
}

// ---------------------------------------------------------------------------
// HttpChatBackend
// ---------------------------------------------------------------------------

HttpChatBackend::HttpChatBackend(HttpChatOptions options) : options_(std::move(options)) {
    if (options_.endpoint.empty()) throw GatewayError("http chat backend: endpoint not set");
}

ChatResponse HttpChatBackend::complete(const ChatRequest& request) {
    httplib::Client client(options_.endpoint);
    client.set_connection_timeout(options_.timeout_seconds, 0);
    client.set_read_timeout(options_.timeout_seconds, 0);

    json body{{"model", options_.model},
              {"messages",
               json::array({json{{"role", "system"}, {"content", request.system_prompt}},
                            json{{"role", "user"}, {"content", request.user_prompt}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_output_tokens}};

    httplib::Headers headers;
    if (!options_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + options_.api_key);
    }

    auto result = client.Post(options_.path, headers, body.dump(), "application/json");
    if (!result) {
        throw TransportError("chat endpoint unreachable: " + httplib::to_string(result.error()));
    }
    if (result->status == 401 || result->status == 403) {
        throw AuthenticationError("chat endpoint rejected credentials (HTTP " +
                                  std::to_string(result->status) + ")");
    }
    if (result->status == 413) {
        throw RequestTooLargeError("chat request too large (HTTP 413)");
    }
    if (result->status == 429 || result->status >= 500) {
        throw TransportError("chat endpoint transient failure (HTTP " +
                             std::to_string(result->status) + ")");
    }
    if (result->status != 200) {
        throw GatewayError("chat endpoint error (HTTP " + std::to_string(result->status) +
                           "): " + result->body);
    }

    json j = json::parse(result->body, nullptr, false);
    if (j.is_discarded()) throw GatewayError("chat endpoint returned invalid JSON");
    ChatResponse response;
    try {
        response.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw GatewayError(std::string("unexpected chat completion payload: ") + e.what());
    }
    if (j.contains("usage") && j["usage"].is_object()) {
        response.token_usage.prompt = j["usage"].value("prompt_tokens", 0);
        response.token_usage.completion = j["usage"].value("completion_tokens", 0);
    }
    response.backend_id = id();
    return response;
}

// ---------------------------------------------------------------------------
// LlmGateway
// ---------------------------------------------------------------------------

LlmGateway::LlmGateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options,
                       Logger logger)
    : backend_(std::move(backend)), options_(options), logger_(std::move(logger)),
      jitter_state_(options.seed ^ 0x9E3779B97F4A7C15ULL) {
    if (!backend_) throw GatewayError("gateway requires a backend");
    if (options_.max_attempts < 1) options_.max_attempts = 1;
    if (options_.permits < 1) options_.permits = 1;
    permits_ = std::make_unique<std::counting_semaphore<>>(options_.permits);
}

ChatResponse LlmGateway::complete(const ChatRequest& request) {
    ChatRequest effective = request;
    if (options_.deterministic) effective.temperature = 0.0;
    if (effective.system_prompt.empty() || effective.user_prompt.empty()) {
        throw GatewayError("chat request prompts must be non-empty (tag " + request.request_tag +
                           ")");
    }
    if (effective.max_output_tokens < 1) {
        throw GatewayError("max_output_tokens must be >= 1");
    }

    int attempt = 0;
    while (true) {
        ++attempt;
        try {
            ChatResponse response;
            {
                // Bound concurrent in-flight requests.
                permits_->acquire();
                struct Release {
                    std::counting_semaphore<>* sem;
                    ~Release() { sem->release(); }
                } release{permits_.get()};
                response = backend_->complete(effective);
            }
            std::lock_guard<std::mutex> lock(mutex_);
            usage_ += response.token_usage;
            ++calls_;
            return response;
        } catch (const TransportError& e) {
            if (attempt >= options_.max_attempts) {
                throw TransportExhaustedError("transport failed after " +
                                              std::to_string(attempt) +
                                              " attempts: " + e.what());
            }
            int delay_ms = 0;
            if (options_.backoff_base_ms > 0) {
                std::uint64_t jitter;
                {
                    std::lock_guard<std::mutex> lock(mutex_);
                    jitter_state_ = jitter_state_ * 6364136223846793005ULL + 1442695040888963407ULL;
                    jitter = (jitter_state_ >> 33) % 97;
                }
                delay_ms = options_.backoff_base_ms * (1 << (attempt - 1)) +
                           static_cast<int>(jitter);
            }
            logger_.warn("transient chat failure (attempt " + std::to_string(attempt) + "/" +
                         std::to_string(options_.max_attempts) + "), retrying: " + e.what());
            if (delay_ms > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            }
        }
    }
}

TokenUsage LlmGateway::total_usage() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return usage_;
}

std::int64_t LlmGateway::total_calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return calls_;
}

// ---------------------------------------------------------------------------
// Structured output
// ---------------------------------------------------------------------------

namespace {

// Finds the first fenced block. Returns the inner text, or nullopt plus a
// report message describing what is malformed.
std::optional<std::string> extract_fenced(const std::string& text, std::string& issue) {
    size_t open = text.find("```");
    if (open == std::string::npos) return std::nullopt;  // no fence at all; caller decides
    size_t content_start = text.find('\n', open + 3);
    if (content_start == std::string::npos) {
        issue = "fenced block opening ``` has no following content line";
        return std::nullopt;
    }
    ++content_start;
    size_t close = text.find("```", content_start);
    if (close == std::string::npos) {
        issue = "fenced block is missing its closing ``` delimiter";
        return std::nullopt;
    }
    return text.substr(content_start, close - content_start);
}

}  // namespace

ParseOutcome parse_structured(const ChatResponse& response, const ShapeSpec& shape) {
    ParseOutcome outcome;
    std::string fence_issue;
    std::optional<std::string> block = extract_fenced(response.text, fence_issue);
    if (!block && !fence_issue.empty()) {
        outcome.report = {false, fence_issue};
        return outcome;
    }
    std::string payload = block ? *block : response.text;

    json value = json::parse(payload, nullptr, false);
    if (value.is_discarded()) {
        outcome.report = {false, block ? "fenced block is not valid JSON"
                                       : "response contains neither a fenced JSON block nor "
                                         "bare JSON"};
        return outcome;
    }
    if (shape.validate) {
        if (auto issue = shape.validate(value)) {
            outcome.report = {false, "JSON does not match expected shape: " + *issue};
            return outcome;
        }
    }
    outcome.value = std::move(value);
    outcome.report = {true, ""};
    return outcome;
}

std::string serialize_structured(const json& value) {
    return "```json\n" + value.dump(2) + "\n```\n";
}

StructuredResult complete_structured(LlmGateway& gateway, const ChatRequest& request,
                                     const ShapeSpec& shape) {
    ChatResponse response = gateway.complete(request);
    ParseOutcome outcome = parse_structured(response, shape);
    if (outcome.value) return {std::move(*outcome.value), response.text};

    // One automatic repair re-prompt, then hard error.
    ChatRequest repair = request;
    repair.user_prompt = request.user_prompt +
                         "\n\nYour previous response could not be used: " +
                         outcome.report.message + "\nRespond again with exactly one fenced " +
                         "JSON block (```json ... ```) shaped as: " + shape.summary;
    ChatResponse repaired = gateway.complete(repair);
    ParseOutcome second = parse_structured(repaired, shape);
    if (second.value) return {std::move(*second.value), repaired.text};
    throw StructuredOutputError("response unparseable after repair (tag " + request.request_tag +
                                "): " + second.report.message);
}

ShapeSpec shape_object_with_string_array(const std::string& key, std::size_t min_items) {
    ShapeSpec shape;
    shape.summary = "{\"" + key + "\": [string, ...]}";
    shape.validate = [key, min_items](const json& j) -> std::optional<std::string> {
        if (!j.is_object()) return "expected an object";
        if (!j.contains(key) || !j[key].is_array()) return "missing array field '" + key + "'";
        const auto& arr = j[key];
        for (const auto& e : arr) {
            if (!e.is_string()) return "'" + key + "' must contain strings";
        }
        if (arr.size() < min_items)
            return "'" + key + "' needs at least " + std::to_string(min_items) + " items";
        return std::nullopt;
    };
    return shape;
}

ShapeSpec shape_object_with_key(const std::string& key) {
    ShapeSpec shape;
    shape.summary = "{\"" + key + "\": ...}";
    shape.validate = [key](const json& j) -> std::optional<std::string> {
        if (!j.is_object()) return "expected an object";
        if (!j.contains(key)) return "missing field '" + key + "'";
        return std::nullopt;
    };
    return shape;
}

}  // namespace litrev
