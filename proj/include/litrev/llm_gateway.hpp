#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "litrev/common.hpp"
#include "litrev/domain.hpp"

namespace litrev {

// ---------------------------------------------------------------------------
// Requests and responses
// ---------------------------------------------------------------------------

struct TokenUsage {
    std::int64_t prompt = 0;
    std::int64_t completion = 0;

    TokenUsage& operator+=(const TokenUsage& other) {
        prompt += other.prompt;
        completion += other.completion;
        return *this;
    }
};

struct ChatRequest {
    AgentRole agent_role = AgentRole::manager;
    std::string system_prompt;
    std::string user_prompt;
    int max_output_tokens = 4096;
    double temperature = 0.0;
    std::string request_tag;  // purpose label, e.g. "outline-expand"
};

struct ChatResponse {
    std::string text;
    TokenUsage token_usage;
    std::string backend_id;
};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class GatewayError : public Error {
public:
    using Error::Error;
};

/// A transient transport failure; the gateway retries these with backoff.
class TransportError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class TransportExhaustedError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class AuthenticationError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class RequestTooLargeError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

/// The scripted backend has no remaining entry for the request's
/// (agent_role, request_tag) sequence.
class ScriptMissError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

/// A structured response stayed unparseable after the single repair re-prompt.
class StructuredOutputError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual std::string id() const = 0;
};

struct ScriptEntry {
    AgentRole role = AgentRole::manager;
    std::string tag;
    std::string text;
};

/// Deterministic mock backend. Entries form one FIFO queue per
/// (agent_role, request_tag); each complete() pops the next entry for its
/// queue and reports word counts as token usage. Cursors can be exported and
/// restored so a resumed run replays from the position the interrupted run
/// had committed.
class ScriptedChatBackend : public ChatBackend {
public:
    explicit ScriptedChatBackend(std::vector<ScriptEntry> entries);
    static std::shared_ptr<ScriptedChatBackend> from_file(const std::string& path);

    ChatResponse complete(const ChatRequest& request) override;
    std::string id() const override { return "scripted"; }

    std::map<std::string, std::int64_t> cursors() const;
    void fast_forward(const std::map<std::string, std::int64_t>& cursors);

    std::int64_t calls_for(AgentRole role, const std::string& tag) const;

private:
    struct Queue {
        std::vector<std::string> texts;
        std::size_t next = 0;
    };
    static std::string key(AgentRole role, const std::string& tag);

    mutable std::mutex mutex_;
    std::map<std::string, Queue> queues_;
};

/// Wraps a callable; handy for fault injection and computed responses.
class FunctionChatBackend : public ChatBackend {
public:
    using Fn = std::function<std::string(const ChatRequest&)>;
    explicit FunctionChatBackend(Fn fn, std::string id = "function")
        : fn_(std::move(fn)), id_(std::move(id)) {}

    ChatResponse complete(const ChatRequest& request) override;
    std::string id() const override { return id_; }

private:
    Fn fn_;
    std::string id_;
};

struct HttpChatOptions {
    std::string endpoint;  // e.g. https://api.example.com
    std::string path = "/v1/chat/completions";
    std::string api_key;
    std::string model;
    int timeout_seconds = 120;
};

/// OpenAI-compatible chat-completion client over HTTP(S).
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(HttpChatOptions options);
    ChatResponse complete(const ChatRequest& request) override;
    std::string id() const override { return "http:" + options_.model; }

private:
    HttpChatOptions options_;
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

struct GatewayOptions {
    int max_attempts = 4;       // total attempts per call, including the first
    int backoff_base_ms = 200;  // 0 disables sleeping between retries
    int permits = 4;            // max concurrent in-flight requests
    bool deterministic = false; // forces temperature 0 on every request
    std::uint64_t seed = 0;     // backoff jitter
};

class LlmGateway {
public:
    LlmGateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options = {},
               Logger logger = {});

    /// Sends the request, retrying transient transport failures with
    /// exponential backoff up to the attempt cap. Authentication and
    /// request-too-large errors are never retried.
    ChatResponse complete(const ChatRequest& request);

    TokenUsage total_usage() const;
    std::int64_t total_calls() const;
    ChatBackend& backend() { return *backend_; }

private:
    std::shared_ptr<ChatBackend> backend_;
    GatewayOptions options_;
    Logger logger_;
    mutable std::mutex mutex_;
    TokenUsage usage_;
    std::int64_t calls_ = 0;
    std::uint64_t jitter_state_;
    std::unique_ptr<std::counting_semaphore<>> permits_;
};

// ---------------------------------------------------------------------------
// Structured output
// ---------------------------------------------------------------------------

struct ParseReport {
    bool ok = false;
    std::string message;  // names the failure, e.g. a missing closing fence
};

struct ShapeSpec {
    std::string summary;  // human-readable expectation, used in repair prompts
    std::function<std::optional<std::string>(const json&)> validate;  // returns an issue or nullopt
};

struct ParseOutcome {
    std::optional<json> value;
    ParseReport report;
};

/// Extracts the first fenced JSON object from the response text (prose before
/// or after the block is ignored), parses it and validates it against the
/// shape. A response that is bare JSON with no fence is also accepted.
ParseOutcome parse_structured(const ChatResponse& response, const ShapeSpec& shape);

/// Canonical structured-output serialization: one fenced JSON block.
std::string serialize_structured(const json& value);

struct StructuredResult {
    json value;
    std::string raw_text;  // the model text the value was parsed from
};

/// complete() plus parse_structured(), with exactly one automatic repair
/// re-prompt on structural failure. Throws StructuredOutputError if the
/// repaired response still does not parse.
StructuredResult complete_structured(LlmGateway& gateway, const ChatRequest& request,
                                     const ShapeSpec& shape);

// Common shapes.
ShapeSpec shape_object_with_string_array(const std::string& key, std::size_t min_items);
ShapeSpec shape_object_with_key(const std::string& key);

}  // namespace litrev
