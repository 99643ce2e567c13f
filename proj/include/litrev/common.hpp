#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace litrev {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised when an on-disk document does not match the expected schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Raised when a structural precondition on domain data is violated.
class StructureError : public Error {
public:
    using Error::Error;
};

enum class LogLevel { debug, info, warn, error };

/// Lightweight injectable logger. Components keep a copy; tests swap in a
/// capturing sink to assert on emitted warnings.
class Logger {
public:
    using Sink = std::function<void(LogLevel, const std::string&)>;

    Logger();
    explicit Logger(Sink sink) : sink_(std::move(sink)) {}

    void log(LogLevel level, const std::string& msg) const {
        if (sink_) sink_(level, msg);
    }
    void debug(const std::string& msg) const { log(LogLevel::debug, msg); }
    void info(const std::string& msg) const { log(LogLevel::info, msg); }
    void warn(const std::string& msg) const { log(LogLevel::warn, msg); }
    void error(const std::string& msg) const { log(LogLevel::error, msg); }

private:
    Sink sink_;
};

std::string trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Splits text into sentences on '.', '!' and '?' boundaries. Trailing
/// punctuation stays with the sentence; empty fragments are dropped.
std::vector<std::string> split_sentences(std::string_view text);
std::string first_sentence(std::string_view text);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

std::string read_text_file(const std::string& path);
bool file_exists(const std::string& path);

/// Writes via a temp file in the same directory followed by a rename, so a
/// reader never observes a half-written file.
void write_text_file_atomic(const std::string& path, std::string_view content);

void ensure_directory(const std::string& path);

}  // namespace litrev
