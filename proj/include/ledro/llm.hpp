#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace ledro {

struct LlmMessage {
    std::string role; // "system" or "user"
    std::string content;
};

/// Backend selection plus the sampling knobs every request carries.
struct LlmClientConfig {
    std::string backend = "scripted"; // "scripted" or "http"
    std::string endpoint;             // http: full URL of the chat-completion route
    std::string model;                // http: model identifier sent with each request
    double temperature = 0.8;
    bool greedy_decoding = false; // overrides temperature with 0 in the request
    int max_tokens = 1000;
    double timeout_s = 60.0;
    int max_attempts = 3;   // http: total tries per call
    double backoff_s = 0.5; // http: first retry delay, doubled per attempt
    std::string script_path; // scripted: fixture file of canned responses
    std::string audit_path;  // http: append-only outbound request log (JSON lines)

    void validate() const;
};

/// One chat completion per call. Implementations are deterministic given
/// their configuration (the scripted backend replays a fixture file; the
/// live backend is as deterministic as the server behind it).
class LlmClient {
public:
    virtual ~LlmClient() = default;

    /// Returns the assistant text for this message list. Scripted backend:
    /// next canned response, ConfigError once the fixture is exhausted. Live
    /// backend: LlmTransportError after all attempts fail.
    virtual std::string complete(const std::vector<LlmMessage>& messages) = 0;

    virtual std::size_t calls_made() const = 0;
};

std::unique_ptr<LlmClient> make_llm_client(const LlmClientConfig& cfg);

/// Splits a canned-response fixture: responses are separated by lines that
/// consist of exactly `-----`, outer blank lines trimmed. Exposed for tests
/// and fixture tooling.
std::vector<std::string> split_scripted_responses(const std::string& text);

} // namespace ledro
