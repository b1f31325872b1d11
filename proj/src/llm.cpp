#include "ledro/llm.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ledro/errors.hpp"

namespace ledro {

namespace {

std::string trim_outer(const std::string& s) {
    const char* ws = " \t\r\n";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

class ScriptedClient final : public LlmClient {
public:
    explicit ScriptedClient(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot open scripted response file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        responses_ = split_scripted_responses(buf.str());
        if (responses_.empty())
            throw ConfigError("scripted response file holds no responses: " + path);
    }

    std::string complete(const std::vector<LlmMessage>&) override {
        if (next_ >= responses_.size())
            throw ConfigError("scripted responses exhausted after " +
                              std::to_string(responses_.size()) + " calls");
        return responses_[next_++];
    }

    std::size_t calls_made() const override { return next_; }

private:
    std::vector<std::string> responses_;
    std::size_t next_ = 0;
};

struct SplitUrl {
    std::string base; // scheme://host[:port]
    std::string path; // leading slash, "/" when absent
};

SplitUrl split_url(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint must be a full URL: " + endpoint);
    const auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

class HttpClient final : public LlmClient {
public:
    explicit HttpClient(LlmClientConfig cfg) : cfg_(std::move(cfg)), url_(split_url(cfg_.endpoint)) {}

    std::string complete(const std::vector<LlmMessage>& messages) override {
        nlohmann::json payload;
        payload["model"] = cfg_.model;
        payload["temperature"] = cfg_.greedy_decoding ? 0.0 : cfg_.temperature;
        payload["max_tokens"] = cfg_.max_tokens;
        auto& msgs = payload["messages"] = nlohmann::json::array();
        for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
        const std::string body = payload.dump();

        int last_status = 0;
        std::string failure = "no attempt made";
        for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
            if (attempt > 1) {
                const double delay = cfg_.backoff_s * static_cast<double>(1 << (attempt - 2));
                std::this_thread::sleep_for(std::chrono::duration<double>(delay));
            }
            httplib::Client cli(url_.base);
            cli.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_s));
            cli.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_s));
            auto res = cli.Post(url_.path, body, "application/json");
            last_status = res ? res->status : 0;
            if (!res) {
                failure = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status < 200 || res->status >= 300) {
                failure = "http status " + std::to_string(res->status);
                continue;
            }
            auto doc = nlohmann::json::parse(res->body, nullptr, false);
            if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty() ||
                !doc["choices"][0].contains("message") ||
                !doc["choices"][0]["message"].contains("content")) {
                failure = "malformed completion payload";
                continue;
            }
            write_audit(payload, attempt, last_status, true);
            ++calls_;
            return doc["choices"][0]["message"]["content"].get<std::string>();
        }
        write_audit(payload, cfg_.max_attempts, last_status, false);
        throw LlmTransportError("llm request failed after " + std::to_string(cfg_.max_attempts) +
                                " attempts (" + failure + ")");
    }

    std::size_t calls_made() const override { return calls_; }

private:
    /// One outbound-request record per call, appended as a JSON line.
    void write_audit(const nlohmann::json& payload, int attempts, int status, bool ok) const {
        if (cfg_.audit_path.empty()) return;
        nlohmann::json rec;
        rec["endpoint"] = cfg_.endpoint;
        rec["model"] = cfg_.model;
        rec["temperature"] = payload["temperature"];
        rec["max_tokens"] = payload["max_tokens"];
        rec["messages"] = payload["messages"];
        rec["attempts"] = attempts;
        rec["status"] = status;
        rec["ok"] = ok;
        std::ofstream out(cfg_.audit_path, std::ios::app | std::ios::binary);
        out << rec.dump() << "\n";
    }

    LlmClientConfig cfg_;
    SplitUrl url_;
    std::size_t calls_ = 0;
};

} // namespace

void LlmClientConfig::validate() const {
    if (backend != "scripted" && backend != "http")
        throw ConfigError("llm backend must be \"scripted\" or \"http\": " + backend);
    if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
    if (max_tokens <= 0) throw ConfigError("max generation length must be positive");
    if (timeout_s <= 0.0) throw ConfigError("request timeout must be positive");
    if (max_attempts < 1) throw ConfigError("max attempts must be at least 1");
    if (backoff_s < 0.0) throw ConfigError("retry backoff must be >= 0");
    if (backend == "scripted" && script_path.empty())
        throw ConfigError("scripted backend needs a response file path");
    if (backend == "http" && endpoint.empty())
        throw ConfigError("http backend needs an endpoint URL");
}

std::unique_ptr<LlmClient> make_llm_client(const LlmClientConfig& cfg) {
    cfg.validate();
    if (cfg.backend == "scripted") return std::make_unique<ScriptedClient>(cfg.script_path);
    return std::make_unique<HttpClient>(cfg);
}

std::vector<std::string> split_scripted_responses(const std::string& text) {
    std::vector<std::string> out;
    std::string chunk;
    std::istringstream lines(text);
    std::string line;
    auto flush = [&] {
        const std::string trimmed = trim_outer(chunk);
        if (!trimmed.empty()) out.push_back(trimmed);
        chunk.clear();
    };
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "-----") {
            flush();
            continue;
        }
        chunk += line;
        chunk += '\n';
    }
    flush();
    return out;
}

} // namespace ledro
