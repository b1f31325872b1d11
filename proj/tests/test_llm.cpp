#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "ledro/errors.hpp"
#include "ledro/llm.hpp"

#include "test_util.hpp"

using namespace ledro;
using ledro::testutil::read_file;
using ledro::testutil::write_file;

namespace {

std::filesystem::path temp_dir(const std::string& leaf) {
    const auto dir = std::filesystem::temp_directory_path() / "ledro_llm_tests" / leaf;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Localhost chat-completion stub. Handlers are registered before the
/// listener thread starts so requests never race registration.
struct TestServer {
    httplib::Server svr;
    int port = 0;
    std::thread th;

    explicit TestServer(const std::function<void(httplib::Server&)>& setup) {
        setup(svr);
        port = svr.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        th = std::thread([this] { svr.listen_after_bind(); });
        svr.wait_until_ready();
    }

    ~TestServer() {
        svr.stop();
        th.join();
    }

    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    }
};

std::string chat_payload(const std::string& content) {
    nlohmann::json out;
    out["choices"] = nlohmann::json::array();
    out["choices"].push_back({{"message", {{"role", "assistant"}, {"content", content}}}});
    return out.dump();
}

LlmClientConfig http_config(const std::string& endpoint, const std::string& audit = "") {
    LlmClientConfig cfg;
    cfg.backend = "http";
    cfg.endpoint = endpoint;
    cfg.model = "test-model";
    cfg.audit_path = audit;
    cfg.backoff_s = 0.01;
    return cfg;
}

std::vector<LlmMessage> sample_messages() {
    return {{"system", "You size amplifiers."}, {"user", "Propose ranges."}};
}

std::vector<nlohmann::json> audit_lines(const std::string& path) {
    std::vector<nlohmann::json> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    return out;
}

} // namespace

TEST_CASE("split_scripted_responses: delimiter lines, CRLF, and outer blanks") {
    const std::string text =
        "first response\r\n"
        "-----\r\n"
        "\n"
        "second response\n"
        "spanning two lines\n"
        "-----\n"
        "------\n"
        "third keeps a six-dash line\n"
        "-----\n";
    const auto parts = split_scripted_responses(text);
    REQUIRE(parts.size() == 3);
    CHECK(parts[0] == "first response");
    CHECK(parts[1] == "second response\nspanning two lines");
    CHECK(parts[2] == "------\nthird keeps a six-dash line");
}

TEST_CASE("scripted backend: responses are consumed in order, exhaustion is a config error") {
    const auto dir = temp_dir("scripted_order");
    std::string fixture;
    for (int i = 1; i <= 10; ++i) {
        fixture += "response-" + std::to_string(i) + "\n";
        if (i < 10) fixture += "-----\n";
    }
    const auto path = (dir / "responses.txt").string();
    write_file(path, fixture);

    LlmClientConfig cfg;
    cfg.backend = "scripted";
    cfg.script_path = path;
    auto client = make_llm_client(cfg);
    for (int i = 1; i <= 10; ++i)
        CHECK(client->complete(sample_messages()) == "response-" + std::to_string(i));
    CHECK(client->calls_made() == 10);
    CHECK_THROWS_AS(client->complete(sample_messages()), ConfigError);
}

TEST_CASE("scripted backend: missing or empty fixture files are config errors") {
    LlmClientConfig cfg;
    cfg.backend = "scripted";
    cfg.script_path = "/nonexistent/responses.txt";
    CHECK_THROWS_AS(make_llm_client(cfg), ConfigError);

    const auto dir = temp_dir("scripted_empty");
    const auto path = (dir / "empty.txt").string();
    write_file(path, "\n-----\n\n");
    cfg.script_path = path;
    CHECK_THROWS_AS(make_llm_client(cfg), ConfigError);
}

TEST_CASE("LlmClientConfig: validation rejects bad settings") {
    LlmClientConfig cfg;
    cfg.backend = "telepathy";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = {};
    cfg.backend = "scripted";
    cfg.script_path = "";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = {};
    cfg.backend = "http";
    cfg.endpoint = "";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = http_config("http://127.0.0.1:1/x");
    cfg.temperature = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = http_config("http://127.0.0.1:1/x");
    cfg.max_tokens = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = http_config("http://127.0.0.1:1/x");
    cfg.max_attempts = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = http_config("no-scheme-here");
    CHECK_THROWS_AS(make_llm_client(cfg), ConfigError);
}

TEST_CASE("http backend: happy path flows sampling knobs into the outbound request record") {
    const auto dir = temp_dir("http_happy");
    const auto audit = (dir / "outbound_requests.jsonl").string();

    nlohmann::json seen_body;
    TestServer server([&](httplib::Server& svr) {
        svr.Post("/v1/chat/completions",
                 [&](const httplib::Request& req, httplib::Response& res) {
                     seen_body = nlohmann::json::parse(req.body);
                     res.set_content(chat_payload("nfin_M1: 4 to 8"), "application/json");
                 });
    });

    auto client = make_llm_client(http_config(server.endpoint(), audit));
    const auto reply = client->complete(sample_messages());
    CHECK(reply == "nfin_M1: 4 to 8");
    CHECK(client->calls_made() == 1);

    CHECK(seen_body["model"] == "test-model");
    CHECK(seen_body["temperature"].get<double>() == doctest::Approx(0.8));
    CHECK(seen_body["max_tokens"] == 1000);
    REQUIRE(seen_body["messages"].size() == 2);
    CHECK(seen_body["messages"][0]["role"] == "system");
    CHECK(seen_body["messages"][1]["role"] == "user");

    const auto records = audit_lines(audit);
    REQUIRE(records.size() == 1);
    CHECK(records[0]["temperature"].get<double>() == doctest::Approx(0.8));
    CHECK(records[0]["max_tokens"] == 1000);
    CHECK(records[0]["model"] == "test-model");
    CHECK(records[0]["status"] == 200);
    CHECK(records[0]["ok"] == true);
    CHECK(records[0]["attempts"] == 1);
    CHECK(records[0]["messages"].size() == 2);
}

TEST_CASE("http backend: greedy decoding sends temperature zero") {
    nlohmann::json seen_body;
    TestServer server([&](httplib::Server& svr) {
        svr.Post("/v1/chat/completions",
                 [&](const httplib::Request& req, httplib::Response& res) {
                     seen_body = nlohmann::json::parse(req.body);
                     res.set_content(chat_payload("ok"), "application/json");
                 });
    });
    auto cfg = http_config(server.endpoint());
    cfg.greedy_decoding = true;
    auto client = make_llm_client(cfg);
    CHECK(client->complete(sample_messages()) == "ok");
    CHECK(seen_body["temperature"].get<double>() == 0.0);
}

TEST_CASE("http backend: transient server errors are retried with backoff") {
    const auto dir = temp_dir("http_retry");
    const auto audit = (dir / "outbound_requests.jsonl").string();
    std::atomic<int> hits{0};
    TestServer server([&](httplib::Server& svr) {
        svr.Post("/v1/chat/completions",
                 [&](const httplib::Request&, httplib::Response& res) {
                     if (++hits <= 2) {
                         res.status = 500;
                         res.set_content("overloaded", "text/plain");
                         return;
                     }
                     res.set_content(chat_payload("recovered"), "application/json");
                 });
    });

    auto client = make_llm_client(http_config(server.endpoint(), audit));
    CHECK(client->complete(sample_messages()) == "recovered");
    CHECK(hits.load() == 3);

    const auto records = audit_lines(audit);
    REQUIRE(records.size() == 1);
    CHECK(records[0]["attempts"] == 3);
    CHECK(records[0]["ok"] == true);
}

TEST_CASE("http backend: persistent failure raises after the attempt budget") {
    const auto dir = temp_dir("http_fail");
    const auto audit = (dir / "outbound_requests.jsonl").string();
    std::atomic<int> hits{0};
    TestServer server([&](httplib::Server& svr) {
        svr.Post("/v1/chat/completions",
                 [&](const httplib::Request&, httplib::Response& res) {
                     ++hits;
                     res.status = 500;
                     res.set_content("down", "text/plain");
                 });
    });

    auto cfg = http_config(server.endpoint(), audit);
    cfg.max_attempts = 2;
    auto client = make_llm_client(cfg);
    CHECK_THROWS_AS(client->complete(sample_messages()), LlmTransportError);
    CHECK(hits.load() == 2);
    CHECK(client->calls_made() == 0);

    const auto records = audit_lines(audit);
    REQUIRE(records.size() == 1);
    CHECK(records[0]["ok"] == false);
    CHECK(records[0]["attempts"] == 2);
    CHECK(records[0]["status"] == 500);
}

TEST_CASE("http backend: malformed completion payloads count as transport failures") {
    TestServer server([&](httplib::Server& svr) {
        svr.Post("/v1/chat/completions",
                 [&](const httplib::Request&, httplib::Response& res) {
                     res.set_content("this is not json", "application/json");
                 });
    });
    auto cfg = http_config(server.endpoint());
    cfg.max_attempts = 1;
    auto client = make_llm_client(cfg);
    CHECK_THROWS_AS(client->complete(sample_messages()), LlmTransportError);
}

TEST_CASE("http backend: read timeout aborts the call") {
    TestServer server([&](httplib::Server& svr) {
        svr.Post("/v1/chat/completions",
                 [&](const httplib::Request&, httplib::Response& res) {
                     std::this_thread::sleep_for(std::chrono::milliseconds(400));
                     res.set_content(chat_payload("too late"), "application/json");
                 });
    });
    auto cfg = http_config(server.endpoint());
    cfg.timeout_s = 0.05;
    cfg.max_attempts = 1;
    auto client = make_llm_client(cfg);
    CHECK_THROWS_AS(client->complete(sample_messages()), LlmTransportError);
}

TEST_CASE("http backend: connection refused surfaces as a transport error") {
    auto cfg = http_config("http://127.0.0.1:9/v1/chat/completions");
    cfg.max_attempts = 2;
    auto client = make_llm_client(cfg);
    CHECK_THROWS_AS(client->complete(sample_messages()), LlmTransportError);
}
