#include <atomic>
#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <sentifuse/remote_backend.hpp>

#include "support/fixtures.hpp"

namespace sentifuse {
namespace {

// Local stand-in for a chat-completion endpoint. The reply status and content are set per test.
class FakeEndpoint {
public:
    FakeEndpoint() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            last_body = req.body;
            last_auth = req.get_header_value("Authorization");
            res.status = status;
            if (status == 200) {
                nlohmann::json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
                res.set_content(raw_body.empty() ? reply.dump() : raw_body, "application/json");
            } else {
                res.set_content("{}", "application/json");
            }
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeEndpoint() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    std::atomic<int> hits{0};
    int status = 200;
    std::string content;
    std::string raw_body;
    std::string last_body;
    std::string last_auth;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

BackendProfile remote_profile(const std::string& endpoint, const std::string& key_env = "") {
    BackendProfile p;
    p.backend_id = "gpt-4";
    p.kind = BackendKind::remote_http;
    p.remote.endpoint = endpoint;
    p.remote.model = "gpt-4-turbo";
    p.remote.api_key_env = key_env;
    p.remote.timeout = std::chrono::seconds(5);
    return p;
}

Batch two_posts() {
    return Batch{Topic("health"),
                 {fixtures::post("p1", "a", "English", "health"), fixtures::post("p2", "b", "English", "health")}, 0};
}

TEST(RemoteHttpBackend, SendsChatRequestAndParsesReply) {
    FakeEndpoint server;
    server.content = "id,label\np1,positive\np2,Negative\n";
    ::setenv("SENTIFUSE_TEST_KEY", "sk-local", 1);
    RemoteHttpBackend backend(remote_profile(server.url(), "SENTIFUSE_TEST_KEY"));
    const auto r = backend.classify_batch("classify these", two_posts());
    ASSERT_EQ(r.verdicts.size(), 2u);
    EXPECT_EQ(r.verdicts[0].label, SentimentLabel::positive);
    EXPECT_EQ(r.verdicts[1].label, SentimentLabel::negative);
    EXPECT_EQ(server.last_auth, "Bearer sk-local");
    const auto body = nlohmann::json::parse(server.last_body);
    EXPECT_EQ(body["model"], "gpt-4-turbo");
    EXPECT_EQ(body["messages"][0]["role"], "user");
    EXPECT_EQ(body["messages"][0]["content"], "classify these");
    EXPECT_EQ(body["temperature"], 0.0);
}

TEST(RemoteHttpBackend, MissingKeyVariableFailsBeforeAnyRequest) {
    FakeEndpoint server;
    ::unsetenv("SENTIFUSE_UNSET_KEY");
    RemoteHttpBackend backend(remote_profile(server.url(), "SENTIFUSE_UNSET_KEY"));
    try {
        backend.classify_batch("x", two_posts());
        FAIL();
    } catch (const TransportError&) {
        FAIL() << "must not be retryable";
    } catch (const BackendError& e) {
        EXPECT_NE(std::string(e.what()).find("SENTIFUSE_UNSET_KEY"), std::string::npos);
    }
    EXPECT_EQ(server.hits, 0);
}

TEST(RemoteHttpBackend, StatusCodesMapToErrorKinds) {
    FakeEndpoint server;
    RemoteHttpBackend backend(remote_profile(server.url()));
    server.status = 429;
    EXPECT_THROW(backend.classify_batch("x", two_posts()), RateLimitError);
    server.status = 503;
    EXPECT_THROW(backend.classify_batch("x", two_posts()), TransportError);
    server.status = 402;
    EXPECT_THROW(backend.classify_batch("x", two_posts()), QuotaError);
    server.status = 400;
    try {
        backend.classify_batch("x", two_posts());
        FAIL();
    } catch (const TransportError&) {
        FAIL() << "4xx is not retryable";
    } catch (const BackendError& e) {
        EXPECT_EQ(e.backend_id(), "gpt-4");
    }
    server.status = 200;
    server.raw_body = "not json";
    EXPECT_THROW(backend.classify_batch("x", two_posts()), TransportError);
}

TEST(RemoteHttpBackend, UnreachableEndpointIsTransportError) {
    auto p = remote_profile("http://127.0.0.1:1");
    p.remote.timeout = std::chrono::seconds(1);
    RemoteHttpBackend backend(p);
    EXPECT_THROW(backend.classify_batch("x", two_posts()), TransportError);
}

TEST(RemoteHttpBackend, RetryRecoversFromRateLimit) {
    FakeEndpoint server;
    server.status = 429;
    RemoteHttpBackend backend(remote_profile(server.url()));
    std::vector<std::chrono::milliseconds> slept;
    int calls = 0;
    auto out = run_with_retry(backend, PromptTemplate{}, two_posts(), RetryPolicy{}, [&](std::chrono::milliseconds d) {
        slept.push_back(d);
        if (++calls == 1) {
            server.status = 200;
            server.content = "p1,neu\np2,pos";
        }
    });
    EXPECT_TRUE(out.complete());
    EXPECT_EQ(server.hits, 2);
    EXPECT_EQ(slept.size(), 1u);
}

TEST(RateGate, SpacesRequests) {
    RateGate gate(std::chrono::milliseconds(30));
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 4; ++i) gate.wait();
    EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(90));
}

}  // namespace
}  // namespace sentifuse
