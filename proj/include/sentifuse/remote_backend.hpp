#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "backends.hpp"

namespace sentifuse {

// Single-turn chat-completion adapter. The API key is read from the environment variable
// named in the profile at request time.
class RemoteHttpBackend : public Backend {
public:
    explicit RemoteHttpBackend(BackendProfile profile)
        : Backend(std::move(profile)), gate_(this->profile().remote.min_interval) {
        if (this->profile().remote.endpoint.empty()) throw BackendError(id(), "remote backend needs an endpoint");
    }

    std::string request_body(const std::string& prompt) const {
        const auto& r = profile().remote;
        nlohmann::ordered_json body;
        body["model"] = r.model.empty() ? id() : r.model;
        body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
        body["temperature"] = r.temperature;
        return body.dump();
    }

    ParseResult classify_batch(const std::string& prompt, const Batch& batch) override {
        const auto& r = profile().remote;
        httplib::Headers headers;
        if (!r.api_key_env.empty()) {
            const char* key = std::getenv(r.api_key_env.c_str());
            if (!key || !*key) throw BackendError(id(), "environment variable " + r.api_key_env + " is not set");
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        gate_.wait();
        httplib::Client client(r.endpoint);
        client.set_connection_timeout(r.timeout);
        client.set_read_timeout(r.timeout);
        auto res = client.Post(r.path, headers, request_body(prompt), "application/json");
        const std::string where = " for " + describe_batch(batch);
        if (!res) throw TransportError(id(), "request failed (" + httplib::to_string(res.error()) + ")" + where);
        if (res->status == 429) throw RateLimitError(id(), "rate limited (HTTP 429)" + where);
        if (res->status == 402) throw QuotaError(id(), "quota exhausted (HTTP 402)" + where);
        if (res->status >= 500) throw TransportError(id(), "HTTP " + std::to_string(res->status) + where);
        if (res->status != 200) throw BackendError(id(), "HTTP " + std::to_string(res->status) + where);

        std::string content;
        try {
            auto reply = nlohmann::json::parse(res->body);
            content = reply.at(nlohmann::json::json_pointer(r.reply_pointer)).get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(id(), std::string("malformed reply body: ") + e.what() + where);
        }
        return parse_response(content, batch, id());
    }

private:
    RateGate gate_;
};

}  // namespace sentifuse
