// SPDX-License-Identifier: Apache-2.0
// HTTP clients for the remote services.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <semgro/critic.hpp>
#include <semgro/lm.hpp>
#include <semgro/retriever.hpp>

#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

namespace semgro
{

using nlohmann::json;

namespace
{
    std::unique_ptr<httplib::Client> make_client(std::string const& base_url, int timeout_seconds)
    {
        if (base_url.empty())
            throw ConfigError("no base url configured");
        auto client = std::make_unique<httplib::Client>(base_url);
        if (!client->is_valid())
            throw ConfigError(fmt::format("invalid base url '{}'", base_url));
        client->set_connection_timeout(timeout_seconds, 0);
        client->set_read_timeout(timeout_seconds, 0);
        client->set_write_timeout(timeout_seconds, 0);
        return client;
    }

    bool retryable_status(int status)
    {
        return status == 408 || status == 429 || status >= 500;
    }
} // namespace

RemoteBackend::RemoteBackend(RemoteConfig config): _config(std::move(config))
{
    if (_config.base_url.empty())
        throw ConfigError("remote backend needs a base url");
    if (_config.model.empty())
        throw ConfigError("remote backend needs a model name");
    if (_config.max_retries < 0 || _config.timeout_seconds <= 0)
        throw ConfigError("remote backend retry and timeout settings must be positive");
}

std::string RemoteBackend::complete(CompletionRequest const& request)
{
    check_request(request);
    auto client = make_client(_config.base_url, _config.timeout_seconds);

    httplib::Headers headers;
    // the token never leaves the environment except in this header
    if (char const* token = std::getenv(_config.token_env.c_str()); token && *token)
        headers.emplace("Authorization", fmt::format("Bearer {}", token));

    json const body = {
        { "model", _config.model },
        { "messages", json::array({ { { "role", "user" }, { "content", request.prompt } } }) },
        { "temperature", request.temperature },
        { "max_tokens", request.max_tokens },
    };
    auto const payload = body.dump();

    std::string lastProblem;
    bool timedOut = false;
    for (int attempt = 0; attempt <= _config.max_retries; ++attempt)
    {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(_config.backoff_ms << (attempt - 1)));
        ++_sent;
        auto res = client->Post(_config.path, headers, payload, "application/json");
        if (!res)
        {
            auto const err = res.error();
            timedOut = err == httplib::Error::Read || err == httplib::Error::Write
                       || err == httplib::Error::ConnectionTimeout;
            lastProblem = httplib::to_string(err);
            continue;
        }
        timedOut = false;
        if (retryable_status(res->status))
        {
            lastProblem = fmt::format("status {}", res->status);
            continue;
        }
        if (res->status != 200)
            throw TransportError(fmt::format("completion service returned status {}", res->status));

        json reply;
        try
        {
            reply = json::parse(res->body);
        }
        catch (json::parse_error const&)
        {
            throw TransportError("completion service returned malformed json");
        }
        auto const choices = reply.find("choices");
        if (choices == reply.end() || !choices->is_array() || choices->empty())
            throw EmptyResponseError("completion has no choices");
        auto const& choice = choices->front();
        if (choice.value("finish_reason", std::string {}) == "content_filter")
            throw RefusalError("completion was filtered");
        auto const& message = choice.value("message", json::object());
        if (message.contains("refusal") && message["refusal"].is_string() && !message["refusal"].get<std::string>().empty())
            throw RefusalError(fmt::format("model refused: {}", message["refusal"].get<std::string>()));
        std::string content;
        if (message.contains("content") && message["content"].is_string())
            content = message["content"].get<std::string>();
        else if (choice.contains("text") && choice["text"].is_string())
            content = choice["text"].get<std::string>();
        if (trim(content).empty())
            throw EmptyResponseError("completion content is empty");
        return content;
    }
    auto const what = fmt::format("completion request failed after {} attempts: {}", _config.max_retries + 1, lastProblem);
    if (timedOut)
        throw TimeoutError(what);
    throw TransportError(what);
}

// Embeddings -------------------------------------------------------------------

HttpEmbedder::HttpEmbedder(HttpEmbedderConfig config): _config(std::move(config))
{
    if (_config.base_url.empty())
        throw ConfigError("http embedder needs a base url");
    if (_config.dimension == 0)
        throw ConfigError("http embedder needs a dimension");
}

std::string HttpEmbedder::id() const
{
    return fmt::format("http:{}{}:{}", _config.base_url, _config.path, _config.dimension);
}

EmbeddingVector HttpEmbedder::embed(std::string_view text) const
{
    if (trim(text).empty())
        throw Error("cannot embed empty text");
    auto client = make_client(_config.base_url, _config.timeout_seconds);
    json const body = { { "text", std::string(text) } };
    auto res = client->Post(_config.path, body.dump(), "application/json");
    if (!res)
        throw Error(fmt::format("embedding request failed: {}", httplib::to_string(res.error())));
    if (res->status != 200)
        throw Error(fmt::format("embedding service returned status {}", res->status));
    std::vector<double> values;
    try
    {
        values = json::parse(res->body).at("embedding").get<std::vector<double>>();
    }
    catch (json::exception const& e)
    {
        throw Error(std::string("malformed embedding reply: ") + e.what());
    }
    if (values.size() != _config.dimension)
        throw Error(fmt::format("embedding has dimension {}, expected {}", values.size(), _config.dimension));
    return EmbeddingVector(std::move(values));
}

// Perception -------------------------------------------------------------------

HttpPerception::HttpPerception(HttpPerceptionConfig config): _config(std::move(config))
{
    if (_config.base_url.empty())
        throw ConfigError("http perception needs a base url");
}

Perception HttpPerception::perceive(Observation const& obs)
{
    auto client = make_client(_config.base_url, _config.timeout_seconds);
    json const body = { { "snapshot_id", obs.snapshot_id }, { "room", obs.room } };
    auto res = client->Post(_config.path, body.dump(), "application/json");
    if (!res)
        throw TransportError(fmt::format("perception request failed: {}", httplib::to_string(res.error())));
    if (res->status != 200)
        throw TransportError(fmt::format("perception service returned status {}", res->status));
    Perception p;
    try
    {
        auto const j = json::parse(res->body);
        for (auto const& n: j.at("object_names"))
            p.object_names.insert(n.get<std::string>());
        auto const states = j.value("object_states", json::object());
        for (auto const& [k, v]: states.items())
            p.object_states.emplace(k, v.get<std::string>());
    }
    catch (json::exception const& e)
    {
        throw TransportError(std::string("malformed perception reply: ") + e.what());
    }
    check_perception(p);
    return p;
}

} // namespace semgro
