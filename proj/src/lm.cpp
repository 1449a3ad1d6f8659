// SPDX-License-Identifier: Apache-2.0
#include <semgro/lm.hpp>
#include <semgro/skilldb.hpp>

#include <ctime>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

namespace semgro
{

using nlohmann::json;

std::string_view to_string(Purpose purpose)
{
    switch (purpose)
    {
    case Purpose::Generator:
        return "generator";
    case Purpose::Retriever:
        return "retriever";
    case Purpose::Critic:
        return "critic";
    case Purpose::Chainer:
        return "chainer";
    case Purpose::Summarizer:
        return "summarizer";
    }
    return "?";
}

Purpose parse_purpose(std::string_view text)
{
    for (auto p: { Purpose::Generator, Purpose::Retriever, Purpose::Critic, Purpose::Chainer, Purpose::Summarizer })
        if (to_string(p) == text)
            return p;
    throw ParseError(fmt::format("unknown purpose tag '{}'", text));
}

void check_request(CompletionRequest const& request)
{
    if (request.prompt.empty())
        throw LmError("completion request has an empty prompt");
    if (request.temperature < 0.0)
        throw LmError("completion request has a negative temperature");
}

// Scripted -------------------------------------------------------------------

std::vector<ScriptRule> parse_rules(std::string_view json_text)
{
    json j;
    try
    {
        j = json::parse(json_text);
    }
    catch (json::parse_error const& e)
    {
        throw ParseError(std::string("malformed rules: ") + e.what());
    }
    std::vector<ScriptRule> rules;
    try
    {
        for (auto const& item: j.at("rules"))
            rules.push_back({ parse_purpose(item.at("tag").get<std::string>()), item.at("pattern").get<std::string>(),
                              item.at("response").get<std::string>() });
    }
    catch (json::exception const& e)
    {
        throw ParseError(std::string("bad rule field: ") + e.what());
    }
    return rules;
}

std::vector<ScriptRule> load_rules(std::filesystem::path const& path)
{
    return parse_rules(read_file(path));
}

ScriptedBackend::ScriptedBackend(std::string name, std::vector<ScriptRule> rules): _name(std::move(name))
{
    for (auto& r: rules)
        add_rule(std::move(r));
}

void ScriptedBackend::add_rule(ScriptRule rule)
{
    try
    {
        std::regex re(rule.pattern, std::regex::ECMAScript);
        std::lock_guard lock(_mutex);
        _rules.push_back({ std::move(rule), std::move(re) });
    }
    catch (std::regex_error const& e)
    {
        throw ConfigError(fmt::format("bad rule pattern '{}': {}", rule.pattern, e.what()));
    }
}

void ScriptedBackend::add_handler(Purpose tag, ScriptHandler handler)
{
    std::lock_guard lock(_mutex);
    _handlers.emplace(tag, std::move(handler));
}

std::string ScriptedBackend::complete(CompletionRequest const& request)
{
    check_request(request);
    std::vector<ScriptHandler> handlers;
    {
        std::lock_guard lock(_mutex);
        for (auto const& r: _rules)
        {
            if (r.rule.tag != request.tag)
                continue;
            std::smatch m;
            if (std::regex_search(request.prompt, m, r.regex))
            {
                auto text = m.format(r.rule.response);
                if (text.empty())
                    throw EmptyResponseError("scripted rule produced an empty response");
                return text;
            }
        }
        auto const [first, last] = _handlers.equal_range(request.tag);
        for (auto it = first; it != last; ++it)
            handlers.push_back(it->second);
    }
    for (auto const& h: handlers)
        if (auto text = h(request))
        {
            if (text->empty())
                throw EmptyResponseError("scripted handler produced an empty response");
            return *text;
        }
    throw LmError(fmt::format("scripted backend '{}' has no rule for a {} prompt", _name, to_string(request.tag)));
}

// Cache ----------------------------------------------------------------------

ReplayCache::ReplayCache(std::size_t key_length): _keyLength(std::clamp<std::size_t>(key_length, 1, 64))
{
}

std::string ReplayCache::key_for(CompletionRequest const& request, std::string const& backend_id) const
{
    json material = { request.prompt, fmt::format("{:.6f}", request.temperature), request.max_tokens, backend_id };
    return sha256_hex(material.dump()).substr(0, _keyLength);
}

std::optional<CacheEntry> ReplayCache::lookup(std::string const& key) const
{
    std::lock_guard lock(_mutex);
    auto const it = _entries.find(key);
    if (it == _entries.end())
        return std::nullopt;
    return it->second;
}

void ReplayCache::record(CacheEntry entry)
{
    std::lock_guard lock(_mutex);
    auto const it = _entries.find(entry.key);
    if (it != _entries.end())
    {
        auto const& existing = it->second;
        if (existing.prompt != entry.prompt || existing.backend_id != entry.backend_id
            || existing.temperature != entry.temperature || existing.max_tokens != entry.max_tokens)
            throw CacheCollisionError(fmt::format("cache key {} collides for two different requests", entry.key));
        if (existing.response != entry.response)
            throw CacheCollisionError(fmt::format("cache key {} already holds a different response", entry.key));
        return;
    }
    auto const key = entry.key;
    _entries.emplace(key, std::move(entry));
}

std::size_t ReplayCache::size() const
{
    std::lock_guard lock(_mutex);
    return _entries.size();
}

std::vector<CacheEntry> ReplayCache::entries() const
{
    std::lock_guard lock(_mutex);
    std::vector<CacheEntry> out;
    out.reserve(_entries.size());
    for (auto const& [k, e]: _entries)
        out.push_back(e);
    return out;
}

void ReplayCache::import_text(std::string_view text)
{
    std::size_t lineNo = 0;
    std::vector<CacheEntry> parsed;
    for (auto const& raw: split(text, '\n'))
    {
        ++lineNo;
        auto const line = trim(raw);
        if (line.empty())
            continue;
        try
        {
            auto const j = json::parse(line);
            CacheEntry e;
            e.key = j.at("key").get<std::string>();
            e.prompt = j.at("prompt").get<std::string>();
            e.temperature = j.at("temperature").get<double>();
            e.max_tokens = j.at("max_tokens").get<int>();
            e.backend_id = j.at("backend_id").get<std::string>();
            e.tag = j.value("tag", std::string {});
            e.response = j.at("response").get<std::string>();
            e.recorded_at = j.value("recorded_at", std::string {});
            if (e.key.empty() || e.response.empty())
                throw ParseError("cache entry needs a key and a response", lineNo);
            parsed.push_back(std::move(e));
        }
        catch (json::exception const& e)
        {
            throw ParseError(std::string("corrupt cache entry: ") + e.what(), lineNo);
        }
    }
    for (auto& e: parsed)
        record(std::move(e));
}

void ReplayCache::load(std::filesystem::path const& path)
{
    import_file(path);
}

void ReplayCache::import_file(std::filesystem::path const& path)
{
    import_text(read_file(path));
}

std::string ReplayCache::export_text() const
{
    std::string out;
    for (auto const& e: entries())
    {
        json j = {
            { "key", e.key },          { "prompt", e.prompt },         { "temperature", e.temperature },
            { "max_tokens", e.max_tokens }, { "backend_id", e.backend_id }, { "tag", e.tag },
            { "response", e.response }, { "recorded_at", e.recorded_at },
        };
        out += j.dump();
        out += '\n';
    }
    return out;
}

void ReplayCache::export_file(std::filesystem::path const& path) const
{
    write_file(path, export_text());
}

CachedBackend::CachedBackend(std::shared_ptr<LmBackend> inner, std::shared_ptr<ReplayCache> cache, CacheMode mode,
                             std::string backend_id):
    _inner(std::move(inner)), _cache(std::move(cache)), _mode(mode), _backendId(std::move(backend_id))
{
    if (!_cache)
        throw ConfigError("cached backend needs a cache");
    if (_mode == CacheMode::Record && !_inner)
        throw ConfigError("record mode needs an inner backend");
    if (_backendId.empty())
        _backendId = _inner ? _inner->id() : throw ConfigError("cached backend needs a backend id");
}

std::string CachedBackend::complete(CompletionRequest const& request)
{
    check_request(request);
    auto const key = _cache->key_for(request, _backendId);
    if (auto hit = _cache->lookup(key))
    {
        if (hit->prompt != request.prompt || hit->backend_id != _backendId || hit->max_tokens != request.max_tokens)
            throw CacheCollisionError(fmt::format("cache key {} belongs to a different request", key));
        ++_hits;
        return hit->response;
    }
    ++_misses;
    if (_mode == CacheMode::Replay)
        throw CacheMissError(fmt::format("replay cache miss for {} prompt {}", to_string(request.tag), key));

    auto response = _inner->complete(request);
    auto const now = std::time(nullptr);
    _cache->record({ key, request.prompt, request.temperature, request.max_tokens, _backendId,
                     std::string(to_string(request.tag)), response, fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(now)) });
    return response;
}

} // namespace semgro
