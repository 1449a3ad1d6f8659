// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <semgro/common.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace semgro
{

enum class Purpose
{
    Generator,
    Retriever,
    Critic,
    Chainer,
    Summarizer,
};

std::string_view to_string(Purpose purpose);
Purpose parse_purpose(std::string_view text);

struct CompletionRequest
{
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = 256;
    Purpose tag = Purpose::Generator;
};

class LmError: public Error
{
  public:
    using Error::Error;
};

class TransportError: public LmError
{
  public:
    using LmError::LmError;
};

class TimeoutError: public LmError
{
  public:
    using LmError::LmError;
};

class RefusalError: public LmError
{
  public:
    using LmError::LmError;
};

class EmptyResponseError: public LmError
{
  public:
    using LmError::LmError;
};

class CacheMissError: public LmError
{
  public:
    using LmError::LmError;
};

class CacheCollisionError: public LmError
{
  public:
    using LmError::LmError;
};

class LmBackend
{
  public:
    virtual ~LmBackend() = default;
    /// Non-empty completion text, or an LmError.
    virtual std::string complete(CompletionRequest const& request) = 0;
    [[nodiscard]] virtual std::string id() const = 0;
};

/// Rejects malformed requests (empty prompt, negative temperature).
void check_request(CompletionRequest const& request);

// Scripted backend -------------------------------------------------------------

struct ScriptRule
{
    Purpose tag = Purpose::Generator;
    std::string pattern;  ///< ECMAScript regex searched in the prompt
    std::string response; ///< regex format string; $1.. refer to capture groups
};

std::vector<ScriptRule> parse_rules(std::string_view json_text);
std::vector<ScriptRule> load_rules(std::filesystem::path const& path);

using ScriptHandler = std::function<std::optional<std::string>(CompletionRequest const&)>;

/// Deterministic backend: rules are tried in order, then handlers registered for the tag.
class ScriptedBackend final: public LmBackend
{
  public:
    explicit ScriptedBackend(std::string name = "scripted", std::vector<ScriptRule> rules = {});

    void add_rule(ScriptRule rule);
    void add_handler(Purpose tag, ScriptHandler handler);

    std::string complete(CompletionRequest const& request) override;
    [[nodiscard]] std::string id() const override { return "scripted:" + _name; }

  private:
    struct CompiledRule
    {
        ScriptRule rule;
        std::regex regex;
    };
    std::string _name;
    std::vector<CompiledRule> _rules;
    std::multimap<Purpose, ScriptHandler> _handlers;
    std::mutex _mutex;
};

// Remote backend ---------------------------------------------------------------

struct RemoteConfig
{
    std::string base_url;                       ///< scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string token_env = "SEMGRO_LM_TOKEN"; ///< name of the environment variable holding the bearer token
    int timeout_seconds = 60;
    int max_retries = 3;
    int backoff_ms = 500;
};

/// Chat-completion client: one user message in, first choice's message content out.
class RemoteBackend final: public LmBackend
{
  public:
    explicit RemoteBackend(RemoteConfig config);
    std::string complete(CompletionRequest const& request) override;
    [[nodiscard]] std::string id() const override { return "remote:" + _config.model; }
    [[nodiscard]] std::size_t requests_sent() const noexcept { return _sent.load(); }

  private:
    RemoteConfig _config;
    std::atomic<std::size_t> _sent { 0 };
};

// Record/replay cache ----------------------------------------------------------

struct CacheEntry
{
    std::string key;
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = 0;
    std::string backend_id;
    std::string tag;
    std::string response;
    std::string recorded_at;
};

/// Content-addressed store of completions. Thread-safe.
class ReplayCache
{
  public:
    /// `key_length` truncates the hex digest; only tests use values below 64.
    explicit ReplayCache(std::size_t key_length = 64);

    [[nodiscard]] std::string key_for(CompletionRequest const& request, std::string const& backend_id) const;
    [[nodiscard]] std::optional<CacheEntry> lookup(std::string const& key) const;
    /// Throws CacheCollisionError when the key exists for a different prompt or a different response.
    void record(CacheEntry entry);

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::vector<CacheEntry> entries() const; ///< sorted by key

    void load(std::filesystem::path const& path);
    void import_text(std::string_view text);
    void import_file(std::filesystem::path const& path);
    [[nodiscard]] std::string export_text() const;
    void export_file(std::filesystem::path const& path) const;

  private:
    std::size_t _keyLength;
    std::map<std::string, CacheEntry> _entries;
    mutable std::mutex _mutex;
};

enum class CacheMode
{
    Record, ///< serve hits, forward misses to the inner backend and store them
    Replay, ///< serve hits only; a miss is a CacheMissError
};

class CachedBackend final: public LmBackend
{
  public:
    /// `backend_id` names the model whose responses the cache holds; it is part of every key.
    CachedBackend(std::shared_ptr<LmBackend> inner, std::shared_ptr<ReplayCache> cache, CacheMode mode,
                  std::string backend_id);

    std::string complete(CompletionRequest const& request) override;
    [[nodiscard]] std::string id() const override { return _backendId; }
    [[nodiscard]] std::size_t hits() const noexcept { return _hits.load(); }
    [[nodiscard]] std::size_t misses() const noexcept { return _misses.load(); }

  private:
    std::shared_ptr<LmBackend> _inner;
    std::shared_ptr<ReplayCache> _cache;
    CacheMode _mode;
    std::string _backendId;
    std::atomic<std::size_t> _hits { 0 };
    std::atomic<std::size_t> _misses { 0 };
};

} // namespace semgro
