#include "seedprompt/llm_client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "seedprompt/corpus.hpp"
#include "seedprompt/hash.hpp"

namespace seedprompt {

using nlohmann::json;

void validate_request(const CompletionRequest& request) {
  if (request.prompt.empty()) throw ConfigError("completion request has an empty prompt");
  if (!(request.temperature >= 0.0)) {
    throw ConfigError("completion request temperature must be >= 0");
  }
  if (request.model.empty()) throw ConfigError("completion request has no model id");
}

std::string request_digest(const CompletionRequest& request) {
  json canonical = {
      {"model", request.model},
      {"prompt", request.prompt},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
  };
  if (request.system) canonical["system"] = *request.system;
  return sha256_hex(canonical.dump());
}

std::string chat_request_body(const CompletionRequest& request) {
  json messages = json::array();
  if (request.system && !request.system->empty()) {
    messages.push_back({{"role", "system"}, {"content", *request.system}});
  }
  messages.push_back({{"role", "user"}, {"content", request.prompt}});
  json body = {
      {"model", request.model},
      {"messages", std::move(messages)},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
  };
  return body.dump();
}

CompletionResponse parse_chat_response(std::string_view body) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ApiError(std::string("chat response is not JSON: ") + e.what(), 200,
                   std::string(body));
  }
  const json* choices = parsed.contains("choices") ? &parsed["choices"] : nullptr;
  if (!choices || !choices->is_array() || choices->empty()) {
    throw ApiError("chat response has no choices", 200, std::string(body));
  }
  const json& first = (*choices)[0];
  CompletionResponse response;
  if (first.contains("message") && first["message"].contains("content") &&
      first["message"]["content"].is_string()) {
    response.text = first["message"]["content"].get<std::string>();
  } else {
    throw ApiError("chat response choice has no message content", 200, std::string(body));
  }
  if (first.contains("finish_reason") && first["finish_reason"].is_string()) {
    response.finish_reason = first["finish_reason"].get<std::string>();
  }
  if (parsed.contains("usage") && parsed["usage"].is_object()) {
    const json& usage = parsed["usage"];
    response.usage = Usage{usage.value("prompt_tokens", std::size_t{0}),
                           usage.value("completion_tokens", std::size_t{0})};
  }
  return response;
}

std::chrono::milliseconds RetryPolicy::delay_for(std::size_t attempt) const {
  const double scaled = static_cast<double>(backoff_base.count()) *
                        std::pow(backoff_multiplier, static_cast<double>(attempt));
  return std::chrono::milliseconds(static_cast<std::int64_t>(scaled));
}

InFlightLimiter::InFlightLimiter(std::size_t max_in_flight)
    : max_(std::max<std::size_t>(1, max_in_flight)) {}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return active_ < max_; });
  ++active_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --active_;
  }
  cv_.notify_one();
}

LiveClient::LiveClient(std::shared_ptr<HttpTransport> transport, RetryPolicy retry,
                       std::size_t max_in_flight, std::string api_key, Sleeper sleeper)
    : transport_(std::move(transport)),
      retry_(retry),
      limiter_(max_in_flight),
      api_key_(std::move(api_key)),
      sleeper_(std::move(sleeper)) {
  if (!sleeper_) {
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

CompletionResponse LiveClient::complete(const CompletionRequest& request) {
  validate_request(request);
  const std::string body = chat_request_body(request);
  HttpHeaders headers = {{"Content-Type", "application/json"}};
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);

  std::string last_failure;
  for (std::size_t attempt = 0;; ++attempt) {
    bool retryable = false;
    {
      InFlightLimiter::Guard guard(limiter_);
      try {
        HttpReply reply = transport_->post("/chat/completions", body, headers);
        if (reply.status >= 200 && reply.status < 300) {
          return parse_chat_response(reply.body);
        }
        if (reply.status == 429 || reply.status >= 500) {
          retryable = true;
          last_failure = "HTTP " + std::to_string(reply.status) + ": " + reply.body;
        } else {
          throw ApiError("chat completion failed with HTTP " + std::to_string(reply.status),
                         reply.status, reply.body);
        }
      } catch (const TransportError& e) {
        retryable = true;
        last_failure = e.what();
      }
    }
    if (!retryable || attempt >= retry_.max_retries) {
      throw UpstreamExhaustedError("chat completion failed after " +
                                   std::to_string(attempt + 1) +
                                   " attempt(s): " + last_failure);
    }
    sleeper_(retry_.delay_for(attempt));
  }
}

// ---------------------------------------------------------------------------
// Cache

namespace {

json response_to_json(const CompletionResponse& response) {
  json out = {{"text", response.text}, {"finish_reason", response.finish_reason}};
  if (response.usage) {
    out["usage"] = {{"prompt_tokens", response.usage->prompt_tokens},
                    {"completion_tokens", response.usage->completion_tokens}};
  }
  return out;
}

std::optional<CompletionResponse> response_from_json(const json& in) {
  if (!in.is_object() || !in.contains("text") || !in["text"].is_string()) {
    return std::nullopt;
  }
  CompletionResponse response;
  response.text = in["text"].get<std::string>();
  response.finish_reason = in.value("finish_reason", std::string());
  if (in.contains("usage") && in["usage"].is_object()) {
    response.usage = Usage{in["usage"].value("prompt_tokens", std::size_t{0}),
                           in["usage"].value("completion_tokens", std::size_t{0})};
  }
  return response;
}

// A record is served only if it parses and names the digest it is filed under.
std::optional<CompletionResponse> read_cache_record(const std::filesystem::path& path,
                                                    const std::string& digest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buffer;
  buffer << in.rdbuf();
  json record = json::parse(buffer.str(), nullptr, false);
  if (record.is_discarded() || !record.is_object()) return std::nullopt;
  if (record.value("digest", std::string()) != digest) return std::nullopt;
  if (!record.contains("response")) return std::nullopt;
  return response_from_json(record["response"]);
}

std::atomic<std::uint64_t> g_tmp_counter{0};

}  // namespace

CachedClient::CachedClient(std::shared_ptr<ChatClient> upstream,
                           std::filesystem::path cache_dir)
    : upstream_(std::move(upstream)), cache_dir_(std::move(cache_dir)) {
  std::error_code ec;
  std::filesystem::create_directories(cache_dir_, ec);
  if (ec) {
    throw ConfigError("cannot create cache directory '" + cache_dir_.string() +
                      "': " + ec.message());
  }
}

std::filesystem::path CachedClient::entry_path(const std::string& digest) const {
  return cache_dir_ / (digest + ".json");
}

std::optional<CompletionResponse> CachedClient::lookup(const std::string& digest) const {
  return read_cache_record(entry_path(digest), digest);
}

std::shared_ptr<std::mutex> CachedClient::digest_mutex(const std::string& digest) {
  std::lock_guard lock(table_mutex_);
  auto& slot = digest_mutexes_[digest];
  if (!slot) slot = std::make_shared<std::mutex>();
  return slot;
}

void CachedClient::store(const std::string& digest, const CompletionRequest& request,
                         const CompletionResponse& response) const {
  const std::filesystem::path target = entry_path(digest);
  if (std::filesystem::exists(target)) return;  // append-only

  json record = {
      {"digest", digest},
      {"request",
       {{"model", request.model},
        {"prompt", request.prompt},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens}}},
      {"response", response_to_json(response)},
  };
  if (request.system) record["request"]["system"] = *request.system;

  std::filesystem::path tmp = cache_dir_ / (digest + ".tmp." +
                                            std::to_string(g_tmp_counter.fetch_add(1)));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write cache entry '" + tmp.string() + "'");
    out << record.dump();
    out.flush();
    if (!out) throw ConfigError("cannot write cache entry '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw ConfigError("cannot commit cache entry '" + target.string() + "'");
  }
}

CompletionResponse CachedClient::complete(const CompletionRequest& request) {
  validate_request(request);
  const std::string digest = request_digest(request);
  auto mutex = digest_mutex(digest);
  std::lock_guard lock(*mutex);
  if (auto hit = lookup(digest)) return *hit;
  CompletionResponse response = upstream_->complete(request);
  store(digest, request, response);
  return response;
}

// ---------------------------------------------------------------------------
// Replay fixtures

std::vector<FixtureEntry> load_fixture(const std::filesystem::path& path) {
  std::vector<FixtureEntry> entries;
  for (const auto& [line_no, line] : read_nonblank_lines(path)) {
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw DataError(path.string() + ": malformed fixture record", line_no);
    }
    if (!record.contains("digest") || !record["digest"].is_string()) {
      throw DataError(path.string() + ": missing digest", line_no, "digest");
    }
    if (!record.contains("response") || !record["response"].is_string()) {
      throw DataError(path.string() + ": missing response text", line_no, "response");
    }
    entries.push_back({record["digest"].get<std::string>(),
                       record["response"].get<std::string>(),
                       record.value("finish_reason", std::string("stop"))});
  }
  return entries;
}

std::string serialize_fixture(const std::vector<FixtureEntry>& entries) {
  std::string out;
  for (const FixtureEntry& entry : entries) {
    nlohmann::ordered_json record;
    record["digest"] = entry.digest;
    record["response"] = entry.response;
    record["finish_reason"] = entry.finish_reason;
    out += record.dump();
    out += '\n';
  }
  return out;
}

std::vector<FixtureEntry> export_cache(const std::filesystem::path& cache_dir) {
  std::vector<FixtureEntry> entries;
  for (const auto& item : std::filesystem::directory_iterator(cache_dir)) {
    if (!item.is_regular_file() || item.path().extension() != ".json") continue;
    const std::string digest = item.path().stem().string();
    if (auto response = read_cache_record(item.path(), digest)) {
      entries.push_back({digest, response->text, response->finish_reason});
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const FixtureEntry& a, const FixtureEntry& b) { return a.digest < b.digest; });
  return entries;
}

ReplayClient::ReplayClient(const std::vector<FixtureEntry>& entries) {
  for (const FixtureEntry& entry : entries) {
    auto [it, inserted] = entries_.emplace(entry.digest, entry);
    if (!inserted && it->second.response != entry.response) {
      throw DataError("replay fixture has conflicting responses for digest " +
                      entry.digest);
    }
  }
}

ReplayClient::ReplayClient(const std::filesystem::path& fixture_path)
    : ReplayClient(load_fixture(fixture_path)) {}

CompletionResponse ReplayClient::complete(const CompletionRequest& request) {
  validate_request(request);
  const std::string digest = request_digest(request);
  auto it = entries_.find(digest);
  if (it == entries_.end()) throw ReplayMissError(digest);
  return CompletionResponse{it->second.response, it->second.finish_reason, std::nullopt};
}

// ---------------------------------------------------------------------------
// Configuration

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::kLive:
      return "live";
    case Backend::kCachedLive:
      return "cached-live";
    case Backend::kReplay:
      return "replay";
  }
  return "replay";
}

Backend parse_backend(std::string_view s) {
  if (s == "live") return Backend::kLive;
  if (s == "cached-live") return Backend::kCachedLive;
  if (s == "replay") return Backend::kReplay;
  throw ConfigError("unknown backend '" + std::string(s) +
                    "' (expected live, cached-live or replay)");
}

void validate_client_config(const ClientConfig& config) {
  if (config.model.empty()) throw ConfigError("client config has no model id");
  if (config.backend == Backend::kReplay) {
    if (config.fixture_path.empty()) {
      throw ConfigError("replay backend requires a fixture path");
    }
    if (!std::filesystem::exists(config.fixture_path)) {
      throw ConfigError("replay fixture '" + config.fixture_path.string() +
                        "' does not exist");
    }
    return;
  }
  if (config.base_url.empty()) throw ConfigError("live backend requires a base URL");
  if (config.backend == Backend::kCachedLive && config.cache_path.empty()) {
    throw ConfigError("cached-live backend requires a cache path");
  }
  if (config.max_in_flight == 0) throw ConfigError("max in-flight requests must be >= 1");
}

std::shared_ptr<ChatClient> make_client(const ClientConfig& config) {
  validate_client_config(config);
  if (config.backend == Backend::kReplay) {
    return std::make_shared<ReplayClient>(config.fixture_path);
  }
  std::string api_key;
  if (const char* value = std::getenv(config.api_key_env.c_str())) api_key = value;
  auto live = std::make_shared<LiveClient>(make_http_transport(config.base_url, config.timeout),
                                           config.retry, config.max_in_flight,
                                           std::move(api_key));
  if (config.backend == Backend::kLive) return live;
  return std::make_shared<CachedClient>(std::move(live), config.cache_path);
}

std::size_t default_max_tokens(std::size_t prompt_tokens) {
  if (prompt_tokens + kMinResponseTokens >= kContextWindowTokens) return kMinResponseTokens;
  return kContextWindowTokens - prompt_tokens;
}

}  // namespace seedprompt
