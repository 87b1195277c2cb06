#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seedprompt/errors.hpp"

namespace seedprompt {

// Full context window of the reference chat model, prompt plus response.
inline constexpr std::size_t kContextWindowTokens = 4097;
inline constexpr std::size_t kMinResponseTokens = 256;

struct CompletionRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  std::size_t max_tokens = kMinResponseTokens;
  std::optional<std::string> system;
};

void validate_request(const CompletionRequest& request);

struct Usage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

struct CompletionResponse {
  std::string text;
  std::string finish_reason;
  std::optional<Usage> usage;
};

// Hex SHA-256 over a canonical JSON encoding of the request fields.
std::string request_digest(const CompletionRequest& request);

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// HTTP plumbing

struct HttpReply {
  int status = 0;
  std::string body;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // Throws TransportError when no HTTP response was received.
  virtual HttpReply post(const std::string& path, const std::string& body,
                         const HttpHeaders& headers) = 0;
};

// cpp-httplib backed transport for "scheme://host[:port][/prefix]" base URLs.
std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url,
                                                   std::chrono::seconds timeout);

// Number of upstream HTTP requests attempted by this process.
std::uint64_t http_requests_sent();

// Chat-completions wire mapping: request body and response parsing.
std::string chat_request_body(const CompletionRequest& request);
CompletionResponse parse_chat_response(std::string_view body);

// ---------------------------------------------------------------------------
// Backends

struct RetryPolicy {
  std::size_t max_retries = 2;
  std::chrono::milliseconds backoff_base{1000};
  double backoff_multiplier = 2.0;

  std::chrono::milliseconds delay_for(std::size_t attempt) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t max_in_flight);

  void acquire();
  void release();

  class Guard {
   public:
    explicit Guard(InFlightLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
    ~Guard() { limiter_.release(); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    InFlightLimiter& limiter_;
  };

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t max_;
  std::size_t active_ = 0;
};

class LiveClient : public ChatClient {
 public:
  LiveClient(std::shared_ptr<HttpTransport> transport, RetryPolicy retry,
             std::size_t max_in_flight, std::string api_key, Sleeper sleeper = {});

  CompletionResponse complete(const CompletionRequest& request) override;

 private:
  std::shared_ptr<HttpTransport> transport_;
  RetryPolicy retry_;
  InFlightLimiter limiter_;
  std::string api_key_;
  Sleeper sleeper_;
};

// Append-only cache of digest-named records in front of another client.
class CachedClient : public ChatClient {
 public:
  CachedClient(std::shared_ptr<ChatClient> upstream, std::filesystem::path cache_dir);

  CompletionResponse complete(const CompletionRequest& request) override;

  std::filesystem::path entry_path(const std::string& digest) const;
  std::optional<CompletionResponse> lookup(const std::string& digest) const;

 private:
  std::shared_ptr<std::mutex> digest_mutex(const std::string& digest);
  void store(const std::string& digest, const CompletionRequest& request,
             const CompletionResponse& response) const;

  std::shared_ptr<ChatClient> upstream_;
  std::filesystem::path cache_dir_;
  std::mutex table_mutex_;
  std::map<std::string, std::shared_ptr<std::mutex>> digest_mutexes_;
};

struct FixtureEntry {
  std::string digest;
  std::string response;
  std::string finish_reason = "stop";
};

std::vector<FixtureEntry> load_fixture(const std::filesystem::path& path);
std::string serialize_fixture(const std::vector<FixtureEntry>& entries);
// Collects every valid cache record, sorted by digest.
std::vector<FixtureEntry> export_cache(const std::filesystem::path& cache_dir);

// Serves responses from a recorded fixture. Never touches the network.
class ReplayClient : public ChatClient {
 public:
  explicit ReplayClient(const std::vector<FixtureEntry>& entries);
  explicit ReplayClient(const std::filesystem::path& fixture_path);

  CompletionResponse complete(const CompletionRequest& request) override;

  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, FixtureEntry> entries_;
};

enum class Backend { kLive, kCachedLive, kReplay };

std::string_view to_string(Backend backend);
Backend parse_backend(std::string_view s);

struct ClientConfig {
  Backend backend = Backend::kReplay;
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-3.5-turbo-0613";
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  std::filesystem::path cache_path;
  std::filesystem::path fixture_path;
  // Name of the environment variable holding the API key.
  std::string api_key_env = "OPENAI_API_KEY";
  std::optional<std::string> system_message;
  std::chrono::seconds timeout{120};
};

void validate_client_config(const ClientConfig& config);
std::shared_ptr<ChatClient> make_client(const ClientConfig& config);

// Response budget left after the prompt, floored at kMinResponseTokens.
std::size_t default_max_tokens(std::size_t prompt_tokens);

}  // namespace seedprompt
