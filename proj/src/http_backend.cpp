#include "httplib.h"

#include <atomic>

#include "seedprompt/llm_client.hpp"

namespace seedprompt {

namespace {

std::atomic<std::uint64_t> g_requests_sent{0};

class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(std::string origin, std::string path_prefix, std::chrono::seconds timeout)
      : origin_(std::move(origin)), prefix_(std::move(path_prefix)), timeout_(timeout) {}

  HttpReply post(const std::string& path, const std::string& body,
                 const HttpHeaders& headers) override {
    g_requests_sent.fetch_add(1);
    // httplib::Client is not safe for concurrent requests; one per call.
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers http_headers;
    std::string content_type = "application/json";
    for (const auto& [name, value] : headers) {
      if (name == "Content-Type") {
        content_type = value;
      } else {
        http_headers.emplace(name, value);
      }
    }
    auto result = client.Post(prefix_ + path, http_headers, body, content_type);
    if (!result) {
      throw TransportError("HTTP request to " + origin_ + prefix_ + path +
                           " failed: " + httplib::to_string(result.error()));
    }
    return HttpReply{result->status, result->body};
  }

 private:
  std::string origin_;
  std::string prefix_;
  std::chrono::seconds timeout_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url,
                                                   std::chrono::seconds timeout) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("base URL '" + base_url + "' has no scheme");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  std::string origin = base_url.substr(0, path_start);
  std::string prefix =
      path_start == std::string::npos ? std::string() : base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return std::make_shared<HttplibTransport>(std::move(origin), std::move(prefix), timeout);
}

std::uint64_t http_requests_sent() { return g_requests_sent.load(); }

}  // namespace seedprompt
