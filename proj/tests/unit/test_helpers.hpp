#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "seedprompt/corpus.hpp"

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("seedprompt-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path source_path(const std::string& relative) {
  return std::filesystem::path(SEEDPROMPT_SOURCE_DIR) / relative;
}

inline seedprompt::Instance make_instance(std::string id, std::string analysis = "some analysis",
                                          std::size_t options = 5) {
  seedprompt::Instance inst;
  inst.id = std::move(id);
  inst.question = "question text";
  const std::string labels = "ABCDE";
  for (std::size_t i = 0; i < options; ++i) {
    inst.options[labels[i]] = std::string("option ") + labels[i];
  }
  inst.answer = 'A';
  inst.analysis = std::move(analysis);
  return inst;
}

#include <functional>
#include <mutex>

#include "seedprompt/llm_client.hpp"

// Chat client answering from a callback and counting calls.
class ScriptedClient : public seedprompt::ChatClient {
 public:
  using Script = std::function<std::string(const seedprompt::CompletionRequest&)>;
  explicit ScriptedClient(Script script) : script_(std::move(script)) {}

  seedprompt::CompletionResponse complete(const seedprompt::CompletionRequest& request) override {
    {
      std::lock_guard lock(mutex_);
      ++calls_;
      requests_.push_back(request);
    }
    return {script_(request), "stop", std::nullopt};
  }

  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }
  std::vector<seedprompt::CompletionRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  Script script_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
  std::vector<seedprompt::CompletionRequest> requests_;
};
