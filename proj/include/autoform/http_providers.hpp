#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "autoform/completion.hpp"
#include "autoform/embedding.hpp"

namespace autoform {

// Remote endpoint clients speaking the standard JSON completion/embedding
// wire format. The API key is held in memory only; it never appears in ids,
// manifests or error messages.
struct HttpProviderOptions {
  std::string endpoint;  // scheme://host[:port]
  std::string model;
  std::string api_key;   // empty = no Authorization header
  int64_t timeout_ms = 30000;
  size_t attempts = 5;       // total tries, including the first
  int64_t backoff_ms = 250;  // doubles per retry; Retry-After overrides
};

class HttpCompletionProvider final : public CompletionProvider {
 public:
  explicit HttpCompletionProvider(HttpProviderOptions options);
  ~HttpCompletionProvider() override;

  std::string complete(const std::string& prompt,
                       const CompletionParams& params) override;
  std::string id() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpProviderOptions options);
  ~HttpEmbeddingProvider() override;

  std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;
  size_t dim() const override;  // 0 until the first successful call
  std::string id() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace autoform
