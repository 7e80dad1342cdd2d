#include "autoform/http_providers.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "autoform/ioutil.hpp"

namespace autoform {

namespace {

// The common wire format caps stop sequences at four; any extras are still
// enforced client-side through extract_completion.
constexpr size_t kMaxWireStops = 4;

std::string body_excerpt(const std::string& body) {
  std::string out = collapse_whitespace(body);
  if (out.size() > 200) {
    out.resize(200);
    out += "...";
  }
  return out;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

int64_t retry_after_ms(const httplib::Response& res) {
  if (!res.has_header("Retry-After")) return -1;
  const std::string value = res.get_header_value("Retry-After");
  char* end = nullptr;
  long seconds = std::strtol(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || seconds < 0) return -1;
  return static_cast<int64_t>(seconds) * 1000;
}

// One client per request: the engine invokes providers from worker threads
// and a shared keep-alive connection is not safe across them.
json post_json(const HttpProviderOptions& options, const std::string& path,
               const json& body) {
  httplib::Headers headers;
  if (!options.api_key.empty())
    headers.emplace("Authorization", "Bearer " + options.api_key);
  const std::string payload = body.dump();

  std::string last_error;
  for (size_t attempt = 1; attempt <= options.attempts; ++attempt) {
    httplib::Client client(options.endpoint);
    client.set_connection_timeout(options.timeout_ms / 1000,
                                  (options.timeout_ms % 1000) * 1000);
    client.set_read_timeout(options.timeout_ms / 1000,
                            (options.timeout_ms % 1000) * 1000);
    client.set_write_timeout(options.timeout_ms / 1000,
                             (options.timeout_ms % 1000) * 1000);

    int64_t wait_ms = -1;
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      try {
        return json::parse(res->body);
      } catch (const json::exception& e) {
        throw ProviderError("unparseable response from " + options.endpoint +
                            path + ": " + e.what());
      }
    } else if (retryable_status(res->status)) {
      last_error = "HTTP " + std::to_string(res->status) + ": " +
                   body_excerpt(res->body);
      wait_ms = retry_after_ms(*res);
    } else {
      throw ProviderError("HTTP " + std::to_string(res->status) + " from " +
                          options.endpoint + path + ": " +
                          body_excerpt(res->body));
    }

    if (attempt == options.attempts) break;
    if (wait_ms < 0)
      wait_ms = std::min<int64_t>(options.backoff_ms << (attempt - 1), 60000);
    if (wait_ms > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(wait_ms));
  }
  throw ProviderError("request to " + options.endpoint + path + " failed after " +
                      std::to_string(options.attempts) + " attempts; last: " +
                      last_error);
}

}  // namespace

struct HttpCompletionProvider::Impl {
  HttpProviderOptions options;
};

HttpCompletionProvider::HttpCompletionProvider(HttpProviderOptions options)
    : impl_(new Impl{std::move(options)}) {
  if (impl_->options.endpoint.empty())
    throw ConfigError("completion provider endpoint is empty");
  if (impl_->options.attempts == 0)
    throw ConfigError("completion provider attempts must be >= 1");
}

HttpCompletionProvider::~HttpCompletionProvider() = default;

std::string HttpCompletionProvider::complete(const std::string& prompt,
                                             const CompletionParams& params) {
  json body{{"model", impl_->options.model},
            {"prompt", prompt},
            {"temperature", params.temperature},
            {"max_tokens", params.max_tokens}};
  if (!params.stop.empty()) {
    json stops = json::array();
    for (size_t i = 0; i < std::min(params.stop.size(), kMaxWireStops); ++i)
      stops.push_back(params.stop[i]);
    body["stop"] = std::move(stops);
  }

  json res = post_json(impl_->options, "/v1/completions", body);
  auto choices = res.find("choices");
  if (choices == res.end() || !choices->is_array() || choices->empty())
    throw ProviderError("completion response from " + impl_->options.endpoint +
                        " has no choices");
  const json& first = (*choices)[0];
  auto text = first.find("text");
  if (text == first.end() || !text->is_string())
    throw ProviderError("completion response from " + impl_->options.endpoint +
                        " has no text");
  return extract_completion(text->get<std::string>(), params.stop);
}

std::string HttpCompletionProvider::id() const {
  return "http-complete/" + impl_->options.model + "@" + impl_->options.endpoint;
}

struct HttpEmbeddingProvider::Impl {
  HttpProviderOptions options;
  std::atomic<size_t> dim{0};
};

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpProviderOptions options)
    : impl_(new Impl{std::move(options)}) {
  if (impl_->options.endpoint.empty())
    throw ConfigError("embedding provider endpoint is empty");
  if (impl_->options.attempts == 0)
    throw ConfigError("embedding provider attempts must be >= 1");
}

HttpEmbeddingProvider::~HttpEmbeddingProvider() = default;

std::vector<std::vector<float>> HttpEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
  if (texts.empty()) return {};
  json body{{"model", impl_->options.model}, {"input", texts}};
  json res = post_json(impl_->options, "/v1/embeddings", body);

  auto data = res.find("data");
  if (data == res.end() || !data->is_array())
    throw ProviderError("embedding response from " + impl_->options.endpoint +
                        " has no data array");
  if (data->size() != texts.size())
    throw ProviderError("embedding response has " + std::to_string(data->size()) +
                        " rows for " + std::to_string(texts.size()) + " inputs");

  std::vector<std::vector<float>> out(texts.size());
  std::vector<bool> filled(texts.size(), false);
  for (size_t i = 0; i < data->size(); ++i) {
    const json& row = (*data)[i];
    auto values = row.find("embedding");
    if (values == row.end() || !values->is_array() || values->empty())
      throw ProviderError("embedding response row " + std::to_string(i) +
                          " has no embedding");
    // Rows may arrive out of order; "index" says which input they belong to.
    size_t slot = i;
    auto index = row.find("index");
    if (index != row.end() && index->is_number_unsigned())
      slot = index->get<size_t>();
    if (slot >= out.size() || filled[slot])
      throw ProviderError("embedding response row " + std::to_string(i) +
                          " has bad index " + std::to_string(slot));
    filled[slot] = true;
    out[slot].reserve(values->size());
    for (const auto& v : *values) {
      if (!v.is_number())
        throw ProviderError("embedding response row " + std::to_string(i) +
                            " holds a non-numeric value");
      out[slot].push_back(v.get<float>());
    }
  }

  size_t dim = out[0].size();
  for (const auto& row : out)
    if (row.size() != dim)
      throw ProviderError("embedding response mixes dimensions " +
                          std::to_string(dim) + " and " +
                          std::to_string(row.size()));
  size_t expected = 0;
  if (!impl_->dim.compare_exchange_strong(expected, dim) && expected != dim)
    throw ProviderError("embedding dimension changed from " +
                        std::to_string(expected) + " to " + std::to_string(dim));
  return out;
}

size_t HttpEmbeddingProvider::dim() const { return impl_->dim.load(); }

std::string HttpEmbeddingProvider::id() const {
  return "http-embed/" + impl_->options.model + "@" + impl_->options.endpoint;
}

}  // namespace autoform
