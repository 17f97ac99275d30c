#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "tsd/records.hpp"

namespace tsd {

struct EndpointConfig {
    std::string                          base_url;  // e.g. http://localhost:8000/v1
    std::string                          model;
    std::optional<std::string>           api_key;
    int                                  top_logprobs = 20;
    int                                  max_parallel = 4;
    std::chrono::milliseconds            timeout{60'000};
    int                                  max_retries = 3;
    std::chrono::milliseconds            backoff_base{500};
    std::optional<std::filesystem::path> cache_dir;

    void validate() const;
};

// One line of the text input JSONL: {id, label, family?, domain_tag?, text}.
struct TextInput {
    std::string                id;
    Label                      label = Label::human;
    std::optional<std::string> family;
    std::optional<std::string> domain_tag;
    std::string                text;
};

TextInput parse_text_input(std::string_view line, std::size_t line_no = 0);

/// Hex SHA-256 over model, text and top_logprobs.
std::string cache_key(const std::string & model, const std::string & text, int top_logprobs);

/// Builds a record from a completions response with echoed prompt logprobs.
/// The first prompt token is dropped. Throws Error(capability) when the response
/// carries no per-token logprobs and Error(insufficient_length) when nothing
/// remains after the drop.
ScoreRecord record_from_completion(const nlohmann::json & response, const TextInput & input, int top_logprobs);

/// Request body sent to {base_url}/completions.
nlohmann::json completion_request(const EndpointConfig & config, const std::string & text);

class SurrogateClient {
  public:
    explicit SurrogateClient(EndpointConfig config);

    /// Thread-safe. Serves from cache_dir when possible; otherwise one request
    /// with retry/backoff on transport failures, 429 and 5xx.
    ScoreRecord score_text(const TextInput & input);

    std::size_t network_requests() const noexcept { return requests_.load(); }
    const EndpointConfig & config() const noexcept { return config_; }

  private:
    nlohmann::json post_completion(const std::string & text);

    EndpointConfig           config_;
    std::string              scheme_host_port_;
    std::string              path_prefix_;
    std::atomic<std::size_t> requests_{0};
};

struct ScoreSummary {
    std::size_t written = 0;
    std::size_t failed  = 0;
};

/// Reads text JSONL, scores with up to max_parallel requests in flight, and
/// writes one line per input in input order: a record, or an error stub.
ScoreSummary score_corpus(std::istream & in, std::ostream & out, SurrogateClient & client,
                          const std::function<void(std::size_t done, std::size_t total)> & progress = {});

}  // namespace tsd
