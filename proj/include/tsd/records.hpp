#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tsd {

enum class Label { human, ai };

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);

// One text's per-token statistics as produced by a scoring backend.
// All per-token lists that are present have the same length n >= 1.
struct ScoreRecord {
    std::string                              id;
    Label                                    label = Label::human;
    std::optional<std::string>               family;
    std::optional<std::string>               domain_tag;
    std::optional<std::vector<std::string>>  tokens;
    std::vector<double>                      logprob;
    std::optional<std::vector<std::int64_t>> rank;
    std::optional<std::vector<double>>       entropy;
    std::optional<std::vector<double>>       token_prob;
    std::optional<std::vector<double>>       topk_mass;
    std::optional<std::vector<double>>       mu;
    std::optional<std::vector<double>>       sigma2;
    // Keys the core does not interpret; kept so serialization round-trips.
    nlohmann::ordered_json                   extra = nlohmann::ordered_json::object();

    std::size_t size() const noexcept { return logprob.size(); }

    /// Keeps only the first max_tokens entries of every per-token list.
    void truncate(std::size_t max_tokens);

    bool operator==(const ScoreRecord &) const = default;
};

/// Checks every record invariant; throws Error(validation) naming field and index.
void validate(const ScoreRecord & record);

/// Parses and validates one JSONL line. line_no (1-based, 0 = unknown) is only
/// used to label error messages.
ScoreRecord parse_record(std::string_view line, std::size_t line_no = 0);

/// Single-line JSON with known fields in canonical order followed by extra keys.
std::string serialize_record(const ScoreRecord & record);

// A line that carries a per-record failure from an upstream producer instead
// of statistics: {"id", "label", "family"?, "error"}.
struct ErrorStub {
    std::string                id;
    std::optional<Label>       label;
    std::optional<std::string> family;
    std::string                error;

    bool operator==(const ErrorStub &) const = default;
};

std::string serialize_stub(const ErrorStub & stub);

struct Corpus {
    std::vector<ScoreRecord> records;
    std::vector<ErrorStub>   stubs;
    std::size_t              max_tokens = 512;

    bool operator==(const Corpus &) const = default;
};

inline constexpr std::size_t kDefaultMaxTokens = 512;

/// Reads JSONL from a stream. Blank lines are skipped; record order is kept.
Corpus read_corpus(std::istream & in, std::size_t max_tokens = kDefaultMaxTokens);

/// Throws Error(io) when the file cannot be opened.
Corpus load_corpus(const std::filesystem::path & path, std::size_t max_tokens = kDefaultMaxTokens);

/// Re-applies a cap to an in-memory corpus.
Corpus truncate_corpus(Corpus corpus, std::size_t max_tokens);

void write_corpus(std::ostream & out, const Corpus & corpus);

}  // namespace tsd
