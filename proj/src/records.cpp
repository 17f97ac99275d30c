#include "tsd/records.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "tsd/error.hpp"

namespace tsd {

using ojson = nlohmann::ordered_json;

namespace {

constexpr const char * kKnownKeys[] = {
    "id", "label", "family", "domain_tag", "tokens", "logprob", "rank",
    "entropy", "token_prob", "topk_mass", "mu", "sigma2",
};

bool is_known_key(const std::string & key) {
    for (const char * k : kKnownKeys) {
        if (key == k) {
            return true;
        }
    }
    return false;
}

std::string where(std::size_t line_no) {
    return line_no == 0 ? std::string() : "line " + std::to_string(line_no) + ": ";
}

std::vector<double> real_list(const ojson & value, const char * field, std::size_t line_no) {
    if (!value.is_array()) {
        throw Error(Errc::schema, where(line_no) + "field '" + field + "' must be an array of numbers");
    }
    std::vector<double> out;
    out.reserve(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (!value[i].is_number()) {
            throw Error(Errc::schema, where(line_no) + field + "[" + std::to_string(i) + "] is not a number");
        }
        out.push_back(value[i].get<double>());
    }
    return out;
}

std::vector<std::int64_t> int_list(const ojson & value, const char * field, std::size_t line_no) {
    if (!value.is_array()) {
        throw Error(Errc::schema, where(line_no) + "field '" + field + "' must be an array of integers");
    }
    std::vector<std::int64_t> out;
    out.reserve(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
        const auto & v = value[i];
        if (v.is_number_integer()) {
            out.push_back(v.get<std::int64_t>());
        } else if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) {
            out.push_back(static_cast<std::int64_t>(v.get<double>()));
        } else {
            throw Error(Errc::schema, where(line_no) + field + "[" + std::to_string(i) + "] is not an integer");
        }
    }
    return out;
}

std::string string_field(const ojson & obj, const char * field, std::size_t line_no) {
    const auto & v = obj.at(field);
    if (!v.is_string()) {
        throw Error(Errc::schema, where(line_no) + "field '" + field + "' must be a string");
    }
    return v.get<std::string>();
}

Label label_field(const ojson & obj, std::size_t line_no) {
    const auto text = string_field(obj, "label", line_no);
    const auto label = parse_label(text);
    if (!label) {
        throw Error(Errc::validation, where(line_no) + "label must be 'human' or 'ai', got '" + text + "'");
    }
    return *label;
}

ojson parse_object(std::string_view line, std::size_t line_no) {
    ojson obj;
    try {
        obj = ojson::parse(line.begin(), line.end());
    } catch (const nlohmann::json::parse_error & e) {
        throw Error(Errc::parse, (line_no ? "line " + std::to_string(line_no) : std::string("record")) +
                                     ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) {
        throw Error(Errc::parse, where(line_no) + "expected a JSON object");
    }
    return obj;
}

ScoreRecord record_from_object(const ojson & obj, std::size_t line_no) {
    for (const char * required : {"id", "label", "logprob"}) {
        if (!obj.contains(required)) {
            throw Error(Errc::schema, where(line_no) + "missing required field '" + required + "'");
        }
    }
    ScoreRecord rec;
    rec.id      = string_field(obj, "id", line_no);
    rec.label   = label_field(obj, line_no);
    rec.logprob = real_list(obj.at("logprob"), "logprob", line_no);
    if (obj.contains("family")) {
        rec.family = string_field(obj, "family", line_no);
    }
    if (obj.contains("domain_tag")) {
        rec.domain_tag = string_field(obj, "domain_tag", line_no);
    }
    if (obj.contains("tokens")) {
        const auto & toks = obj.at("tokens");
        if (!toks.is_array()) {
            throw Error(Errc::schema, where(line_no) + "field 'tokens' must be an array of strings");
        }
        std::vector<std::string> out;
        for (const auto & t : toks) {
            if (!t.is_string()) {
                throw Error(Errc::schema, where(line_no) + "field 'tokens' must be an array of strings");
            }
            out.push_back(t.get<std::string>());
        }
        rec.tokens = std::move(out);
    }
    if (obj.contains("rank")) {
        rec.rank = int_list(obj.at("rank"), "rank", line_no);
    }
    auto optional_reals = [&](const char * field, std::optional<std::vector<double>> & slot) {
        if (obj.contains(field)) {
            slot = real_list(obj.at(field), field, line_no);
        }
    };
    optional_reals("entropy", rec.entropy);
    optional_reals("token_prob", rec.token_prob);
    optional_reals("topk_mass", rec.topk_mass);
    optional_reals("mu", rec.mu);
    optional_reals("sigma2", rec.sigma2);

    for (const auto & [key, value] : obj.items()) {
        if (!is_known_key(key)) {
            rec.extra[key] = value;
        }
    }

    try {
        validate(rec);
    } catch (const Error & e) {
        throw Error(e.code(), where(line_no) + "record '" + rec.id + "': " + e.what());
    }
    return rec;
}

template <typename T> void truncate_list(std::optional<std::vector<T>> & list, std::size_t n) {
    if (list && list->size() > n) {
        list->resize(n);
    }
}

template <typename T> void put_list(ojson & obj, const char * key, const std::optional<std::vector<T>> & list) {
    if (list) {
        obj[key] = *list;
    }
}

}  // namespace

std::string_view to_string(Label label) {
    return label == Label::ai ? "ai" : "human";
}

std::optional<Label> parse_label(std::string_view text) {
    if (text == "human") {
        return Label::human;
    }
    if (text == "ai") {
        return Label::ai;
    }
    return std::nullopt;
}

void ScoreRecord::truncate(std::size_t max_tokens) {
    if (logprob.size() > max_tokens) {
        logprob.resize(max_tokens);
    }
    truncate_list(tokens, max_tokens);
    truncate_list(rank, max_tokens);
    truncate_list(entropy, max_tokens);
    truncate_list(token_prob, max_tokens);
    truncate_list(topk_mass, max_tokens);
    truncate_list(mu, max_tokens);
    truncate_list(sigma2, max_tokens);
}

void validate(const ScoreRecord & record) {
    const std::size_t n = record.logprob.size();
    if (record.id.empty()) {
        throw Error(Errc::validation, "id must be non-empty");
    }
    if (n == 0) {
        throw Error(Errc::validation, "logprob must contain at least one entry");
    }
    auto check_len = [n](const char * field, std::size_t len) {
        if (len != n) {
            throw Error(Errc::validation, std::string("length mismatch ") + field + ": " + std::to_string(len) +
                                              " entries, logprob has " + std::to_string(n));
        }
    };
    auto at = [](const char * field, std::size_t i) { return std::string(field) + "[" + std::to_string(i) + "]"; };

    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(record.logprob[i])) {
            throw Error(Errc::validation, at("logprob", i) + " is not finite");
        }
        if (record.logprob[i] > 0.0) {
            throw Error(Errc::validation, at("logprob", i) + " > 0");
        }
    }
    if (record.tokens) {
        check_len("tokens", record.tokens->size());
    }
    if (record.rank) {
        check_len("rank", record.rank->size());
        for (std::size_t i = 0; i < n; ++i) {
            if ((*record.rank)[i] < 1) {
                throw Error(Errc::validation, at("rank", i) + " < 1");
            }
        }
    }
    if (record.entropy) {
        check_len("entropy", record.entropy->size());
        for (std::size_t i = 0; i < n; ++i) {
            if (!((*record.entropy)[i] >= 0.0)) {
                throw Error(Errc::validation, at("entropy", i) + " < 0");
            }
        }
    }
    if (record.token_prob) {
        check_len("token_prob", record.token_prob->size());
        for (std::size_t i = 0; i < n; ++i) {
            const double p = (*record.token_prob)[i];
            if (!(p >= 0.0 && p <= 1.0)) {
                throw Error(Errc::validation, at("token_prob", i) + " outside [0,1]");
            }
            if (std::abs(p - std::exp(record.logprob[i])) > 1e-6) {
                throw Error(Errc::validation, at("token_prob", i) + " differs from exp(logprob) by more than 1e-6");
            }
        }
    }
    if (record.topk_mass) {
        check_len("topk_mass", record.topk_mass->size());
        for (std::size_t i = 0; i < n; ++i) {
            const double m = (*record.topk_mass)[i];
            if (!(m >= 0.0 && m <= 1.0)) {
                throw Error(Errc::validation, at("topk_mass", i) + " outside [0,1]");
            }
        }
    }
    if (record.mu) {
        check_len("mu", record.mu->size());
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite((*record.mu)[i])) {
                throw Error(Errc::validation, at("mu", i) + " is not finite");
            }
        }
    }
    if (record.sigma2) {
        check_len("sigma2", record.sigma2->size());
        for (std::size_t i = 0; i < n; ++i) {
            if (!((*record.sigma2)[i] >= 0.0)) {
                throw Error(Errc::validation, at("sigma2", i) + " < 0");
            }
        }
    }
}

ScoreRecord parse_record(std::string_view line, std::size_t line_no) {
    return record_from_object(parse_object(line, line_no), line_no);
}

std::string serialize_record(const ScoreRecord & record) {
    ojson obj = ojson::object();
    obj["id"]    = record.id;
    obj["label"] = std::string(to_string(record.label));
    if (record.family) {
        obj["family"] = *record.family;
    }
    if (record.domain_tag) {
        obj["domain_tag"] = *record.domain_tag;
    }
    put_list(obj, "tokens", record.tokens);
    obj["logprob"] = record.logprob;
    put_list(obj, "rank", record.rank);
    put_list(obj, "entropy", record.entropy);
    put_list(obj, "token_prob", record.token_prob);
    put_list(obj, "topk_mass", record.topk_mass);
    put_list(obj, "mu", record.mu);
    put_list(obj, "sigma2", record.sigma2);
    for (const auto & [key, value] : record.extra.items()) {
        obj[key] = value;
    }
    return obj.dump();
}

std::string serialize_stub(const ErrorStub & stub) {
    ojson obj = ojson::object();
    obj["id"] = stub.id;
    if (stub.label) {
        obj["label"] = std::string(to_string(*stub.label));
    }
    if (stub.family) {
        obj["family"] = *stub.family;
    }
    obj["error"] = stub.error;
    return obj.dump();
}

Corpus read_corpus(std::istream & in, std::size_t max_tokens) {
    if (max_tokens < 1) {
        throw Error(Errc::config, "max_tokens must be >= 1");
    }
    Corpus corpus;
    corpus.max_tokens = max_tokens;
    std::unordered_set<std::string> seen;
    auto claim_id = [&](const std::string & id, std::size_t line_no) {
        if (!seen.insert(id).second) {
            throw Error(Errc::duplicate_id, "line " + std::to_string(line_no) + ": duplicate id '" + id + "'");
        }
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        const ojson obj = parse_object(line, line_no);
        if (obj.contains("error") && !obj.contains("logprob")) {
            ErrorStub stub;
            if (!obj.contains("id")) {
                throw Error(Errc::schema, "line " + std::to_string(line_no) + ": error stub without 'id'");
            }
            stub.id = string_field(obj, "id", line_no);
            if (obj.contains("label")) {
                stub.label = label_field(obj, line_no);
            }
            if (obj.contains("family")) {
                stub.family = string_field(obj, "family", line_no);
            }
            stub.error = obj.at("error").is_string() ? obj.at("error").get<std::string>() : obj.at("error").dump();
            claim_id(stub.id, line_no);
            corpus.stubs.push_back(std::move(stub));
            continue;
        }
        ScoreRecord rec = record_from_object(obj, line_no);
        claim_id(rec.id, line_no);
        rec.truncate(max_tokens);
        corpus.records.push_back(std::move(rec));
    }
    if (in.bad()) {
        throw Error(Errc::io, "read failure after line " + std::to_string(line_no));
    }
    return corpus;
}

Corpus load_corpus(const std::filesystem::path & path, std::size_t max_tokens) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::io, "cannot open '" + path.string() + "' for reading");
    }
    try {
        return read_corpus(in, max_tokens);
    } catch (const Error & e) {
        if (e.code() == Errc::io || e.code() == Errc::config) {
            throw;
        }
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

Corpus truncate_corpus(Corpus corpus, std::size_t max_tokens) {
    if (max_tokens < 1) {
        throw Error(Errc::config, "max_tokens must be >= 1");
    }
    for (auto & rec : corpus.records) {
        rec.truncate(max_tokens);
    }
    corpus.max_tokens = max_tokens;
    return corpus;
}

void write_corpus(std::ostream & out, const Corpus & corpus) {
    for (const auto & rec : corpus.records) {
        out << serialize_record(rec) << '\n';
    }
    for (const auto & stub : corpus.stubs) {
        out << serialize_stub(stub) << '\n';
    }
}

}  // namespace tsd
