#include "tsd/surrogate_client.hpp"

#include <cmath>
#include <condition_variable>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <variant>

#include <httplib.h>
#include <openssl/evp.h>

#include "tsd/error.hpp"

namespace tsd {

using json = nlohmann::json;

namespace {

bool mentions(const std::string & body, std::initializer_list<const char *> needles) {
    std::string lower(body);
    for (auto & c : lower) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    for (const char * n : needles) {
        if (lower.find(n) != std::string::npos) {
            return true;
        }
    }
    return false;
}

std::optional<ScoreRecord> read_cache(const std::filesystem::path & file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_record(buf.str());
    } catch (const Error &) {
        return std::nullopt;  // corrupt entry: rescore and overwrite
    }
}

void write_cache(const std::filesystem::path & file, const ScoreRecord & record) {
    // unique temp name per writer, then an atomic rename into place
    std::ostringstream tmp_name;
    tmp_name << file.filename().string() << ".tmp." << std::this_thread::get_id();
    const auto tmp = file.parent_path() / tmp_name.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(Errc::io, "cannot write cache entry '" + tmp.string() + "'");
        }
        out << serialize_record(record) << '\n';
    }
    std::error_code ec;
    std::filesystem::rename(tmp, file, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
    }
}

void apply_metadata(ScoreRecord & record, const TextInput & input) {
    record.id         = input.id;
    record.label      = input.label;
    record.family     = input.family;
    record.domain_tag = input.domain_tag;
}

}  // namespace

void EndpointConfig::validate() const {
    if (base_url.empty()) {
        throw Error(Errc::config, "base_url is required");
    }
    if (base_url.find("://") == std::string::npos) {
        throw Error(Errc::config, "base_url must include a scheme, e.g. http://host:port/v1");
    }
    if (model.empty()) {
        throw Error(Errc::config, "model is required");
    }
    if (top_logprobs < 1 || top_logprobs > 20) {
        throw Error(Errc::config, "top_logprobs must be in [1, 20]");
    }
    if (max_parallel < 1 || max_parallel > 256) {
        throw Error(Errc::config, "max_parallel must be in [1, 256]");
    }
    if (max_retries < 0) {
        throw Error(Errc::config, "max_retries must be >= 0");
    }
}

TextInput parse_text_input(std::string_view line, std::size_t line_no) {
    const std::string where = line_no ? "line " + std::to_string(line_no) + ": " : std::string();
    json obj;
    try {
        obj = json::parse(line.begin(), line.end());
    } catch (const json::parse_error & e) {
        throw Error(Errc::parse, where + "malformed JSON: " + e.what());
    }
    if (!obj.is_object()) {
        throw Error(Errc::parse, where + "expected a JSON object");
    }
    for (const char * key : {"id", "label", "text"}) {
        if (!obj.contains(key) || !obj.at(key).is_string()) {
            throw Error(Errc::schema, where + "missing string field '" + key + "'");
        }
    }
    TextInput input;
    input.id = obj.at("id").get<std::string>();
    const auto label = parse_label(obj.at("label").get<std::string>());
    if (!label) {
        throw Error(Errc::validation, where + "label must be 'human' or 'ai'");
    }
    input.label = *label;
    input.text  = obj.at("text").get<std::string>();
    if (obj.contains("family") && obj.at("family").is_string()) {
        input.family = obj.at("family").get<std::string>();
    }
    if (obj.contains("domain_tag") && obj.at("domain_tag").is_string()) {
        input.domain_tag = obj.at("domain_tag").get<std::string>();
    }
    return input;
}

std::string cache_key(const std::string & model, const std::string & text, int top_logprobs) {
    std::string material = model;
    material.push_back('\0');
    material += text;
    material.push_back('\0');
    material += std::to_string(top_logprobs);

    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(material.data(), material.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(Errc::io, "SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

json completion_request(const EndpointConfig & config, const std::string & text) {
    return json{
        {"model", config.model},
        {"prompt", text},
        {"max_tokens", 0},
        {"echo", true},
        {"logprobs", config.top_logprobs},
        {"temperature", 0},
    };
}

ScoreRecord record_from_completion(const json & response, const TextInput & input, int top_logprobs) {
    if (!response.is_object() || !response.contains("choices") || !response["choices"].is_array() ||
        response["choices"].empty()) {
        throw Error(Errc::capability, "completion response has no choices");
    }
    const auto & choice = response["choices"][0];
    if (!choice.contains("logprobs") || !choice["logprobs"].is_object()) {
        throw Error(Errc::capability, "endpoint did not return logprobs (echo + logprobs unsupported?)");
    }
    const auto & lp = choice["logprobs"];
    if (!lp.contains("token_logprobs") || !lp["token_logprobs"].is_array()) {
        throw Error(Errc::capability, "endpoint did not return token_logprobs");
    }
    const auto & token_logprobs = lp["token_logprobs"];
    std::size_t count = token_logprobs.size();

    // keep prompt tokens only, in case the server generated anything
    if (lp.contains("text_offset") && lp["text_offset"].is_array()) {
        const auto & offsets = lp["text_offset"];
        std::size_t prompt_tokens = 0;
        while (prompt_tokens < std::min(count, offsets.size()) && offsets[prompt_tokens].is_number() &&
               offsets[prompt_tokens].get<std::size_t>() < input.text.size()) {
            ++prompt_tokens;
        }
        count = prompt_tokens;
    }
    if (count < 2) {
        throw Error(Errc::insufficient_length, "text has fewer than 2 tokens; no conditional probability remains");
    }
    const bool has_tokens = lp.contains("tokens") && lp["tokens"].is_array() && lp["tokens"].size() >= count;
    const bool has_top = lp.contains("top_logprobs") && lp["top_logprobs"].is_array() &&
                         lp["top_logprobs"].size() >= count;

    ScoreRecord rec;
    apply_metadata(rec, input);
    std::vector<std::string> tokens;
    std::vector<double> topk;
    bool topk_complete = has_top;
    for (std::size_t t = 1; t < count; ++t) {
        if (!token_logprobs[t].is_number()) {
            throw Error(Errc::capability, "token_logprobs[" + std::to_string(t) + "] is not a number");
        }
        double value = token_logprobs[t].get<double>();
        if (value > 0.0 && value <= 1e-6) {
            value = 0.0;
        }
        rec.logprob.push_back(value);
        if (has_tokens && lp["tokens"][t].is_string()) {
            tokens.push_back(lp["tokens"][t].get<std::string>());
        }
        if (topk_complete) {
            const auto & alts = lp["top_logprobs"][t];
            if (!alts.is_object() || alts.empty()) {
                topk_complete = false;
                continue;
            }
            double mass = 0.0;
            for (const auto & [tok, alt_lp] : alts.items()) {
                if (alt_lp.is_number()) {
                    mass += std::exp(alt_lp.get<double>());
                }
            }
            topk.push_back(std::min(mass, 1.0));
        }
    }
    if (tokens.size() == rec.logprob.size()) {
        rec.tokens = std::move(tokens);
    }
    if (topk_complete && topk.size() == rec.logprob.size()) {
        rec.topk_mass = std::move(topk);
        rec.extra["topk_mass_approx"] = true;
        rec.extra["top_logprobs"]     = top_logprobs;
    }
    validate(rec);
    return rec;
}

SurrogateClient::SurrogateClient(EndpointConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto scheme_end = config_.base_url.find("://");
    const auto path_start = config_.base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        scheme_host_port_ = config_.base_url;
    } else {
        scheme_host_port_ = config_.base_url.substr(0, path_start);
        path_prefix_      = config_.base_url.substr(path_start);
    }
    while (!path_prefix_.empty() && path_prefix_.back() == '/') {
        path_prefix_.pop_back();
    }
    if (config_.cache_dir) {
        std::error_code ec;
        std::filesystem::create_directories(*config_.cache_dir, ec);
        if (ec) {
            throw Error(Errc::io, "cannot create cache dir '" + config_.cache_dir->string() + "': " + ec.message());
        }
    }
}

json SurrogateClient::post_completion(const std::string & text) {
    const std::string body = completion_request(config_, text).dump();
    const std::string path = path_prefix_ + "/completions";
    std::string last_failure = "no attempt made";

    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(config_.backoff_base * (1LL << std::min(attempt - 1, 16)));
        }
        httplib::Client cli(scheme_host_port_);
        const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
        const auto micros =
            std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
        cli.set_connection_timeout(seconds.count(), micros.count());
        cli.set_read_timeout(seconds.count(), micros.count());
        cli.set_write_timeout(seconds.count(), micros.count());
        httplib::Headers headers;
        if (config_.api_key) {
            headers.emplace("Authorization", "Bearer " + *config_.api_key);
        }
        ++requests_;
        const auto res = cli.Post(path, headers, body, "application/json");
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status >= 400) {
            if (mentions(res->body, {"context length", "context_length", "maximum context", "too long", "too many tokens"})) {
                throw Error(Errc::request_split, "text exceeds the endpoint's token limit (HTTP " +
                                                     std::to_string(res->status) + ")");
            }
            if (mentions(res->body, {"echo", "logprobs"})) {
                throw Error(Errc::capability, "endpoint rejected echo/logprobs request: " + res->body.substr(0, 200));
            }
            throw Error(Errc::transport, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
        }
        try {
            return json::parse(res->body);
        } catch (const json::parse_error &) {
            last_failure = "malformed JSON response";
        }
    }
    throw Error(Errc::transport, last_failure + " after " + std::to_string(config_.max_retries + 1) + " attempts");
}

ScoreRecord SurrogateClient::score_text(const TextInput & input) {
    if (input.text.empty()) {
        throw Error(Errc::validation, "text is empty");
    }
    std::optional<std::filesystem::path> cache_file;
    if (config_.cache_dir) {
        cache_file = *config_.cache_dir / (cache_key(config_.model, input.text, config_.top_logprobs) + ".json");
        if (auto hit = read_cache(*cache_file)) {
            apply_metadata(*hit, input);
            return *hit;
        }
    }
    ScoreRecord rec = record_from_completion(post_completion(input.text), input, config_.top_logprobs);
    if (cache_file) {
        write_cache(*cache_file, rec);
    }
    return rec;
}

ScoreSummary score_corpus(std::istream & in, std::ostream & out, SurrogateClient & client,
                          const std::function<void(std::size_t, std::size_t)> & progress) {
    using Job = std::variant<TextInput, ErrorStub>;
    std::vector<Job> jobs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            jobs.emplace_back(parse_text_input(line, line_no));
        } catch (const Error & e) {
            ErrorStub stub{"line-" + std::to_string(line_no), std::nullopt, std::nullopt, e.tagged()};
            try {
                const auto obj = json::parse(line);
                if (obj.contains("id") && obj["id"].is_string()) {
                    stub.id = obj["id"].get<std::string>();
                }
                if (obj.contains("label") && obj["label"].is_string()) {
                    stub.label = parse_label(obj["label"].get<std::string>());
                }
            } catch (const json::exception &) {
            }
            jobs.emplace_back(std::move(stub));
        }
    }

    const std::size_t total = jobs.size();
    std::vector<std::optional<std::string>> results(total);
    std::vector<bool> failed(total, false);
    std::mutex mutex;
    std::size_t next_to_write = 0;
    std::size_t done = 0;
    ScoreSummary summary;
    std::atomic<std::size_t> next_job{0};

    auto finish = [&](std::size_t i, std::string text, bool is_failure) {
        std::lock_guard lock(mutex);
        results[i] = std::move(text);
        failed[i]  = is_failure;
        ++done;
        while (next_to_write < total && results[next_to_write]) {
            out << *results[next_to_write] << '\n';
            (failed[next_to_write] ? summary.failed : summary.written) += 1;
            results[next_to_write] = std::string();  // keep the slot non-empty, drop the payload
            ++next_to_write;
        }
        out.flush();
        if (progress) {
            progress(done, total);
        }
    };

    auto worker = [&] {
        for (std::size_t i = next_job++; i < total; i = next_job++) {
            if (const auto * stub = std::get_if<ErrorStub>(&jobs[i])) {
                finish(i, serialize_stub(*stub), true);
                continue;
            }
            const auto & input = std::get<TextInput>(jobs[i]);
            try {
                finish(i, serialize_record(client.score_text(input)), false);
            } catch (const Error & e) {
                finish(i, serialize_stub({input.id, input.label, input.family, e.tagged()}), true);
            } catch (const std::exception & e) {
                finish(i, serialize_stub({input.id, input.label, input.family, std::string("transport: ") + e.what()}),
                       true);
            }
        }
    };

    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(client.config().max_parallel), std::max<std::size_t>(total, 1));
    std::vector<std::jthread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) {
        threads.emplace_back(worker);
    }
    worker();
    threads.clear();
    if (!out) {
        throw Error(Errc::io, "write failure on scored output");
    }
    return summary;
}

}  // namespace tsd
