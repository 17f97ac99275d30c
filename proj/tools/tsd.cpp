#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsd/analysis.hpp"
#include "tsd/detectors.hpp"
#include "tsd/error.hpp"
#include "tsd/evaluation.hpp"
#include "tsd/pipeline.hpp"
#include "tsd/records.hpp"
#include "tsd/surrogate_client.hpp"
#include "tsd/synth.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kIo = 2, kData = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int exit_code_for(tsd::Errc code) {
    switch (code) {
        case tsd::Errc::io:
        case tsd::Errc::transport:
            return kIo;
        case tsd::Errc::config:
            return kUsage;
        default:
            return kData;
    }
}

void require_readable(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw tsd::Error(tsd::Errc::io, "cannot open '" + path + "' for reading");
    }
}

// Opens the output up front so a bad path fails before any work starts.
class Output {
  public:
    explicit Output(const std::string & path) {
        if (!path.empty() && path != "-") {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) {
                throw tsd::Error(tsd::Errc::io, "cannot open '" + path + "' for writing");
            }
        }
    }
    std::ostream & stream() { return file_.is_open() ? static_cast<std::ostream &>(file_) : std::cout; }
    void close() {
        stream().flush();
        if (!stream()) {
            throw tsd::Error(tsd::Errc::io, "write failure");
        }
    }

  private:
    std::ofstream file_;
};

struct DetectorFlags {
    std::vector<std::string> detectors;
    std::string region = "second-half";
    int window = 20;
    std::string metric = "surprise";
    std::string fusion = "raw";

    tsd::DetectorConfig config() const {
        tsd::DetectorConfig c;
        try {
            c.region = tsd::parse_region(region);
        } catch (const tsd::Error & e) {
            throw UsageError(e.what());
        }
        c.window = window;
        const auto m = tsd::parse_metric(metric);
        if (!m) {
            throw UsageError("unknown metric '" + metric + "'");
        }
        c.base_metric = *m;
        const auto f = tsd::parse_fusion(fusion);
        if (!f) {
            throw UsageError("unknown fusion mode '" + fusion + "' (raw|z)");
        }
        c.fusion = *f;
        try {
            c.validate();
        } catch (const tsd::Error & e) {
            throw UsageError(e.what());
        }
        return c;
    }

    std::vector<tsd::Detector> parsed(std::vector<std::string> fallback) const {
        const auto & names = detectors.empty() ? fallback : detectors;
        std::vector<tsd::Detector> out;
        for (const auto & name : names) {
            const auto d = tsd::parse_detector(name);
            if (!d) {
                throw UsageError("unknown detector '" + name + "'");
            }
            out.push_back(*d);
        }
        return out;
    }
};

void add_detector_flags(CLI::App * cmd, DetectorFlags & f) {
    cmd->add_option("--detector", f.detectors,
                    "Detector (repeatable): tsd dd lv fast_detect likelihood entropy log_rank rank tsd_plus");
    cmd->add_option("--region", f.region, "first-half | full | second-half | rel:F | abs:K")->capture_default_str();
    cmd->add_option("--window", f.window, "Local volatility window (even, >= 2)")->capture_default_str();
    cmd->add_option("--metric", f.metric, "Base metric for dd/lv/tsd")->capture_default_str();
    cmd->add_option("--fusion", f.fusion, "tsd_plus fusion: raw | z")->capture_default_str();
}

}  // namespace

int main(int argc, char ** argv) {
    CLI::App app{"Late-stage temporal stability detection of machine-generated text"};
    app.require_subcommand(1);

    std::string input;
    std::string output;
    std::size_t max_tokens = tsd::kDefaultMaxTokens;

    // score
    auto * score = app.add_subcommand("score", "Score raw texts through an OpenAI-compatible completions endpoint");
    tsd::EndpointConfig endpoint;
    std::string api_key;
    double timeout_s = 60.0;
    std::string cache_dir;
    score->add_option("--input", input, "Text JSONL {id,label,family?,text}")->required();
    score->add_option("--output", output, "Score record JSONL (default stdout)");
    score->add_option("--base-url", endpoint.base_url, "Endpoint base URL, e.g. http://localhost:8000/v1")->required();
    score->add_option("--model", endpoint.model, "Model name")->required();
    score->add_option("--api-key", api_key, "API key (default: $TSD_API_KEY or $OPENAI_API_KEY)");
    score->add_option("--top-logprobs", endpoint.top_logprobs, "Alternatives per token (1-20)")->capture_default_str();
    score->add_option("--max-parallel", endpoint.max_parallel, "Requests in flight")->capture_default_str();
    score->add_option("--timeout", timeout_s, "Per-request timeout in seconds")->capture_default_str();
    score->add_option("--max-retries", endpoint.max_retries, "Retries on transport failure")->capture_default_str();
    score->add_option("--cache-dir", cache_dir, "Directory for cached records");

    // detect
    auto * detect = app.add_subcommand("detect", "Compute detector scores for a score-record corpus");
    DetectorFlags detect_flags;
    detect->add_option("--input", input, "Score record JSONL")->required();
    detect->add_option("--output", output, "Scores CSV (default stdout)");
    detect->add_option("--max-tokens", max_tokens, "Truncation cap")->capture_default_str();
    add_detector_flags(detect, detect_flags);

    // analyze
    auto * analyze = app.add_subcommand("analyze", "Percentile-binned class curves and decay statistics");
    std::string analyze_metric = "log_prob";
    std::string transform = "local_std";
    std::size_t bins = 100;
    int analyze_window = 20;
    bool record_weighted = false;
    std::string stats_path;
    std::size_t fit_first = 1;
    std::size_t fit_last = 0;
    analyze->add_option("--input", input, "Score record JSONL")->required();
    analyze->add_option("--output", output, "Curves CSV (default stdout)");
    analyze->add_option("--metric", analyze_metric, "Base metric")->capture_default_str();
    analyze->add_option("--transform", transform, "raw | abs_derivative | local_std")->capture_default_str();
    analyze->add_option("--bins", bins, "Percentile bins")->capture_default_str();
    analyze->add_option("--window", analyze_window, "Local std window")->capture_default_str();
    analyze->add_option("--max-tokens", max_tokens, "Truncation cap")->capture_default_str();
    analyze->add_flag("--record-weighted", record_weighted, "Average per record before averaging across records");
    analyze->add_option("--stats", stats_path, "Write decay statistics JSON here");
    analyze->add_option("--fit-first", fit_first, "First bin of the OLS fit")->capture_default_str();
    analyze->add_option("--fit-last", fit_last, "Last bin of the OLS fit (0 = last bin)")->capture_default_str();

    // eval
    auto * eval = app.add_subcommand("eval", "AUROC report from a scores CSV");
    std::string json_path;
    std::string validation_path;
    std::string corpus_path;
    eval->add_option("--input", input, "Scores CSV from detect")->required();
    eval->add_option("--output", output, "Report CSV (default stdout)");
    eval->add_option("--json", json_path, "Also write a JSON report");
    eval->add_option("--validation", validation_path, "Scores CSV used to choose the threshold");
    eval->add_option("--corpus", corpus_path, "Score record JSONL for the length/AUROC correlation");
    eval->add_option("--max-tokens", max_tokens, "Truncation cap for --corpus")->capture_default_str();

    // ablate
    auto * ablate = app.add_subcommand("ablate", "Position ablation: AUROC per detector and region");
    DetectorFlags ablate_flags;
    std::vector<std::string> positions;
    std::string sweep;
    ablate->add_option("--input", input, "Score record JSONL")->required();
    ablate->add_option("--output", output, "Ablation CSV (default stdout)");
    ablate->add_option("--max-tokens", max_tokens, "Truncation cap")->capture_default_str();
    ablate->add_option("--position", positions, "Region (repeatable); default first-half, full, second-half");
    ablate->add_option("--sweep", sweep, "relative | absolute start-position sweep");
    add_detector_flags(ablate, ablate_flags);

    // synth
    auto * synth = app.add_subcommand("synth", "Generate a synthetic volatility-decay corpus");
    tsd::SynthParams synth_params;
    synth->add_option("--output", output, "Score record JSONL (default stdout)");
    synth->add_option("--n-per-class", synth_params.n_per_class, "Records per class")->capture_default_str();
    synth->add_option("--min-length", synth_params.min_length, "Shortest record")->capture_default_str();
    synth->add_option("--max-length", synth_params.max_length, "Longest record")->capture_default_str();
    synth->add_option("--human-sigma", synth_params.human_sigma, "Human surprise std")->capture_default_str();
    synth->add_option("--ai-sigma-start", synth_params.ai_sigma_start, "AI std at the first token")->capture_default_str();
    synth->add_option("--ai-sigma-end", synth_params.ai_sigma_end, "AI std at the last token")->capture_default_str();
    synth->add_option("--seed", synth_params.seed, "RNG seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError & e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*score) {
            require_readable(input);
            if (!api_key.empty()) {
                endpoint.api_key = api_key;
            } else if (const char * env = std::getenv("TSD_API_KEY")) {
                endpoint.api_key = env;
            } else if (const char * env2 = std::getenv("OPENAI_API_KEY")) {
                endpoint.api_key = env2;
            }
            endpoint.timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000.0));
            if (!cache_dir.empty()) {
                endpoint.cache_dir = cache_dir;
            }
            try {
                endpoint.validate();
            } catch (const tsd::Error & e) {
                throw UsageError(e.what());
            }
            Output out(output);
            tsd::SurrogateClient client(endpoint);
            std::ifstream in(input, std::ios::binary);
            const auto summary = tsd::score_corpus(in, out.stream(), client, [](std::size_t done, std::size_t total) {
                if (done == total || done % 50 == 0) {
                    std::cerr << "\rscored " << done << "/" << total << std::flush;
                }
            });
            out.close();
            std::cerr << "\n" << summary.written << " records written, " << summary.failed << " failed, "
                      << client.network_requests() << " requests\n";
        } else if (*detect) {
            const auto config = detect_flags.config();
            const auto detectors = detect_flags.parsed({"tsd"});
            require_readable(input);
            Output out(output);
            const auto corpus = tsd::load_corpus(input, max_tokens);
            const auto rows = tsd::run_detect(corpus, detectors, config);
            tsd::write_scores_csv(out.stream(), rows);
            out.close();
            std::size_t errors = 0;
            for (const auto & r : rows) {
                errors += r.error.has_value();
            }
            std::cerr << corpus.records.size() << " records, " << rows.size() << " rows, " << errors
                      << " per-record errors\n";
        } else if (*analyze) {
            tsd::CurveOptions options;
            const auto m = tsd::parse_metric(analyze_metric);
            const auto t = tsd::parse_transform(transform);
            if (!m || !t) {
                throw UsageError("unknown metric or transform");
            }
            options.metric = *m;
            options.transform = *t;
            options.bins = bins;
            options.window = analyze_window;
            options.weighting = record_weighted ? tsd::Weighting::record : tsd::Weighting::token;
            require_readable(input);
            Output out(output);
            std::optional<Output> stats_out;
            if (!stats_path.empty()) {
                stats_out.emplace(stats_path);
            }
            const auto corpus = tsd::load_corpus(input, max_tokens);
            const auto curves = tsd::aggregate_curves(corpus.records, options);
            tsd::write_curves_csv(out.stream(), curves);
            out.close();
            const auto stats = tsd::decay_stats(curves, {fit_first, fit_last});
            nlohmann::ordered_json j;
            j["metric"] = std::string(tsd::to_string(options.metric));
            j["transform"] = std::string(tsd::to_string(options.transform));
            j["bins"] = options.bins;
            j["h_decay"] = stats.h_decay;
            j["a_decay"] = stats.a_decay;
            j["decay_ratio"] = stats.decay_ratio ? nlohmann::ordered_json(*stats.decay_ratio) : nullptr;
            j["slope_ratio"] = stats.slope_ratio;
            j["second_half_gap"] = stats.second_half_gap;
            j["skipped_records"] = curves.skipped_records;
            std::cerr << j.dump(2) << '\n';
            if (stats_out) {
                stats_out->stream() << j.dump(2) << '\n';
                stats_out->close();
            }
        } else if (*eval) {
            require_readable(input);
            if (!validation_path.empty()) {
                require_readable(validation_path);
            }
            if (!corpus_path.empty()) {
                require_readable(corpus_path);
            }
            Output out(output);
            std::optional<Output> json_out;
            if (!json_path.empty()) {
                json_out.emplace(json_path);
            }
            std::ifstream in(input, std::ios::binary);
            const auto rows = tsd::read_scores_csv(in);
            tsd::EvalOptions options;
            if (!validation_path.empty()) {
                std::ifstream vin(validation_path, std::ios::binary);
                options.validation = tsd::read_scores_csv(vin);
            }
            if (!corpus_path.empty()) {
                options.family_lengths = tsd::family_lengths(tsd::load_corpus(corpus_path, max_tokens));
            }
            const auto reports = tsd::evaluate_all(rows, options);
            tsd::write_report_csv(out.stream(), reports);
            out.close();
            if (json_out) {
                tsd::write_report_json(json_out->stream(), reports);
                json_out->close();
            }
            tsd::write_report_table(std::cerr, reports);
        } else if (*ablate) {
            const auto config = ablate_flags.config();
            const auto detectors = ablate_flags.parsed({"dd", "lv", "tsd"});
            std::vector<tsd::RegionSpec> regions;
            if (sweep == "relative") {
                regions = tsd::relative_sweep();
            } else if (sweep == "absolute") {
                regions = tsd::absolute_sweep();
            } else if (!sweep.empty()) {
                throw UsageError("unknown sweep '" + sweep + "' (relative|absolute)");
            }
            try {
                for (const auto & p : positions) {
                    regions.push_back(tsd::parse_region(p));
                }
            } catch (const tsd::Error & e) {
                throw UsageError(e.what());
            }
            if (regions.empty()) {
                regions = {tsd::RegionSpec::first_half(), tsd::RegionSpec::full(), tsd::RegionSpec::second_half()};
            }
            require_readable(input);
            Output out(output);
            const auto corpus = tsd::load_corpus(input, max_tokens);
            const auto cells = tsd::ablate_positions(corpus, detectors, regions, config);
            tsd::write_ablation_csv(out.stream(), cells);
            out.close();
        } else if (*synth) {
            try {
                synth_params.validate();
            } catch (const tsd::Error & e) {
                throw UsageError(e.what());
            }
            Output out(output);
            tsd::run_synth(synth_params, out.stream());
            out.close();
        }
    } catch (const UsageError & e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const tsd::Error & e) {
        std::cerr << "error: " << e.tagged() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    }
    return kOk;
}
