// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "tsd/analysis.hpp"
#include "tsd/detectors.hpp"
#include "tsd/evaluation.hpp"
#include "tsd/features.hpp"
#include "tsd/pipeline.hpp"
#include "tsd/synth.hpp"

using namespace tsd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool        pass = true;
    std::string detail;

    void fail(const std::string & why) {
        if (pass) {
            detail = why;
        }
        pass = false;
    }
};

int g_failures = 0;

void criterion(const std::string & name, const std::function<Outcome()> & body) {
    const auto t0 = Clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception & e) {
        out.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (!out.pass) {
        ++g_failures;
    }
    std::printf("%s  %-34s %7.3fs  %s\n", out.pass ? "PASS" : "FAIL", name.c_str(), secs, out.detail.c_str());
    std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool rel_close(double a, double b, double tol) {
    const double scale = std::max(std::fabs(a), std::fabs(b));
    return scale == 0.0 || std::fabs(a - b) <= tol * scale;
}

std::vector<LabeledScore> labeled(std::span<const ScoreRecord> recs, std::span<const DetectorScore> scores) {
    std::vector<LabeledScore> out;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (scores[i].ok()) {
            out.push_back({*scores[i].score, recs[i].label});
        }
    }
    return out;
}

double corpus_auroc(std::span<const ScoreRecord> recs, Detector d, const DetectorConfig & config) {
    return auroc(labeled(recs, score_corpus(recs, d, config)));
}

ScoreRecord from_surprise(const std::vector<double> & s, std::string id, Label label) {
    ScoreRecord rec;
    rec.id = std::move(id);
    rec.label = label;
    for (double v : s) {
        rec.logprob.push_back(-v);
    }
    return rec;
}

std::vector<ScoreRecord> synth_via_pipeline(const SynthParams & params) {
    std::stringstream buf;
    run_synth(params, buf);
    return read_corpus(buf, kDefaultMaxTokens).records;
}

std::string slurp(const fs::path & p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

int shell(const std::string & cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome feature_oracle() {
    Outcome out;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240501);
    std::uniform_int_distribution<std::size_t> len(4, 64);
    std::uniform_real_distribution<double> val(0.0, 15.0);
    std::uniform_int_distribution<int> half_window(1, 16);
    std::uniform_int_distribution<int> region_kind(0, 2);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = len(rng);
        std::vector<double> s(n);
        for (auto & v : s) {
            v = val(rng);
        }
        const int w = 2 * half_window(rng);
        RegionSpec spec = RegionSpec::second_half();
        std::vector<std::size_t> region = oracle::positions_after(n / 2, n);
        switch (region_kind(rng)) {
            case 1:
                spec = RegionSpec::full();
                region = oracle::positions_after(0, n);
                break;
            case 2:
                if (n / 2 < 3) {
                    break;  // first half needs two differences
                }
                spec = RegionSpec::first_half();
                region = oracle::positions_upto(n / 2, n);
                break;
            default: break;
        }
        const double dd = derivative_dispersion(s, spec);
        const double lv = local_volatility(s, spec, w);
        const double dd_ref = oracle::dd(s, region);
        const double lv_ref = oracle::lv(s, region, w);
        for (auto [got, want] : {std::pair{dd, dd_ref}, std::pair{lv, lv_ref}}) {
            const double scale = std::max(std::fabs(got), std::fabs(want));
            if (scale > 0.0) {
                worst = std::max(worst, std::fabs(got - want) / scale);
            }
            if (!rel_close(got, want, 1e-12)) {
                out.fail("trial " + std::to_string(trial) + " mismatch");
            }
        }
    }
    const double secs = seconds_since(t0);
    if (secs >= 5.0) {
        out.fail("runtime " + std::to_string(secs) + " s >= 5 s");
    }
    if (out.pass) {
        std::ostringstream d;
        d << "1000 records, max rel err " << worst;
        out.detail = d.str();
    }
    return out;
}

Outcome auroc_oracle() {
    Outcome out;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> size(1, 200);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> coin(0, 3);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> ai(size(rng));
        std::vector<double> human(size(rng));
        for (auto & v : ai) {
            v = std::round(g(rng) * 4.0) / 4.0 + 0.3;  // coarse grid: many ties
        }
        for (auto & v : human) {
            v = coin(rng) == 0 && !ai.empty() ? ai[static_cast<std::size_t>(coin(rng)) % ai.size()]
                                              : std::round(g(rng) * 4.0) / 4.0;
        }
        std::vector<LabeledScore> scores;
        for (double a : ai) {
            scores.push_back({a, Label::ai});
        }
        for (double h : human) {
            scores.push_back({h, Label::human});
        }
        std::shuffle(scores.begin(), scores.end(), rng);
        if (auroc(scores) != oracle::pairwise_auroc(ai, human)) {
            out.fail("instance " + std::to_string(trial) + " differs");
        }
    }
    const double secs = seconds_since(t0);
    if (secs >= 10.0) {
        out.fail("runtime " + std::to_string(secs) + " s >= 10 s");
    }
    if (out.pass) {
        out.detail = "1000 instances, exact equality";
    }
    return out;
}

Outcome invariance() {
    Outcome out;
    const DetectorConfig config;
    const std::vector<Detector> family{Detector::tsd, Detector::dd, Detector::lv};

    // Shift: surprise on a dyadic grid so that s + c is exact in binary floating point.
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> grid(0, 16 * 4096 - 1);
    std::uniform_int_distribution<std::size_t> len(20, 200);
    std::vector<ScoreRecord> base;
    for (int r = 0; r < 300; ++r) {
        std::vector<double> s(len(rng));
        for (auto & v : s) {
            v = grid(rng) / 4096.0;
        }
        base.push_back(from_surprise(s, "r" + std::to_string(r), r % 2 ? Label::ai : Label::human));
    }
    for (double c : {1.0, -3.0, 0.5, 17.25, 1024.0, -0.000244140625}) {
        std::vector<ScoreRecord> shifted = base;
        for (auto & rec : shifted) {
            for (auto & lp : rec.logprob) {
                lp -= c;
            }
        }
        for (Detector d : family) {
            const auto a = score_corpus(base, d, config);
            const auto b = score_corpus(shifted, d, config);
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (*a[i].score != *b[i].score) {
                    out.fail("shift " + std::to_string(c) + " changed " + std::string(to_string(d)));
                }
            }
        }
    }
    // Arbitrary real shifts round s + c; require identical ordering and 1e-12 agreement.
    std::uniform_real_distribution<double> real(0.0, 12.0);
    std::vector<ScoreRecord> cont;
    for (int r = 0; r < 300; ++r) {
        std::vector<double> s(len(rng));
        for (auto & v : s) {
            v = real(rng);
        }
        cont.push_back(from_surprise(s, "c" + std::to_string(r), r % 2 ? Label::ai : Label::human));
    }
    for (double c : {0.1, -2.718281828459045, 3.141592653589793}) {
        std::vector<ScoreRecord> shifted = cont;
        for (auto & rec : shifted) {
            for (auto & lp : rec.logprob) {
                lp -= c;
            }
        }
        for (Detector d : family) {
            const auto a = score_corpus(cont, d, config);
            const auto b = score_corpus(shifted, d, config);
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (!rel_close(*a[i].score, *b[i].score, 1e-12)) {
                    out.fail("real shift moved a score beyond 1e-12");
                }
                for (std::size_t j = 0; j < a.size(); ++j) {
                    if ((*a[i].score < *a[j].score) != (*b[i].score < *b[j].score)) {
                        out.fail("real shift changed the ordering");
                    }
                }
            }
        }
    }

    // Positive scaling and orientation flip on the synthetic corpus.
    SynthParams p;
    p.n_per_class = 150;
    const auto recs = synth_corpus(p);
    for (Detector d : family) {
        const auto scores = score_corpus(recs, d, config);
        const double a = auroc(labeled(recs, scores));
        for (double k : {0.5, 2.0, 3.0, 0.1, 7.25}) {
            std::vector<ScoreRecord> scaled = recs;
            for (auto & rec : scaled) {
                for (auto & lp : rec.logprob) {
                    lp *= k;
                }
            }
            if (corpus_auroc(scaled, d, config) != a) {
                out.fail("scale " + std::to_string(k) + " changed " + std::string(to_string(d)) + " AUROC");
            }
        }
        auto flipped = labeled(recs, scores);
        for (auto & s : flipped) {
            s.score = -s.score;
        }
        if (a + auroc(flipped) != 1.0) {
            out.fail("auroc(s) + auroc(-s) != 1");
        }
    }
    if (out.pass) {
        out.detail = "dyadic shifts bit-identical; real shifts order-preserving; scaling exact";
    }
    return out;
}

struct SynthNumbers {
    double tsd_auroc = 0.0;
};
SynthNumbers g_synth;

Outcome synthetic_corpus() {
    Outcome out;
    const auto t0 = Clock::now();
    const DetectorConfig config;
    SynthParams p;  // 500/class, lengths 250..350, sigma 1 -> 0.25, seed 42
    Corpus corpus;
    corpus.records = synth_via_pipeline(p);

    const double tsd_auroc = corpus_auroc(corpus.records, Detector::tsd, config);
    g_synth.tsd_auroc = tsd_auroc;
    if (!(tsd_auroc >= 0.95)) {
        out.fail("TSD AUROC " + std::to_string(tsd_auroc) + " < 0.95");
    }

    const std::vector<Detector> tsd_only{Detector::tsd};
    const std::vector<RegionSpec> regions{RegionSpec::first_half(), RegionSpec::full(), RegionSpec::second_half()};
    const auto cells = ablate_positions(corpus, tsd_only, regions, config);
    const double first = *cells[0].auroc;
    const double full = *cells[1].auroc;
    const double second = *cells[2].auroc;
    if (!(second >= full && full >= first)) {
        out.fail("ordering violated");
    }

    SynthParams null_params = p;
    null_params.ai_sigma_end = null_params.ai_sigma_start;
    const auto null_recs = synth_via_pipeline(null_params);
    const double null_auroc = corpus_auroc(null_recs, Detector::tsd, config);
    if (!(null_auroc >= 0.45 && null_auroc <= 0.55)) {
        out.fail("null AUROC " + std::to_string(null_auroc) + " outside [0.45, 0.55]");
    }
    const double secs = seconds_since(t0);
    if (secs >= 60.0) {
        out.fail("runtime " + std::to_string(secs) + " s >= 60 s");
    }
    std::ostringstream d;
    d << "tsd " << tsd_auroc << "; first/full/second " << first << "/" << full << "/" << second << "; null "
      << null_auroc;
    if (out.pass) {
        out.detail = d.str();
    } else {
        out.detail += " (" + d.str() + ")";
    }
    return out;
}

Outcome decay_hand_oracle() {
    Outcome out;
    ClassCurves c;
    c.bins = 4;
    for (double v : {10.0, 10.0, 9.0, 9.0}) {
        c.human_mean.emplace_back(v);
        c.human_count.push_back(1);
    }
    for (double v : {10.0, 10.0, 7.0, 7.0}) {
        c.ai_mean.emplace_back(v);
        c.ai_count.push_back(1);
    }
    const auto s = decay_stats(c);
    const auto near = [](double a, double b) { return std::fabs(a - b) <= 1e-9; };
    if (!near(s.h_decay, -0.10)) {
        out.fail("h_decay");
    }
    if (!near(s.a_decay, -0.30)) {
        out.fail("a_decay");
    }
    if (!s.decay_ratio || !near(*s.decay_ratio, 3.0)) {
        out.fail("decay_ratio");
    }
    // -0.2222 is -2/9 rounded to four places; compare against the exact fraction
    if (!near(s.second_half_gap, -2.0 / 9.0)) {
        out.fail("second_half_gap");
    }
    if (out.pass) {
        std::ostringstream d;
        d << "h " << s.h_decay << ", a " << s.a_decay << ", ratio " << *s.decay_ratio << ", gap "
          << s.second_half_gap;
        out.detail = d.str();
    }
    return out;
}

Outcome synthetic_decay() {
    Outcome out;
    SynthParams p;
    const auto recs = synth_via_pipeline(p);
    CurveOptions o;  // log_prob, local_std, 100 bins, w = 20
    const auto s = decay_stats(aggregate_curves(recs, o));
    if (!(s.a_decay < s.h_decay)) {
        out.fail("a_decay >= h_decay");
    }
    if (!(s.second_half_gap < 0.0)) {
        out.fail("second_half_gap >= 0");
    }
    std::ostringstream d;
    d << "h_decay " << s.h_decay << ", a_decay " << s.a_decay << ", gap " << s.second_half_gap;
    out.detail += (out.pass ? "" : " ") + d.str();
    return out;
}

Outcome fusion_arithmetic() {
    Outcome out;
    const DetectorScore tsd_part{"x", "tsd", -1.7879, std::nullopt};
    const DetectorScore fd_part{"x", "fast_detect", 1.4142, std::nullopt};
    const auto raw = fuse_raw(tsd_part, fd_part);
    if (!raw.ok() || std::fabs(*raw.score - (-0.3737)) > 1e-4) {
        out.fail("raw_sum " + (raw.ok() ? std::to_string(*raw.score) : *raw.error));
    }

    const std::vector<DetectorScore> tsd{{"a", "tsd", -1.0, std::nullopt}, {"b", "tsd", 1.0, std::nullopt}};
    const std::vector<DetectorScore> fd{{"a", "fast_detect", -2.0, std::nullopt},
                                        {"b", "fast_detect", 2.0, std::nullopt}};
    const auto z = fuse_standardized(tsd, fd);
    if (!(z[0].ok() && z[1].ok() && *z[0].score == -2.0 && *z[1].score == 2.0)) {
        out.fail("z_sum is not {-2, 2}");
    }
    if (out.pass) {
        std::ostringstream d;
        d << "raw " << *raw.score << "; z {" << *z[0].score << ", " << *z[1].score << "}";
        out.detail = d.str();
    }
    return out;
}

Outcome threshold_oracle() {
    Outcome out;
    std::mt19937_64 rng(31337);
    std::uniform_int_distribution<int> size(1, 60);
    std::uniform_int_distribution<int> grid(-20, 20);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> ai(size(rng));
        std::vector<double> human(size(rng));
        for (auto & v : ai) {
            v = grid(rng) * 0.125 + 0.5;
        }
        for (auto & v : human) {
            v = grid(rng) * 0.125;
        }
        std::vector<LabeledScore> scores;
        for (double a : ai) {
            scores.push_back({a, Label::ai});
        }
        for (double h : human) {
            scores.push_back({h, Label::human});
        }
        std::shuffle(scores.begin(), scores.end(), rng);
        const auto got = select_threshold(scores);
        const auto want = oracle::exhaustive_threshold(ai, human);
        const double want_j = static_cast<double>(want.j_num) / static_cast<double>(ai.size() * human.size());
        if (got.tau != want.tau || got.youden_j != want_j) {
            out.fail("set " + std::to_string(trial) + " disagrees");
        }
    }
    if (out.pass) {
        out.detail = "200 validation sets agree (tau and J)";
    }
    return out;
}

Outcome end_to_end_determinism() {
    Outcome out;
    const fs::path root = fs::temp_directory_path() / "tsd_acceptance_e2e";
    fs::remove_all(root);
    std::vector<std::string> scores;
    std::vector<std::string> reports;
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = root / ("run" + std::to_string(run));
        fs::create_directories(dir);
        const std::string cli = std::string("'") + TSD_CLI_PATH + "'";
        const std::string corpus = "'" + (dir / "corpus.jsonl").string() + "'";
        const std::string sc = "'" + (dir / "scores.csv").string() + "'";
        const std::string rep = "'" + (dir / "report.csv").string() + "'";
        if (shell(cli + " synth --seed 42 --output " + corpus) != 0 ||
            shell(cli + " detect --input " + corpus + " --output " + sc) != 0 ||
            shell(cli + " eval --input " + sc + " --output " + rep + " 2>/dev/null") != 0) {
            out.fail("CLI run " + std::to_string(run) + " failed");
            fs::remove_all(root);
            return out;
        }
        scores.push_back(slurp(dir / "scores.csv"));
        reports.push_back(slurp(dir / "report.csv"));
    }
    fs::remove_all(root);
    if (scores[0] != scores[1]) {
        out.fail("scores CSV differs between runs");
    }
    if (reports[0] != reports[1]) {
        out.fail("report CSV differs between runs");
    }
    // the CLI must reproduce the in-process synthetic AUROC
    const auto pos = reports[0].find("tsd,overall,");
    if (pos == std::string::npos) {
        out.fail("no overall row in report");
        return out;
    }
    const auto start = pos + std::string("tsd,overall,").size();
    const double cli_auroc = std::stod(reports[0].substr(start, reports[0].find(',', start) - start));
    if (g_synth.tsd_auroc != 0.0 && cli_auroc != g_synth.tsd_auroc) {
        out.fail("CLI AUROC differs from in-process value");
    }
    if (out.pass) {
        std::ostringstream d;
        d << "byte-identical scores and report; overall tsd AUROC " << cli_auroc;
        out.detail = d.str();
    }
    return out;
}

}  // namespace

int main() {
    criterion("feature oracle equivalence", feature_oracle);
    criterion("auroc oracle equivalence", auroc_oracle);
    criterion("invariance suite", invariance);
    criterion("synthetic decay corpus", synthetic_corpus);
    criterion("decay_stats hand oracle", decay_hand_oracle);
    criterion("synthetic decay signature", synthetic_decay);
    criterion("fusion arithmetic", fusion_arithmetic);
    criterion("threshold selection oracle", threshold_oracle);
    criterion("end-to-end determinism", end_to_end_determinism);
    std::printf("%d criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
