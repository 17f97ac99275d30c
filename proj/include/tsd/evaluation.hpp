#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tsd/detectors.hpp"
#include "tsd/features.hpp"
#include "tsd/records.hpp"

namespace tsd {

struct LabeledScore {
    double score = 0.0;
    Label  label = Label::human;
};

/// Mann-Whitney AUROC: P(ai score > human score) with ties worth 1/2.
/// Sort-based, O(n log n); throws Error(undefined_statistic) for single-class input.
double auroc(std::span<const LabeledScore> scores);

struct Threshold {
    double tau       = 0.0;
    double youden_j  = 0.0;
};

/// Youden-optimal threshold over midpoints between adjacent distinct scores,
/// ties broken by the smaller tau. With a single distinct score tau is that score.
Threshold select_threshold(std::span<const LabeledScore> scores);

/// Sample Pearson correlation of (x, y) points; needs >= 3 points and nonzero
/// variance in both coordinates.
double pearson(std::span<const std::pair<double, double>> points);

struct LengthCorrelation {
    double pearson_r = 0.0;
    // (family, avg_tokens, auroc)
    std::vector<std::tuple<std::string, double, double>> points;
};

struct ScopeResult {
    std::string           scope;  // "overall" or "family:NAME"
    std::optional<double> auroc;  // absent when a class is empty after exclusions
    std::size_t           n_ai     = 0;
    std::size_t           n_human  = 0;
    std::size_t           excluded = 0;
};

struct EvalReport {
    std::string                      detector;
    double                           auroc_overall = 0.0;
    std::optional<double>            auroc_raw_orientation;  // negated baselines only
    std::map<std::string, double>    auroc_by_family;
    std::vector<ScopeResult>         scopes;
    std::optional<Threshold>         threshold;
    bool                             threshold_in_sample = false;
    std::size_t                      excluded_count = 0;
    std::size_t                      total          = 0;
    std::optional<LengthCorrelation> length_corr;
};

struct EvalOptions {
    // Separate validation scores for tau; when empty and select_threshold is set,
    // tau is chosen on the evaluated scores themselves.
    std::vector<ScoreRow>              validation;
    bool                               select_threshold = true;
    // family -> average token length of that family's AI texts
    std::map<std::string, double>      family_lengths;
};

/// Evaluates the rows of a single detector. Family AUROC compares each family's
/// AI rows against the pooled human rows.
EvalReport evaluate_rows(std::span<const ScoreRow> rows, const EvalOptions & options = {});

/// Groups rows by detector (first-appearance order) and evaluates each group.
std::vector<EvalReport> evaluate_all(std::span<const ScoreRow> rows, const EvalOptions & options = {});

/// Scores the corpus with one detector then evaluates it.
EvalReport evaluate(const Corpus & corpus, Detector detector, const DetectorConfig & config,
                    const EvalOptions & options = {});

/// Rows for a scored corpus, stubs included as errored rows.
std::vector<ScoreRow> score_rows(const Corpus & corpus, Detector detector, const DetectorConfig & config);

/// family -> mean token count over that family's AI records.
std::map<std::string, double> family_lengths(const Corpus & corpus);

void write_report_csv(std::ostream & out, std::span<const EvalReport> reports);
void write_report_json(std::ostream & out, std::span<const EvalReport> reports);
void write_report_table(std::ostream & out, std::span<const EvalReport> reports);

struct AblationCell {
    std::string           detector;
    std::string           region;
    std::optional<double> auroc;
    std::size_t           n_ai     = 0;
    std::size_t           n_human  = 0;
    std::size_t           excluded = 0;
    bool                  flagged  = false;  // more than half the records excluded
};

/// AUROC for every (detector, region) pair, detectors outer, regions inner.
std::vector<AblationCell> ablate_positions(const Corpus & corpus, std::span<const Detector> detectors,
                                           std::span<const RegionSpec> positions, const DetectorConfig & base);

std::vector<RegionSpec> relative_sweep();  // 0.1 .. 0.9
std::vector<RegionSpec> absolute_sweep();  // 25, 50, 100, 150, 200, 250

void write_ablation_csv(std::ostream & out, std::span<const AblationCell> cells);

}  // namespace tsd
