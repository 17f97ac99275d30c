#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsd/features.hpp"
#include "tsd/records.hpp"

namespace tsd {

enum class Detector { tsd, dd, lv, fast_detect, likelihood, entropy, log_rank, rank, tsd_plus };

std::string_view to_string(Detector detector);
std::optional<Detector> parse_detector(std::string_view text);

/// Detectors whose emitted score is the negation of the raw statistic, so the
/// raw-orientation AUROC is 1 - oriented AUROC.
bool is_negated_baseline(Detector detector);

enum class FusionMode { raw_sum, z_sum };

std::optional<FusionMode> parse_fusion(std::string_view text);

struct DetectorConfig {
    RegionSpec region      = RegionSpec::second_half();
    int        window      = 20;
    Metric     base_metric = Metric::surprise;
    FusionMode fusion      = FusionMode::raw_sum;

    void validate() const;
};

// Higher score means more likely AI. Exactly one of score / error is set.
struct DetectorScore {
    std::string                record_id;
    std::string                detector;
    std::optional<double>      score;
    std::optional<std::string> error;

    bool ok() const noexcept { return score.has_value(); }
    bool operator==(const DetectorScore &) const = default;
};

// Raw values; these throw tsd::Error on invalid input.
double dd_value(const ScoreRecord & record, const DetectorConfig & config);
double lv_value(const ScoreRecord & record, const DetectorConfig & config);
double fast_detect_value(const ScoreRecord & record);

// Scoring entry points; per-record failures become error tags.
DetectorScore score_dd(const ScoreRecord & record, const DetectorConfig & config);
DetectorScore score_lv(const ScoreRecord & record, const DetectorConfig & config);
DetectorScore score_tsd(const ScoreRecord & record, const DetectorConfig & config);
DetectorScore score_fast_detect(const ScoreRecord & record);

enum class Baseline { likelihood, entropy, mean_log_rank, mean_rank };
DetectorScore score_baseline(const ScoreRecord & record, Baseline which);

/// Sum of two per-record component scores; an error in either names the component.
DetectorScore fuse_raw(const DetectorScore & tsd, const DetectorScore & global);

/// raw_sum: S_TSD + S_fast_detect. z_sum needs the corpus and lives in score_corpus /
/// fuse_standardized; calling this with z_sum throws Error(config).
DetectorScore score_fusion(const ScoreRecord & record, const DetectorConfig & config);

/// Corpus-wide z-score fusion. Inputs are parallel per-record component scores.
std::vector<DetectorScore> fuse_standardized(std::span<const DetectorScore> tsd_scores,
                                             std::span<const DetectorScore> global_scores);

DetectorScore score_record(const ScoreRecord & record, Detector detector, const DetectorConfig & config);

/// Scores every record, in order. Two-phase when detector is tsd_plus under z_sum.
std::vector<DetectorScore> score_corpus(std::span<const ScoreRecord> records, Detector detector,
                                        const DetectorConfig & config);

/// ai iff score > tau. tau must be finite; errored scores are rejected.
std::vector<Label> classify(std::span<const DetectorScore> scores, double tau);

// One row of the scores CSV: id,label,family,detector,score,error.
struct ScoreRow {
    std::string                id;
    Label                      label = Label::human;
    std::string                family;
    std::string                detector;
    std::optional<double>      score;
    std::optional<std::string> error;

    bool operator==(const ScoreRow &) const = default;
};

void write_scores_csv(std::ostream & out, std::span<const ScoreRow> rows);
std::vector<ScoreRow> read_scores_csv(std::istream & in);

}  // namespace tsd
