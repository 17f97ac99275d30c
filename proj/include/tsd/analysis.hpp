#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tsd/features.hpp"
#include "tsd/records.hpp"

namespace tsd {

enum class Transform { raw, abs_derivative, local_std };

std::string_view to_string(Transform transform);
std::optional<Transform> parse_transform(std::string_view text);

enum class Weighting { token, record };

struct CurveOptions {
    Metric    metric    = Metric::log_prob;
    Transform transform = Transform::local_std;
    std::size_t bins    = 100;
    int       window    = 20;
    Weighting weighting = Weighting::token;
};

// Percentile-binned class means of a transformed per-token series. Bins are
// 1-based in the CSV; vectors here are 0-based. A mean is present only where
// the count is nonzero.
struct ClassCurves {
    Metric                             metric    = Metric::log_prob;
    Transform                          transform = Transform::raw;
    std::size_t                        bins      = 0;
    std::vector<std::optional<double>> human_mean;
    std::vector<std::optional<double>> ai_mean;
    std::vector<std::size_t>           human_count;
    std::vector<std::size_t>           ai_count;
    std::size_t                        skipped_records = 0;
};

/// Maps 1-based position i of an n-token record to a 0-based bin floor((i-1)/n * B).
std::size_t position_bin(std::size_t i, std::size_t n, std::size_t bins);

/// Records lacking the metric or too short for the transform are skipped and
/// counted; a class with no contributing record throws Error(empty_class).
ClassCurves aggregate_curves(std::span<const ScoreRecord> records, const CurveOptions & options);

struct DecayStats {
    double                h_decay = 0.0;
    double                a_decay = 0.0;
    std::optional<double> decay_ratio;  // a_decay / h_decay, absent when h_decay == 0
    double                slope_ratio     = 0.0;
    double                second_half_gap = 0.0;
};

// Inclusive 1-based bin range for the OLS fit; last == 0 means "through the last bin".
struct FitRange {
    std::size_t first = 1;
    std::size_t last  = 0;
};

/// OLS slope of y against x.
double ols_slope(std::span<const double> x, std::span<const double> y);

DecayStats decay_stats(const ClassCurves & curves, FitRange fit = {});

void write_curves_csv(std::ostream & out, const ClassCurves & curves);

/// Throws Error(io) when the file cannot be written.
void export_curves(const ClassCurves & curves, const std::filesystem::path & path);

}  // namespace tsd
