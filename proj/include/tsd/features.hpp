#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsd/records.hpp"

namespace tsd {

enum class RegionMode { full, first_half, second_half, relative_start, absolute_start };

// Which token positions feed a feature. Positions are 1-based.
struct RegionSpec {
    RegionMode  mode     = RegionMode::second_half;
    double      fraction = 0.5;  // relative_start only, strictly inside (0,1)
    std::size_t start    = 0;    // absolute_start only

    static RegionSpec full() { return {RegionMode::full}; }
    static RegionSpec first_half() { return {RegionMode::first_half}; }
    static RegionSpec second_half() { return {RegionMode::second_half}; }
    static RegionSpec relative(double fraction);
    static RegionSpec absolute(std::size_t start);

    bool operator==(const RegionSpec &) const = default;
};

/// Accepts first-half | full | second-half | rel:F | abs:K.
RegionSpec parse_region(std::string_view text);
std::string to_string(const RegionSpec & spec);

// Contiguous 1-based inclusive position range [first, last].
struct PositionRange {
    std::size_t first = 1;
    std::size_t last  = 0;

    std::size_t size() const noexcept { return last >= first ? last - first + 1 : 0; }
    bool contains(std::size_t i) const noexcept { return i >= first && i <= last; }

    bool operator==(const PositionRange &) const = default;
};

/// second_half -> {i > floor(n/2)}, first_half -> {i <= floor(n/2)},
/// relative_start(f) -> {i > floor(f*n)}, absolute_start(k) -> {i > k}.
/// Throws Error(empty_region) when nothing is left.
PositionRange resolve_region(const RegionSpec & spec, std::size_t n);

enum class Metric { log_prob, surprise, sampling_discrepancy, rank, log_rank, entropy, token_prob, topk_mass };

std::string_view to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view text);

struct MetricSeries {
    Metric              metric = Metric::surprise;
    std::vector<double> values;
};

/// s_i = -logprob_i.
MetricSeries surprise(const ScoreRecord & record);

/// Per-token series of the requested statistic. Throws Error(missing_field)
/// when the record lacks the backing list, Error(degenerate) for a zero-variance
/// prediction whose realized logprob differs from its mean.
MetricSeries metric_series(const ScoreRecord & record, Metric metric);

/// out[j] = |values[j+1] - values[j]|; out[j] belongs to 1-based position j+2.
std::vector<double> abs_diff(std::span<const double> values);

/// Population std over the centred window [i - w/2, i + w/2], truncated at the
/// sequence ends. w must be even and >= 2; n >= 2.
std::vector<double> local_std(std::span<const double> values, int window);

/// Population std of the diffs d_i (i >= 2) whose later endpoint lies in the region.
double derivative_dispersion(std::span<const double> series, const RegionSpec & region);

/// Mean of local_std over the region positions.
double local_volatility(std::span<const double> series, const RegionSpec & region, int window);

/// Record overloads operate on the surprise series.
double derivative_dispersion(const ScoreRecord & record, const RegionSpec & region);
double local_volatility(const ScoreRecord & record, const RegionSpec & region, int window);

/// Throws Error(config) unless window >= 2 and even.
void check_window(int window);

}  // namespace tsd
