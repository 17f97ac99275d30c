#include "tsd/analysis.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

#include "tsd/csv.hpp"
#include "tsd/error.hpp"

namespace tsd {

namespace {

// Values of the transformed series paired with their 1-based positions.
struct PositionedSeries {
    std::vector<double> values;
    std::size_t         first_position = 1;
};

PositionedSeries transformed(const ScoreRecord & record, const CurveOptions & options) {
    const auto series = metric_series(record, options.metric);
    switch (options.transform) {
        case Transform::raw:            return {series.values, 1};
        case Transform::abs_derivative: return {abs_diff(series.values), 2};
        case Transform::local_std:      return {local_std(series.values, options.window), 1};
    }
    throw Error(Errc::config, "unknown transform");
}

struct BinAccumulator {
    std::vector<double>      sum;
    std::vector<std::size_t> count;
    std::size_t              records = 0;

    explicit BinAccumulator(std::size_t bins) : sum(bins, 0.0), count(bins, 0) {}
};

struct HalfMeans {
    double first  = 0.0;
    double second = 0.0;
};

HalfMeans half_means(const std::vector<std::optional<double>> & curve, const char * cls) {
    const std::size_t bins = curve.size();
    double s1 = 0.0;
    double s2 = 0.0;
    std::size_t c1 = 0;
    std::size_t c2 = 0;
    for (std::size_t b = 1; b <= bins; ++b) {
        if (!curve[b - 1]) {
            continue;
        }
        if (2 * b <= bins) {
            s1 += *curve[b - 1];
            ++c1;
        } else {
            s2 += *curve[b - 1];
            ++c2;
        }
    }
    if (c1 == 0 || c2 == 0) {
        throw Error(Errc::undefined_statistic, std::string(cls) + " curve has an empty half");
    }
    return {s1 / static_cast<double>(c1), s2 / static_cast<double>(c2)};
}

double curve_slope(const std::vector<std::optional<double>> & curve, FitRange fit) {
    const std::size_t last = fit.last == 0 ? curve.size() : std::min(fit.last, curve.size());
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t b = std::max<std::size_t>(fit.first, 1); b <= last; ++b) {
        if (curve[b - 1]) {
            x.push_back(static_cast<double>(b));
            y.push_back(*curve[b - 1]);
        }
    }
    return ols_slope(x, y);
}

}  // namespace

std::string_view to_string(Transform transform) {
    switch (transform) {
        case Transform::raw:            return "raw";
        case Transform::abs_derivative: return "abs_derivative";
        case Transform::local_std:      return "local_std";
    }
    return "?";
}

std::optional<Transform> parse_transform(std::string_view text) {
    for (Transform t : {Transform::raw, Transform::abs_derivative, Transform::local_std}) {
        if (text == to_string(t)) {
            return t;
        }
    }
    if (text == "derivative") {
        return Transform::abs_derivative;
    }
    return std::nullopt;
}

std::size_t position_bin(std::size_t i, std::size_t n, std::size_t bins) {
    return (i - 1) * bins / n;
}

ClassCurves aggregate_curves(std::span<const ScoreRecord> records, const CurveOptions & options) {
    if (options.bins < 1) {
        throw Error(Errc::config, "bins must be >= 1");
    }
    if (options.transform == Transform::local_std) {
        check_window(options.window);
    }
    const std::size_t bins = options.bins;
    BinAccumulator human(bins);
    BinAccumulator ai(bins);
    ClassCurves curves;
    curves.metric    = options.metric;
    curves.transform = options.transform;
    curves.bins      = bins;

    std::vector<double>      rec_sum(bins);
    std::vector<std::size_t> rec_count(bins);
    for (const auto & rec : records) {
        PositionedSeries series;
        try {
            series = transformed(rec, options);
        } catch (const Error & e) {
            if (e.code() == Errc::config) {
                throw;
            }
            ++curves.skipped_records;
            continue;
        }
        auto & acc = rec.label == Label::ai ? ai : human;
        ++acc.records;
        const std::size_t n = rec.size();
        if (options.weighting == Weighting::token) {
            for (std::size_t k = 0; k < series.values.size(); ++k) {
                const std::size_t b = position_bin(series.first_position + k, n, bins);
                acc.sum[b] += series.values[k];
                acc.count[b] += 1;
            }
        } else {
            std::fill(rec_sum.begin(), rec_sum.end(), 0.0);
            std::fill(rec_count.begin(), rec_count.end(), 0);
            for (std::size_t k = 0; k < series.values.size(); ++k) {
                const std::size_t b = position_bin(series.first_position + k, n, bins);
                rec_sum[b] += series.values[k];
                rec_count[b] += 1;
            }
            for (std::size_t b = 0; b < bins; ++b) {
                if (rec_count[b] > 0) {
                    acc.sum[b] += rec_sum[b] / static_cast<double>(rec_count[b]);
                    acc.count[b] += 1;
                }
            }
        }
    }
    if (human.records == 0 || ai.records == 0) {
        throw Error(Errc::empty_class, std::string("no ") + (human.records == 0 ? "human" : "ai") +
                                           " record provides metric " + std::string(to_string(options.metric)) +
                                           " with transform " + std::string(to_string(options.transform)));
    }
    auto finish = [bins](const BinAccumulator & acc, std::vector<std::optional<double>> & mean,
                         std::vector<std::size_t> & count) {
        mean.assign(bins, std::nullopt);
        count = acc.count;
        for (std::size_t b = 0; b < bins; ++b) {
            if (acc.count[b] > 0) {
                mean[b] = acc.sum[b] / static_cast<double>(acc.count[b]);
            }
        }
    };
    finish(human, curves.human_mean, curves.human_count);
    finish(ai, curves.ai_mean, curves.ai_count);
    return curves;
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw Error(Errc::undefined_statistic, "OLS slope needs at least 2 points");
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) {
        throw Error(Errc::undefined_statistic, "OLS slope undefined for a single x value");
    }
    return sxy / sxx;
}

DecayStats decay_stats(const ClassCurves & curves, FitRange fit) {
    const HalfMeans h = half_means(curves.human_mean, "human");
    const HalfMeans a = half_means(curves.ai_mean, "ai");
    if (h.first == 0.0 || a.first == 0.0) {
        throw Error(Errc::undefined_statistic, "first-half mean is zero; decay undefined");
    }
    if (h.second == 0.0) {
        throw Error(Errc::undefined_statistic, "human second-half mean is zero; gap undefined");
    }
    DecayStats s;
    s.h_decay = (h.second - h.first) / h.first;
    s.a_decay = (a.second - a.first) / a.first;
    if (s.h_decay != 0.0) {
        s.decay_ratio = s.a_decay / s.h_decay;
    }
    s.second_half_gap = (a.second - h.second) / h.second;

    const double human_slope = curve_slope(curves.human_mean, fit);
    if (human_slope == 0.0) {
        throw Error(Errc::undefined_statistic, "human curve slope is zero; slope ratio undefined");
    }
    s.slope_ratio = curve_slope(curves.ai_mean, fit) / human_slope;
    return s;
}

void write_curves_csv(std::ostream & out, const ClassCurves & curves) {
    csv::write_row(out, {"bin", "human_mean", "ai_mean", "human_count", "ai_count"});
    auto cell = [](const std::optional<double> & v) { return v ? csv::format_double(*v) : std::string(); };
    for (std::size_t b = 0; b < curves.bins; ++b) {
        csv::write_row(out, {std::to_string(b + 1), cell(curves.human_mean[b]), cell(curves.ai_mean[b]),
                             std::to_string(curves.human_count[b]), std::to_string(curves.ai_count[b])});
    }
}

void export_curves(const ClassCurves & curves, const std::filesystem::path & path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(Errc::io, "cannot open '" + path.string() + "' for writing");
    }
    write_curves_csv(out, curves);
    out.flush();
    if (!out) {
        throw Error(Errc::io, "write failure on '" + path.string() + "'");
    }
}

}  // namespace tsd
