#include "tsd/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "tsd/error.hpp"

namespace tsd {

namespace {

// Two-pass population std, re-centred on the first element so that adding a
// constant to every value that is exactly representable leaves the result
// bit-identical.
template <typename Get> double population_std(std::size_t count, Get && get) {
    const double ref = get(0);
    double sum = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        sum += get(k) - ref;
    }
    const double mean = sum / static_cast<double>(count);
    double m2 = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        const double dev = (get(k) - ref) - mean;
        m2 += dev * dev;
    }
    return std::sqrt(m2 / static_cast<double>(count));
}

template <typename T> const std::vector<T> & require(const std::optional<std::vector<T>> & field, const char * name) {
    if (!field) {
        throw Error(Errc::missing_field, std::string("record has no '") + name + "' field");
    }
    return *field;
}

double local_std_at(std::span<const double> values, std::size_t pos, std::size_t half) {
    const std::size_t n  = values.size();
    const std::size_t lo = pos > half ? pos - half : 1;
    const std::size_t hi = std::min(n, pos + half);
    return population_std(hi - lo + 1, [&](std::size_t k) { return values[lo - 1 + k]; });
}

}  // namespace

RegionSpec RegionSpec::relative(double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw Error(Errc::config, "relative start fraction must lie strictly inside (0,1)");
    }
    RegionSpec spec{RegionMode::relative_start};
    spec.fraction = fraction;
    return spec;
}

RegionSpec RegionSpec::absolute(std::size_t start) {
    RegionSpec spec{RegionMode::absolute_start};
    spec.start = start;
    return spec;
}

RegionSpec parse_region(std::string_view text) {
    if (text == "full") {
        return RegionSpec::full();
    }
    if (text == "first-half" || text == "first_half") {
        return RegionSpec::first_half();
    }
    if (text == "second-half" || text == "second_half") {
        return RegionSpec::second_half();
    }
    const auto bad = [&] { return Error(Errc::config, "invalid region '" + std::string(text) + "'"); };
    if (text.starts_with("rel:")) {
        const std::string body(text.substr(4));
        std::size_t used = 0;
        double f = 0.0;
        try {
            f = std::stod(body, &used);
        } catch (const std::exception &) {
            throw bad();
        }
        if (used != body.size()) {
            throw bad();
        }
        return RegionSpec::relative(f);
    }
    if (text.starts_with("abs:")) {
        const auto body = text.substr(4);
        std::size_t k = 0;
        const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), k);
        if (ec != std::errc() || ptr != body.data() + body.size() || body.empty()) {
            throw bad();
        }
        return RegionSpec::absolute(k);
    }
    throw bad();
}

std::string to_string(const RegionSpec & spec) {
    switch (spec.mode) {
        case RegionMode::full:        return "full";
        case RegionMode::first_half:  return "first-half";
        case RegionMode::second_half: return "second-half";
        case RegionMode::relative_start: {
            char buf[32];
            const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, spec.fraction);
            return "rel:" + std::string(buf, end);
        }
        case RegionMode::absolute_start: return "abs:" + std::to_string(spec.start);
    }
    return "?";
}

PositionRange resolve_region(const RegionSpec & spec, std::size_t n) {
    if (n < 1) {
        throw Error(Errc::empty_region, "sequence is empty");
    }
    PositionRange r{1, n};
    switch (spec.mode) {
        case RegionMode::full:
            break;
        case RegionMode::first_half:
            r.last = n / 2;
            break;
        case RegionMode::second_half:
            r.first = n / 2 + 1;
            break;
        case RegionMode::relative_start:
            if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) {
                throw Error(Errc::config, "relative start fraction must lie strictly inside (0,1)");
            }
            // small epsilon absorbs binary representation error in f*n
            r.first = static_cast<std::size_t>(std::floor(spec.fraction * static_cast<double>(n) + 1e-9)) + 1;
            break;
        case RegionMode::absolute_start:
            r.first = spec.start + 1;
            break;
    }
    if (r.size() == 0) {
        throw Error(Errc::empty_region,
                    "region " + to_string(spec) + " is empty for n=" + std::to_string(n));
    }
    return r;
}

std::string_view to_string(Metric metric) {
    switch (metric) {
        case Metric::log_prob:             return "log_prob";
        case Metric::surprise:             return "surprise";
        case Metric::sampling_discrepancy: return "sampling_discrepancy";
        case Metric::rank:                 return "rank";
        case Metric::log_rank:             return "log_rank";
        case Metric::entropy:              return "entropy";
        case Metric::token_prob:           return "token_prob";
        case Metric::topk_mass:            return "topk_mass";
    }
    return "?";
}

std::optional<Metric> parse_metric(std::string_view text) {
    for (Metric m : {Metric::log_prob, Metric::surprise, Metric::sampling_discrepancy, Metric::rank,
                     Metric::log_rank, Metric::entropy, Metric::token_prob, Metric::topk_mass}) {
        if (text == to_string(m)) {
            return m;
        }
    }
    return std::nullopt;
}

MetricSeries surprise(const ScoreRecord & record) {
    MetricSeries out{Metric::surprise, {}};
    out.values.reserve(record.size());
    for (double lp : record.logprob) {
        out.values.push_back(0.0 - lp);  // +0 rather than -0 for a zero logprob
    }
    return out;
}

MetricSeries metric_series(const ScoreRecord & record, Metric metric) {
    MetricSeries out{metric, {}};
    const std::size_t n = record.size();
    switch (metric) {
        case Metric::log_prob:
            out.values = record.logprob;
            break;
        case Metric::surprise:
            return surprise(record);
        case Metric::sampling_discrepancy: {
            const auto & mu = require(record.mu, "mu");
            const auto & s2 = require(record.sigma2, "sigma2");
            out.values.resize(n);
            for (std::size_t t = 0; t < n; ++t) {
                const double gap = record.logprob[t] - mu[t];
                if (s2[t] == 0.0) {
                    if (std::abs(gap) > 1e-9) {
                        throw Error(Errc::degenerate, "sigma2[" + std::to_string(t) +
                                                          "] = 0 but logprob differs from mu");
                    }
                    out.values[t] = 0.0;
                } else {
                    out.values[t] = gap / std::sqrt(s2[t]);
                }
            }
            break;
        }
        case Metric::rank: {
            const auto & rank = require(record.rank, "rank");
            out.values.assign(rank.begin(), rank.end());
            break;
        }
        case Metric::log_rank: {
            const auto & rank = require(record.rank, "rank");
            out.values.reserve(n);
            for (auto r : rank) {
                out.values.push_back(std::log(static_cast<double>(r)));
            }
            break;
        }
        case Metric::entropy:
            out.values = require(record.entropy, "entropy");
            break;
        case Metric::token_prob:
            out.values = require(record.token_prob, "token_prob");
            break;
        case Metric::topk_mass:
            out.values = require(record.topk_mass, "topk_mass");
            break;
    }
    return out;
}

std::vector<double> abs_diff(std::span<const double> values) {
    if (values.size() < 2) {
        throw Error(Errc::insufficient_length, "need at least 2 tokens for a first difference, have " +
                                                   std::to_string(values.size()));
    }
    std::vector<double> out(values.size() - 1);
    for (std::size_t j = 0; j + 1 < values.size(); ++j) {
        out[j] = std::abs(values[j + 1] - values[j]);
    }
    return out;
}

void check_window(int window) {
    if (window < 2 || window % 2 != 0) {
        throw Error(Errc::config, "window must be even and >= 2, got " + std::to_string(window));
    }
}

std::vector<double> local_std(std::span<const double> values, int window) {
    check_window(window);
    const std::size_t n = values.size();
    if (n < 2) {
        throw Error(Errc::insufficient_length, "need at least 2 tokens for local volatility, have " +
                                                   std::to_string(n));
    }
    const auto half = static_cast<std::size_t>(window / 2);
    std::vector<double> out(n);
    for (std::size_t i = 1; i <= n; ++i) {
        out[i - 1] = local_std_at(values, i, half);
    }
    return out;
}

double derivative_dispersion(std::span<const double> series, const RegionSpec & region) {
    const std::size_t n = series.size();
    const PositionRange r = resolve_region(region, n);
    // d_i lives at its later endpoint i, and exists only for i >= 2
    const std::size_t first = std::max<std::size_t>(r.first, 2);
    if (r.last < first || r.last - first + 1 < 2) {
        throw Error(Errc::insufficient_length, "region " + to_string(region) + " on n=" + std::to_string(n) +
                                                   " yields fewer than 2 usable differences");
    }
    return population_std(r.last - first + 1, [&](std::size_t k) {
        const std::size_t i = first + k;
        return std::abs(series[i - 1] - series[i - 2]);
    });
}

double local_volatility(std::span<const double> series, const RegionSpec & region, int window) {
    check_window(window);
    const std::size_t n = series.size();
    const PositionRange r = resolve_region(region, n);
    if (n < 2) {
        throw Error(Errc::insufficient_length, "need at least 2 tokens for local volatility, have " +
                                                   std::to_string(n));
    }
    const auto half = static_cast<std::size_t>(window / 2);
    double sum = 0.0;
    for (std::size_t i = r.first; i <= r.last; ++i) {
        sum += local_std_at(series, i, half);
    }
    return sum / static_cast<double>(r.size());
}

double derivative_dispersion(const ScoreRecord & record, const RegionSpec & region) {
    return derivative_dispersion(surprise(record).values, region);
}

double local_volatility(const ScoreRecord & record, const RegionSpec & region, int window) {
    return local_volatility(surprise(record).values, region, window);
}

}  // namespace tsd
