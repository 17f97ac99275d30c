#include "tsd/detectors.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "tsd/csv.hpp"
#include "tsd/error.hpp"

namespace tsd {

namespace {

constexpr Detector kAllDetectors[] = {
    Detector::tsd,        Detector::dd,      Detector::lv,       Detector::fast_detect, Detector::likelihood,
    Detector::entropy,    Detector::log_rank, Detector::rank,    Detector::tsd_plus,
};

template <typename F> DetectorScore guarded(const ScoreRecord & record, std::string_view name, F && compute) {
    DetectorScore out{record.id, std::string(name), std::nullopt, std::nullopt};
    try {
        out.score = compute();
    } catch (const Error & e) {
        out.error = e.tagged();
    }
    return out;
}

template <typename T> double mean_of(const std::vector<T> & values) {
    double sum = 0.0;
    for (const auto & v : values) {
        sum += static_cast<double>(v);
    }
    return sum / static_cast<double>(values.size());
}

template <typename T> const std::vector<T> & require(const std::optional<std::vector<T>> & field, const char * name) {
    if (!field) {
        throw Error(Errc::missing_field, std::string("record has no '") + name + "' field");
    }
    return *field;
}

double tsd_value(const ScoreRecord & record, const DetectorConfig & config) {
    return -(dd_value(record, config) + lv_value(record, config));
}

}  // namespace

std::string_view to_string(Detector detector) {
    switch (detector) {
        case Detector::tsd:         return "tsd";
        case Detector::dd:          return "dd";
        case Detector::lv:          return "lv";
        case Detector::fast_detect: return "fast_detect";
        case Detector::likelihood:  return "likelihood";
        case Detector::entropy:     return "entropy";
        case Detector::log_rank:    return "log_rank";
        case Detector::rank:        return "rank";
        case Detector::tsd_plus:    return "tsd_plus";
    }
    return "?";
}

std::optional<Detector> parse_detector(std::string_view text) {
    for (Detector d : kAllDetectors) {
        if (text == to_string(d)) {
            return d;
        }
    }
    if (text == "tsd+" || text == "fusion") {
        return Detector::tsd_plus;
    }
    if (text == "mean_log_rank") {
        return Detector::log_rank;
    }
    if (text == "mean_rank") {
        return Detector::rank;
    }
    if (text == "fastdetect" || text == "fast-detect") {
        return Detector::fast_detect;
    }
    return std::nullopt;
}

bool is_negated_baseline(Detector detector) {
    return detector == Detector::entropy || detector == Detector::log_rank || detector == Detector::rank;
}

std::optional<FusionMode> parse_fusion(std::string_view text) {
    if (text == "raw" || text == "raw_sum") {
        return FusionMode::raw_sum;
    }
    if (text == "z" || text == "z_sum") {
        return FusionMode::z_sum;
    }
    return std::nullopt;
}

void DetectorConfig::validate() const {
    check_window(window);
    if (region.mode == RegionMode::relative_start && !(region.fraction > 0.0 && region.fraction < 1.0)) {
        throw Error(Errc::config, "relative start fraction must lie strictly inside (0,1)");
    }
}

double dd_value(const ScoreRecord & record, const DetectorConfig & config) {
    return derivative_dispersion(metric_series(record, config.base_metric).values, config.region);
}

double lv_value(const ScoreRecord & record, const DetectorConfig & config) {
    return local_volatility(metric_series(record, config.base_metric).values, config.region, config.window);
}

double fast_detect_value(const ScoreRecord & record) {
    const auto & mu = require(record.mu, "mu");
    const auto & s2 = require(record.sigma2, "sigma2");
    double sum_lp = 0.0;
    double sum_mu = 0.0;
    double sum_s2 = 0.0;
    for (std::size_t t = 0; t < record.size(); ++t) {
        sum_lp += record.logprob[t];
        sum_mu += mu[t];
        sum_s2 += s2[t];
    }
    if (!(sum_s2 > 0.0)) {
        throw Error(Errc::degenerate, "sum of sigma2 is zero");
    }
    return (sum_lp - sum_mu) / std::sqrt(sum_s2);
}

DetectorScore score_dd(const ScoreRecord & record, const DetectorConfig & config) {
    return guarded(record, "dd", [&] { return -dd_value(record, config); });
}

DetectorScore score_lv(const ScoreRecord & record, const DetectorConfig & config) {
    return guarded(record, "lv", [&] { return -lv_value(record, config); });
}

DetectorScore score_tsd(const ScoreRecord & record, const DetectorConfig & config) {
    return guarded(record, "tsd", [&] { return tsd_value(record, config); });
}

DetectorScore score_fast_detect(const ScoreRecord & record) {
    return guarded(record, "fast_detect", [&] { return fast_detect_value(record); });
}

DetectorScore score_baseline(const ScoreRecord & record, Baseline which) {
    switch (which) {
        case Baseline::likelihood:
            return guarded(record, "likelihood", [&] { return mean_of(record.logprob); });
        case Baseline::entropy:
            return guarded(record, "entropy", [&] { return -mean_of(require(record.entropy, "entropy")); });
        case Baseline::mean_log_rank:
            return guarded(record, "log_rank", [&] { return -mean_of(metric_series(record, Metric::log_rank).values); });
        case Baseline::mean_rank:
            return guarded(record, "rank", [&] { return -mean_of(require(record.rank, "rank")); });
    }
    throw Error(Errc::config, "unknown baseline");
}

DetectorScore fuse_raw(const DetectorScore & tsd, const DetectorScore & global) {
    DetectorScore out{tsd.record_id, "tsd_plus", std::nullopt, std::nullopt};
    if (!tsd.ok()) {
        out.error = "tsd component failed: " + tsd.error.value_or("no score");
    } else if (!global.ok()) {
        out.error = "fast_detect component failed: " + global.error.value_or("no score");
    } else {
        out.score = *tsd.score + *global.score;
    }
    return out;
}

DetectorScore score_fusion(const ScoreRecord & record, const DetectorConfig & config) {
    if (config.fusion != FusionMode::raw_sum) {
        throw Error(Errc::config, "z_sum fusion needs the whole corpus; use score_corpus");
    }
    return fuse_raw(score_tsd(record, config), score_fast_detect(record));
}

std::vector<DetectorScore> fuse_standardized(std::span<const DetectorScore> tsd_scores,
                                             std::span<const DetectorScore> global_scores) {
    if (tsd_scores.size() != global_scores.size()) {
        throw Error(Errc::config, "fusion components have different lengths");
    }
    const std::size_t n = tsd_scores.size();

    // phase 1: moments over records where both components succeeded
    std::size_t usable = 0;
    double sum_a = 0.0;
    double sum_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (tsd_scores[i].ok() && global_scores[i].ok()) {
            ++usable;
            sum_a += *tsd_scores[i].score;
            sum_b += *global_scores[i].score;
        }
    }
    double mean_a = 0.0;
    double mean_b = 0.0;
    double sd_a = 0.0;
    double sd_b = 0.0;
    if (usable > 0) {
        mean_a = sum_a / static_cast<double>(usable);
        mean_b = sum_b / static_cast<double>(usable);
        double m2_a = 0.0;
        double m2_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (tsd_scores[i].ok() && global_scores[i].ok()) {
                const double da = *tsd_scores[i].score - mean_a;
                const double db = *global_scores[i].score - mean_b;
                m2_a += da * da;
                m2_b += db * db;
            }
        }
        sd_a = std::sqrt(m2_a / static_cast<double>(usable));
        sd_b = std::sqrt(m2_b / static_cast<double>(usable));
    }
    auto standardize = [](double v, double mean, double sd) { return sd > 0.0 ? (v - mean) / sd : 0.0; };

    // phase 2: per-record sum
    std::vector<DetectorScore> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        DetectorScore fused{tsd_scores[i].record_id, "tsd_plus", std::nullopt, std::nullopt};
        if (!tsd_scores[i].ok()) {
            fused.error = "tsd component failed: " + tsd_scores[i].error.value_or("unknown");
        } else if (!global_scores[i].ok()) {
            fused.error = "fast_detect component failed: " + global_scores[i].error.value_or("unknown");
        } else {
            fused.score = standardize(*tsd_scores[i].score, mean_a, sd_a) +
                          standardize(*global_scores[i].score, mean_b, sd_b);
        }
        out.push_back(std::move(fused));
    }
    return out;
}

DetectorScore score_record(const ScoreRecord & record, Detector detector, const DetectorConfig & config) {
    switch (detector) {
        case Detector::tsd:         return score_tsd(record, config);
        case Detector::dd:          return score_dd(record, config);
        case Detector::lv:          return score_lv(record, config);
        case Detector::fast_detect: return score_fast_detect(record);
        case Detector::likelihood:  return score_baseline(record, Baseline::likelihood);
        case Detector::entropy:     return score_baseline(record, Baseline::entropy);
        case Detector::log_rank:    return score_baseline(record, Baseline::mean_log_rank);
        case Detector::rank:        return score_baseline(record, Baseline::mean_rank);
        case Detector::tsd_plus:    return score_fusion(record, config);
    }
    throw Error(Errc::config, "unknown detector");
}

std::vector<DetectorScore> score_corpus(std::span<const ScoreRecord> records, Detector detector,
                                        const DetectorConfig & config) {
    config.validate();
    std::vector<DetectorScore> out;
    out.reserve(records.size());
    if (detector == Detector::tsd_plus && config.fusion == FusionMode::z_sum) {
        std::vector<DetectorScore> tsd;
        std::vector<DetectorScore> global;
        for (const auto & rec : records) {
            tsd.push_back(score_tsd(rec, config));
            global.push_back(score_fast_detect(rec));
        }
        return fuse_standardized(tsd, global);
    }
    for (const auto & rec : records) {
        out.push_back(score_record(rec, detector, config));
    }
    return out;
}

std::vector<Label> classify(std::span<const DetectorScore> scores, double tau) {
    if (!std::isfinite(tau)) {
        throw Error(Errc::config, "threshold must be finite");
    }
    std::vector<Label> out;
    out.reserve(scores.size());
    for (const auto & s : scores) {
        if (!s.ok()) {
            throw Error(Errc::config, "cannot classify errored score for record '" + s.record_id + "'");
        }
        out.push_back(*s.score > tau ? Label::ai : Label::human);
    }
    return out;
}

void write_scores_csv(std::ostream & out, std::span<const ScoreRow> rows) {
    csv::write_row(out, {"id", "label", "family", "detector", "score", "error"});
    for (const auto & row : rows) {
        csv::write_row(out, {row.id, std::string(to_string(row.label)), row.family, row.detector,
                             row.score ? csv::format_double(*row.score) : std::string(),
                             row.error.value_or("")});
    }
}

std::vector<ScoreRow> read_scores_csv(std::istream & in) {
    std::vector<std::string> fields;
    if (!csv::read_row(in, fields)) {
        return {};
    }
    const std::vector<std::string> header{"id", "label", "family", "detector", "score", "error"};
    if (fields != header) {
        throw Error(Errc::schema, "scores CSV header must be id,label,family,detector,score,error");
    }
    std::vector<ScoreRow> rows;
    std::size_t line = 1;
    while (csv::read_row(in, fields)) {
        ++line;
        if (fields.size() == 1 && fields[0].empty()) {
            continue;
        }
        if (fields.size() != header.size()) {
            throw Error(Errc::schema, "scores CSV row " + std::to_string(line) + ": expected 6 fields");
        }
        ScoreRow row;
        row.id = fields[0];
        const auto label = parse_label(fields[1]);
        if (!label) {
            throw Error(Errc::validation, "scores CSV row " + std::to_string(line) + ": bad label '" + fields[1] + "'");
        }
        row.label    = *label;
        row.family   = fields[2];
        row.detector = fields[3];
        if (!fields[4].empty()) {
            try {
                row.score = csv::parse_double(fields[4]);
            } catch (const Error & e) {
                throw Error(Errc::parse, "scores CSV row " + std::to_string(line) + ": " + e.what());
            }
        }
        if (!fields[5].empty()) {
            row.error = fields[5];
        }
        if (row.score.has_value() == row.error.has_value()) {
            throw Error(Errc::validation,
                        "scores CSV row " + std::to_string(line) + ": exactly one of score/error must be set");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace tsd
