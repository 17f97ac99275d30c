#include "tsd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "tsd/csv.hpp"
#include "tsd/error.hpp"

namespace tsd {

namespace {

struct ClassCounts {
    std::uint64_t ai    = 0;
    std::uint64_t human = 0;
};

ClassCounts count_classes(std::span<const LabeledScore> scores) {
    ClassCounts c;
    for (const auto & s : scores) {
        (s.label == Label::ai ? c.ai : c.human) += 1;
    }
    return c;
}

std::vector<LabeledScore> sorted_copy(std::span<const LabeledScore> scores) {
    std::vector<LabeledScore> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const LabeledScore & a, const LabeledScore & b) { return a.score < b.score; });
    return sorted;
}

std::vector<LabeledScore> ok_scores(std::span<const ScoreRow> rows) {
    std::vector<LabeledScore> out;
    for (const auto & r : rows) {
        if (r.score) {
            out.push_back({*r.score, r.label});
        }
    }
    return out;
}

std::optional<double> try_auroc(std::span<const LabeledScore> scores) {
    const auto c = count_classes(scores);
    if (c.ai == 0 || c.human == 0) {
        return std::nullopt;
    }
    return auroc(scores);
}

std::string fmt(const char * spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace

double auroc(std::span<const LabeledScore> scores) {
    const auto c = count_classes(scores);
    if (c.ai == 0 || c.human == 0) {
        throw Error(Errc::undefined_statistic, "AUROC needs at least one score per class");
    }
    const auto sorted = sorted_copy(scores);
    // twice the Mann-Whitney U, kept integral so the result is a single rounding
    std::uint64_t twice_u     = 0;
    std::uint64_t human_below = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        std::uint64_t ai = 0;
        std::uint64_t human = 0;
        while (j < sorted.size() && sorted[j].score == sorted[i].score) {
            (sorted[j].label == Label::ai ? ai : human) += 1;
            ++j;
        }
        twice_u += 2 * ai * human_below + ai * human;
        human_below += human;
        i = j;
    }
    return static_cast<double>(twice_u) / static_cast<double>(2 * c.ai * c.human);
}

Threshold select_threshold(std::span<const LabeledScore> scores) {
    const auto c = count_classes(scores);
    if (c.ai == 0 || c.human == 0) {
        throw Error(Errc::undefined_statistic, "threshold selection needs both classes");
    }
    const auto sorted = sorted_copy(scores);

    // Walk distinct values from the top; after consuming value v_{k+1} the counts
    // are those predicted ai by any tau in (v_k, v_{k+1}).
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    const auto na = static_cast<std::int64_t>(c.ai);
    const auto nh = static_cast<std::int64_t>(c.human);
    std::optional<std::int64_t> best_num;
    double best_tau = sorted.front().score;
    std::size_t j = sorted.size();
    while (j > 0) {
        const double v = sorted[j - 1].score;
        while (j > 0 && sorted[j - 1].score == v) {
            (sorted[j - 1].label == Label::ai ? tp : fp) += 1;
            --j;
        }
        if (j == 0) {
            break;
        }
        const double tau = (sorted[j - 1].score + v) / 2.0;
        const std::int64_t num = tp * nh - fp * na;
        // >= : moving downwards, equal J prefers the smaller tau
        if (!best_num || num >= *best_num) {
            best_num = num;
            best_tau = tau;
        }
    }
    if (!best_num) {
        return {sorted.front().score, 0.0};
    }
    return {best_tau, static_cast<double>(*best_num) / static_cast<double>(na * nh)};
}

double pearson(std::span<const std::pair<double, double>> points) {
    if (points.size() < 3) {
        throw Error(Errc::undefined_statistic, "Pearson correlation needs at least 3 points");
    }
    // centred on the first point, so a constant column has exactly zero variance
    const auto [x0, y0] = points.front();
    double mx = 0.0;
    double my = 0.0;
    for (const auto & [x, y] : points) {
        mx += x - x0;
        my += y - y0;
    }
    mx /= static_cast<double>(points.size());
    my /= static_cast<double>(points.size());
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (const auto & [x, y] : points) {
        const double dx = (x - x0) - mx;
        const double dy = (y - y0) - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw Error(Errc::undefined_statistic, "Pearson correlation undefined for zero variance");
    }
    return sxy / std::sqrt(sxx * syy);
}

EvalReport evaluate_rows(std::span<const ScoreRow> rows, const EvalOptions & options) {
    EvalReport report;
    report.total = rows.size();
    if (!rows.empty()) {
        report.detector = rows.front().detector;
    }
    std::size_t human_errors = 0;
    std::size_t n_human = 0;
    for (const auto & r : rows) {
        if (!r.score) {
            ++report.excluded_count;
            if (r.label == Label::human) {
                ++human_errors;
            }
        } else if (r.label == Label::human) {
            ++n_human;
        }
    }

    const auto all = ok_scores(rows);
    report.auroc_overall = auroc(all);
    const auto overall_counts = count_classes(all);
    report.scopes.push_back({"overall", report.auroc_overall, overall_counts.ai, overall_counts.human,
                             report.excluded_count});
    if (const auto d = parse_detector(report.detector); d && is_negated_baseline(*d)) {
        report.auroc_raw_orientation = 1.0 - report.auroc_overall;
    }

    // families seen among AI rows, sorted by name
    std::vector<std::string> families;
    for (const auto & r : rows) {
        if (r.label == Label::ai && !r.family.empty() &&
            std::find(families.begin(), families.end(), r.family) == families.end()) {
            families.push_back(r.family);
        }
    }
    std::sort(families.begin(), families.end());
    for (const auto & family : families) {
        std::vector<LabeledScore> scoped;
        std::size_t excluded = human_errors;
        for (const auto & r : rows) {
            if (r.label == Label::ai && r.family != family) {
                continue;
            }
            if (r.score) {
                scoped.push_back({*r.score, r.label});
            } else if (r.label == Label::ai) {
                ++excluded;
            }
        }
        const auto counts = count_classes(scoped);
        const auto value = try_auroc(scoped);
        if (value) {
            report.auroc_by_family[family] = *value;
        }
        report.scopes.push_back({"family:" + family, value, counts.ai, n_human, excluded});
    }

    if (options.select_threshold) {
        std::vector<LabeledScore> validation;
        for (const auto & r : options.validation) {
            if (r.detector == report.detector && r.score) {
                validation.push_back({*r.score, r.label});
            }
        }
        if (validation.empty()) {
            report.threshold = select_threshold(all);
            report.threshold_in_sample = true;
        } else {
            report.threshold = select_threshold(validation);
        }
    }

    if (!options.family_lengths.empty()) {
        LengthCorrelation corr;
        std::vector<std::pair<double, double>> points;
        for (const auto & [family, value] : report.auroc_by_family) {
            const auto it = options.family_lengths.find(family);
            if (it != options.family_lengths.end()) {
                corr.points.emplace_back(family, it->second, value);
                points.emplace_back(it->second, value);
            }
        }
        try {
            corr.pearson_r = pearson(points);
            report.length_corr = std::move(corr);
        } catch (const Error &) {
            // fewer than 3 families or a degenerate axis: no correlation reported
        }
    }
    return report;
}

std::vector<EvalReport> evaluate_all(std::span<const ScoreRow> rows, const EvalOptions & options) {
    std::vector<std::string> order;
    for (const auto & r : rows) {
        if (std::find(order.begin(), order.end(), r.detector) == order.end()) {
            order.push_back(r.detector);
        }
    }
    std::vector<EvalReport> reports;
    for (const auto & name : order) {
        std::vector<ScoreRow> group;
        for (const auto & r : rows) {
            if (r.detector == name) {
                group.push_back(r);
            }
        }
        try {
            reports.push_back(evaluate_rows(group, options));
        } catch (const Error & e) {
            throw Error(e.code(), "detector '" + name + "': " + e.what());
        }
    }
    return reports;
}

std::vector<ScoreRow> score_rows(const Corpus & corpus, Detector detector, const DetectorConfig & config) {
    const auto scores = score_corpus(corpus.records, detector, config);
    std::vector<ScoreRow> rows;
    rows.reserve(scores.size() + corpus.stubs.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto & rec = corpus.records[i];
        rows.push_back({rec.id, rec.label, rec.family.value_or(""), scores[i].detector, scores[i].score,
                        scores[i].error});
    }
    for (const auto & stub : corpus.stubs) {
        rows.push_back({stub.id, stub.label.value_or(Label::human), stub.family.value_or(""),
                        std::string(to_string(detector)), std::nullopt, "upstream: " + stub.error});
    }
    return rows;
}

EvalReport evaluate(const Corpus & corpus, Detector detector, const DetectorConfig & config,
                    const EvalOptions & options) {
    const auto rows = score_rows(corpus, detector, config);
    return evaluate_rows(rows, options);
}

std::map<std::string, double> family_lengths(const Corpus & corpus) {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto & rec : corpus.records) {
        if (rec.label == Label::ai && rec.family) {
            auto & [sum, count] = acc[*rec.family];
            sum += static_cast<double>(rec.size());
            ++count;
        }
    }
    std::map<std::string, double> out;
    for (const auto & [family, p] : acc) {
        out[family] = p.first / static_cast<double>(p.second);
    }
    return out;
}

void write_report_csv(std::ostream & out, std::span<const EvalReport> reports) {
    csv::write_row(out, {"detector", "scope", "auroc", "n_ai", "n_human", "excluded"});
    for (const auto & report : reports) {
        for (const auto & s : report.scopes) {
            csv::write_row(out, {report.detector, s.scope, s.auroc ? csv::format_double(*s.auroc) : std::string(),
                                 std::to_string(s.n_ai), std::to_string(s.n_human), std::to_string(s.excluded)});
        }
    }
}

void write_report_json(std::ostream & out, std::span<const EvalReport> reports) {
    using ojson = nlohmann::ordered_json;
    ojson doc = ojson::array();
    for (const auto & r : reports) {
        ojson item;
        item["detector"]      = r.detector;
        item["auroc_overall"] = r.auroc_overall;
        if (r.auroc_raw_orientation) {
            item["auroc_raw_orientation"] = *r.auroc_raw_orientation;
        }
        item["auroc_by_family"] = ojson::object();
        for (const auto & [family, value] : r.auroc_by_family) {
            item["auroc_by_family"][family] = value;
        }
        item["excluded_count"] = r.excluded_count;
        item["total"]          = r.total;
        if (r.threshold) {
            item["threshold"] = {{"tau", r.threshold->tau},
                                 {"youden_j", r.threshold->youden_j},
                                 {"in_sample", r.threshold_in_sample}};
        }
        if (r.length_corr) {
            ojson pts = ojson::array();
            for (const auto & [family, len, value] : r.length_corr->points) {
                pts.push_back({{"family", family}, {"avg_tokens", len}, {"auroc", value}});
            }
            item["length_corr"] = {{"pearson_r", r.length_corr->pearson_r}, {"points", pts}};
        }
        doc.push_back(std::move(item));
    }
    out << doc.dump(2) << '\n';
}

void write_report_table(std::ostream & out, std::span<const EvalReport> reports) {
    for (const auto & r : reports) {
        out << r.detector << ": AUROC " << fmt("%.2f", 100.0 * r.auroc_overall);
        if (r.auroc_raw_orientation) {
            out << " (raw orientation " << fmt("%.2f", 100.0 * *r.auroc_raw_orientation) << ")";
        }
        out << ", excluded " << r.excluded_count << "/" << r.total << '\n';
        for (const auto & s : r.scopes) {
            if (s.scope == "overall") {
                continue;
            }
            out << "  " << s.scope << ": " << (s.auroc ? fmt("%.2f", 100.0 * *s.auroc) : std::string("n/a"))
                << " (n_ai=" << s.n_ai << ")\n";
        }
        if (r.threshold) {
            out << "  threshold " << fmt("%.6g", r.threshold->tau) << " (J=" << fmt("%.4f", r.threshold->youden_j)
                << (r.threshold_in_sample ? ", in-sample" : ", validation") << ")\n";
        }
        if (r.length_corr) {
            out << "  length/AUROC Pearson r = " << fmt("%.3f", r.length_corr->pearson_r) << '\n';
        }
    }
}

std::vector<AblationCell> ablate_positions(const Corpus & corpus, std::span<const Detector> detectors,
                                           std::span<const RegionSpec> positions, const DetectorConfig & base) {
    std::vector<AblationCell> cells;
    for (Detector d : detectors) {
        for (const auto & region : positions) {
            DetectorConfig config = base;
            config.region = region;
            const auto rows = score_rows(corpus, d, config);
            AblationCell cell;
            cell.detector = std::string(to_string(d));
            cell.region   = to_string(region);
            const auto ok = ok_scores(rows);
            const auto counts = count_classes(ok);
            cell.n_ai     = counts.ai;
            cell.n_human  = counts.human;
            cell.excluded = rows.size() - ok.size();
            cell.auroc    = try_auroc(ok);
            cell.flagged  = 2 * cell.excluded > rows.size();
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

std::vector<RegionSpec> relative_sweep() {
    std::vector<RegionSpec> out;
    for (int k = 1; k <= 9; ++k) {
        out.push_back(RegionSpec::relative(k / 10.0));
    }
    return out;
}

std::vector<RegionSpec> absolute_sweep() {
    std::vector<RegionSpec> out;
    for (std::size_t k : {25, 50, 100, 150, 200, 250}) {
        out.push_back(RegionSpec::absolute(k));
    }
    return out;
}

void write_ablation_csv(std::ostream & out, std::span<const AblationCell> cells) {
    csv::write_row(out, {"detector", "region", "auroc", "n_ai", "n_human", "excluded", "flagged"});
    for (const auto & c : cells) {
        csv::write_row(out, {c.detector, c.region, c.auroc ? csv::format_double(*c.auroc) : std::string(),
                             std::to_string(c.n_ai), std::to_string(c.n_human), std::to_string(c.excluded),
                             c.flagged ? "1" : "0"});
    }
}

}  // namespace tsd
