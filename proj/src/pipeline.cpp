#include "tsd/pipeline.hpp"

#include <ostream>

#include "tsd/evaluation.hpp"

namespace tsd {

std::vector<ScoreRow> run_detect(const Corpus & corpus, std::span<const Detector> detectors,
                                 const DetectorConfig & config) {
    std::vector<std::vector<ScoreRow>> per_detector;
    per_detector.reserve(detectors.size());
    for (Detector d : detectors) {
        per_detector.push_back(score_rows(corpus, d, config));
    }
    std::vector<ScoreRow> rows;
    const std::size_t n = corpus.records.size() + corpus.stubs.size();
    rows.reserve(n * detectors.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto & scored : per_detector) {
            rows.push_back(scored[i]);
        }
    }
    return rows;
}

void run_synth(const SynthParams & params, std::ostream & out) {
    for (const auto & rec : synth_corpus(params)) {
        out << serialize_record(rec) << '\n';
    }
}

}  // namespace tsd
