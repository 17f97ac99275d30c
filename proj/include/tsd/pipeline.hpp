#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "tsd/detectors.hpp"
#include "tsd/records.hpp"
#include "tsd/synth.hpp"

namespace tsd {

/// One row per (record, detector), record-major; upstream error stubs become
/// error rows for every detector.
std::vector<ScoreRow> run_detect(const Corpus & corpus, std::span<const Detector> detectors,
                                 const DetectorConfig & config);

void run_synth(const SynthParams & params, std::ostream & out);

}  // namespace tsd
