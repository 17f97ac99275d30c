#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tsd/records.hpp"

namespace tsd {

// Synthetic volatility-decay corpus. Human surprise is i.i.d. Gaussian with a
// constant sigma; AI sigma falls linearly from ai_sigma_start at the first
// token to ai_sigma_end at the last.
struct SynthParams {
    std::size_t   n_per_class    = 500;
    std::size_t   min_length     = 250;
    std::size_t   max_length     = 350;
    double        mean_surprise  = 4.0;
    double        human_sigma    = 1.0;
    double        ai_sigma_start = 1.0;
    double        ai_sigma_end   = 0.25;
    std::uint64_t seed           = 42;

    /// Throws Error(config) on non-positive sigmas, ai_sigma_end > ai_sigma_start,
    /// or an empty/inverted length range.
    void validate() const;
};

/// Human records first (ids h00000...), then AI records (a00000..., family "synthetic-ai").
std::vector<ScoreRecord> synth_corpus(const SynthParams & params);

}  // namespace tsd
