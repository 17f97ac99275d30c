#include "tsd/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "tsd/error.hpp"

namespace tsd {

namespace {

std::string make_id(char prefix, std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%05zu", prefix, k);
    return buf;
}

}  // namespace

void SynthParams::validate() const {
    if (!(human_sigma > 0.0 && ai_sigma_start > 0.0 && ai_sigma_end > 0.0)) {
        throw Error(Errc::config, "sigmas must be > 0");
    }
    if (ai_sigma_end > ai_sigma_start) {
        throw Error(Errc::config, "ai_sigma_end must not exceed ai_sigma_start");
    }
    if (min_length < 1 || max_length < min_length) {
        throw Error(Errc::config, "length range must satisfy 1 <= min_length <= max_length");
    }
}

std::vector<ScoreRecord> synth_corpus(const SynthParams & params) {
    params.validate();
    std::mt19937_64 rng(params.seed);
    std::uniform_int_distribution<std::size_t> length_dist(params.min_length, params.max_length);
    std::normal_distribution<double> unit(0.0, 1.0);

    std::vector<ScoreRecord> out;
    out.reserve(2 * params.n_per_class);
    for (int cls = 0; cls < 2; ++cls) {
        const bool is_ai = cls == 1;
        for (std::size_t k = 0; k < params.n_per_class; ++k) {
            ScoreRecord rec;
            rec.id    = make_id(is_ai ? 'a' : 'h', k);
            rec.label = is_ai ? Label::ai : Label::human;
            if (is_ai) {
                rec.family = "synthetic-ai";
            }
            const std::size_t n = length_dist(rng);
            rec.logprob.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                double sigma = params.human_sigma;
                if (is_ai) {
                    const double t = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
                    sigma = params.ai_sigma_start + (params.ai_sigma_end - params.ai_sigma_start) * t;
                }
                const double s = params.mean_surprise + sigma * unit(rng);
                rec.logprob[i] = std::min(0.0, -s);
            }
            out.push_back(std::move(rec));
        }
    }
    return out;
}

}  // namespace tsd
