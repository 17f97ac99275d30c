#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <doctest.h>

#include "tsd/error.hpp"
#include "tsd/records.hpp"

namespace testutil {

inline tsd::Errc error_code_of(const std::function<void()> & fn) {
    try {
        fn();
    } catch (const tsd::Error & e) {
        return e.code();
    }
    FAIL("expected tsd::Error");
    return tsd::Errc::io;
}

inline std::string error_message_of(const std::function<void()> & fn) {
    try {
        fn();
    } catch (const tsd::Error & e) {
        return e.what();
    }
    return {};
}

inline bool rel_close(double a, double b, double tol) {
    const double scale = std::max(std::fabs(a), std::fabs(b));
    return scale == 0.0 || std::fabs(a - b) <= tol * scale;
}

inline tsd::ScoreRecord from_surprise(const std::vector<double> & s, std::string id = "r",
                                      tsd::Label label = tsd::Label::human) {
    tsd::ScoreRecord rec;
    rec.id = std::move(id);
    rec.label = label;
    for (double v : s) {
        rec.logprob.push_back(-v);
    }
    return rec;
}

}  // namespace testutil
