#include "tsd/error.hpp"

namespace tsd {

std::string_view tag(Errc code) {
    switch (code) {
        case Errc::parse:               return "parse";
        case Errc::schema:              return "schema";
        case Errc::validation:          return "validation";
        case Errc::io:                  return "io";
        case Errc::duplicate_id:        return "duplicate_id";
        case Errc::insufficient_length: return "insufficient_length";
        case Errc::empty_region:        return "empty_region";
        case Errc::missing_field:       return "missing_field";
        case Errc::degenerate:          return "degenerate";
        case Errc::config:              return "config";
        case Errc::undefined_statistic: return "undefined_statistic";
        case Errc::empty_class:         return "empty_class";
        case Errc::capability:          return "capability";
        case Errc::transport:           return "transport";
        case Errc::request_split:       return "request_split";
    }
    return "unknown";
}

Error::Error(Errc code, const std::string & message) : std::runtime_error(message), code_(code) {}

std::string Error::tagged() const {
    std::string out(tag(code_));
    out += ": ";
    out += what();
    return out;
}

}  // namespace tsd
