#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsd {

enum class Errc {
    parse,
    schema,
    validation,
    io,
    duplicate_id,
    insufficient_length,
    empty_region,
    missing_field,
    degenerate,
    config,
    undefined_statistic,
    empty_class,
    capability,
    transport,
    request_split,
};

/// Short machine-readable tag, e.g. "insufficient_length".
std::string_view tag(Errc code);

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string & message);

    Errc code() const noexcept { return code_; }

    /// "tag: message", the form used in CSV error columns and error stubs.
    std::string tagged() const;

  private:
    Errc code_;
};

}  // namespace tsd
