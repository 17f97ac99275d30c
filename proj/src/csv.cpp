#include "tsd/csv.hpp"

#include <charconv>
#include <istream>
#include <ostream>

#include "tsd/error.hpp"

namespace tsd::csv {

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

void write_row(std::ostream & out, const std::vector<std::string> & fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) {
            out << ',';
        }
        out << escape(fields[i]);
    }
    out << '\n';
}

bool read_row(std::istream & in, std::vector<std::string> & fields) {
    fields.clear();
    if (in.peek() == std::char_traits<char>::eof()) {
        return false;
    }
    std::string field;
    bool quoted = false;
    char c;
    while (in.get(c)) {
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted) {
        throw Error(Errc::parse, "unterminated quoted CSV field");
    }
    fields.push_back(std::move(field));
    return true;
}

std::string format_double(double value) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, end);
}

double parse_double(std::string_view text) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw Error(Errc::parse, "not a number: '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace tsd::csv
