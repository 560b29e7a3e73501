#pragma once

#include <stdexcept>
#include <string>

namespace psd {

// Whitespace-safe single-token escaping for the text artifact formats.
inline std::string escape_token(const std::string & s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case ' ':  out += "\\s"; break;
            default:   out += c; break;
        }
    }
    return out;
}

inline std::string unescape_token(const std::string & s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out += s[i];
            continue;
        }
        if (i + 1 >= s.size()) {
            throw std::runtime_error("unescape_token: dangling escape");
        }
        switch (s[++i]) {
            case '\\': out += '\\'; break;
            case 't':  out += '\t'; break;
            case 'n':  out += '\n'; break;
            case 'r':  out += '\r'; break;
            case 's':  out += ' '; break;
            default:   throw std::runtime_error("unescape_token: unknown escape");
        }
    }
    return out;
}

}  // namespace psd
