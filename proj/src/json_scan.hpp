#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "flowgate/domain.hpp"

namespace flowgate::detail {

// End index (one past) of the balanced JSON value starting at `start`
// (which must point at '{' or '['), honoring string literals and escapes.
inline std::optional<std::size_t> balanced_end(std::string_view text, std::size_t start) {
    const char open = text[start];
    const char close = open == '{' ? '}' : ']';
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == open) {
            ++depth;
        } else if (c == close) {
            --depth;
            if (depth == 0) return i + 1;
        }
    }
    return std::nullopt;
}

// First parseable JSON object ('{') or array ('[') embedded in the text;
// model replies often wrap JSON in prose or code fences.
inline std::optional<json> extract_json(std::string_view text, char open) {
    std::size_t pos = text.find(open);
    while (pos != std::string_view::npos) {
        if (const auto end = balanced_end(text, pos)) {
            const auto candidate = text.substr(pos, *end - pos);
            json parsed = json::parse(candidate, nullptr, /*allow_exceptions=*/false);
            if (!parsed.is_discarded()) return parsed;
        }
        pos = text.find(open, pos + 1);
    }
    return std::nullopt;
}

inline std::optional<json> extract_json_object(std::string_view text) {
    return extract_json(text, '{');
}

inline std::optional<json> extract_json_array(std::string_view text) {
    return extract_json(text, '[');
}

} // namespace flowgate::detail
