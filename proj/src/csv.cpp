#include "magnum/csv.hpp"

#include "magnum/errors.hpp"

namespace magnum {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };

    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                } else {
                    in_quotes = false;
                    ++i;
                }
            } else {
                field.push_back(c);
                ++i;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || field_was_quoted) {
                    throw FormatError("quote inside unquoted field", i);
                }
                in_quotes = true;
                field_was_quoted = true;
                ++i;
                break;
            case ',':
                end_field();
                ++i;
                break;
            case '\r':
                if (i + 1 < n && text[i + 1] == '\n') {
                    end_row();
                    i += 2;
                } else {
                    throw FormatError("bare carriage return", i);
                }
                break;
            case '\n':
                end_row();
                ++i;
                break;
            default:
                if (field_was_quoted) {
                    throw FormatError("data after closing quote", i);
                }
                field.push_back(c);
                ++i;
                break;
        }
    }
    if (in_quotes) {
        throw FormatError("unterminated quoted field", n);
    }
    // Final row without trailing newline.
    if (!field.empty() || field_was_quoted || !row.empty()) {
        end_row();
    }
    return rows;
}

std::string format_csv(const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i > 0) out.push_back(',');
            const std::string& f = row[i];
            const bool needs_quotes =
                f.find_first_of(",\"\r\n") != std::string::npos;
            if (needs_quotes) {
                out.push_back('"');
                for (char c : f) {
                    if (c == '"') out.push_back('"');
                    out.push_back(c);
                }
                out.push_back('"');
            } else {
                out += f;
            }
        }
        out.push_back('\n');
    }
    return out;
}

}  // namespace magnum
