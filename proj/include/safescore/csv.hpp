#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "safescore/errors.hpp"
#include "safescore/io.hpp"

namespace safescore {

// Minimal CSV support: comma separator, optional double-quote escaping,
// first row is the header.  CRLF and LF line endings both accepted.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }

    int require_column(std::string_view name) const {
        const int idx = column(name);
        if (idx < 0) throw DataError("missing required column: " + std::string(name));
        return idx;
    }
};

// Single pass so quoted fields may contain commas, quotes, and newlines.
inline CsvTable parse_csv(std::string_view text) {
    CsvTable table;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool saw_any = false;  // anything on the current line, so blank lines skip
    std::size_t cur_line = 1;

    auto end_record = [&] {
        if (!saw_any) return;
        fields.push_back(std::move(field));
        field.clear();
        if (table.header.empty()) {
            table.header = std::move(fields);
        } else if (fields.size() != table.header.size()) {
            throw DataError("line " + std::to_string(cur_line) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        } else {
            table.rows.push_back(std::move(fields));
        }
        fields.clear();
        saw_any = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++cur_line;
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
            saw_any = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            saw_any = true;
        } else if (c == '\n') {
            end_record();
            ++cur_line;
        } else if (c == '\r' && (i + 1 == text.size() || text[i + 1] == '\n')) {
            // line-ending CR, consumed by the newline handling
        } else {
            field += c;
            saw_any = true;
        }
    }
    if (quoted) throw DataError("unterminated quote on line " + std::to_string(cur_line));
    end_record();
    if (table.header.empty()) throw DataError("empty CSV input");
    return table;
}

inline CsvTable load_csv(const std::filesystem::path& path) {
    try {
        return parse_csv(read_text_file(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

inline std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header) : width_(header.size()) {
        append_row(header);
    }

    void append_row(const std::vector<std::string>& fields) {
        if (fields.size() != width_) throw Error("CSV row width mismatch");
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) buf_ += ',';
            buf_ += csv_escape(fields[i]);
        }
        buf_ += '\n';
    }

    const std::string& str() const { return buf_; }

    void save(const std::filesystem::path& path) const { write_file_atomic(path, buf_); }

  private:
    std::size_t width_;
    std::string buf_;
};

}  // namespace safescore
