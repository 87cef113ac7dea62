#pragma once

#include <string>
#include <vector>

namespace rcmk {

// Small tabular report: fixed header row plus string cells. Used for CLI
// output and CSV artifacts.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Plain text rendering with aligned columns.
std::string render_table(const Table& t);

// RFC-4180-ish CSV: fields containing comma, quote, or newline are quoted,
// quotes doubled. Numeric cells should be pre-formatted with format_double so
// emitted bytes are stable across runs.
std::string to_csv(const Table& t);
Table parse_csv(const std::string& text);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace rcmk
