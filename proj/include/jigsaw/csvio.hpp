#pragma once

#include <string>
#include <vector>

namespace jigsaw::csv {

// Splits one CSV line on commas. No quoting support; none of the project's
// file formats need it. Fields are trimmed of surrounding whitespace.
std::vector<std::string> split_line(const std::string& line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based line number of each row in the source file, for error messages.
  std::vector<int> line_numbers;
};

// Reads a whole CSV file. Throws ConfigError if the file cannot be opened or
// has no header. Blank lines are skipped.
Table read_file(const std::string& path);

// Writes `content` to `path` atomically: writes to "<path>.tmp" and renames.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace jigsaw::csv
