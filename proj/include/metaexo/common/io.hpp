#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace metaexo {

/// Shortest text form of a double that round-trips exactly ("%.17g" fallback
/// trimmed). Used everywhere a double is written to CSV so outputs are
/// byte-stable across runs.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// Rows of a comma-separated file. `header` receives the first line's cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace metaexo
