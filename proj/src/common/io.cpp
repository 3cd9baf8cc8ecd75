#include "metaexo/common/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "metaexo/common/error.hpp"

namespace metaexo {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  CsvTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      std::size_t c = 0;
      while (c <= line.size()) {
        std::size_t comma = line.find(',', c);
        if (comma == std::string::npos) comma = line.size();
        table.header.push_back(line.substr(c, comma - c));
        c = comma + 1;
        if (comma == line.size()) break;
      }
      continue;
    }
    std::vector<double> row;
    std::size_t c = 0;
    while (c <= line.size()) {
      std::size_t comma = line.find(',', c);
      if (comma == std::string::npos) comma = line.size();
      const std::string cell = line.substr(c, comma - c);
      char* parse_end = nullptr;
      const double v = std::strtod(cell.c_str(), &parse_end);
      if (parse_end == cell.c_str()) {
        throw IoError(path.string() + ":" + std::to_string(line_no) +
                      ": cannot parse number '" + cell + "'");
      }
      row.push_back(v);
      c = comma + 1;
      if (comma == line.size()) break;
    }
    if (!table.header.empty() && row.size() != table.header.size()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(table.header.size()) + " columns, got " +
                    std::to_string(row.size()));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  write_csv(path, table.header, table.rows);
}

}  // namespace metaexo
