#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace segadv {

// Comma-separated, header first, '.' decimal point. Fields holding a comma,
// quote or newline are quoted.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& fields);

 private:
  std::ofstream out_;
  std::size_t columns_;
  std::string path_;
};

std::string csv_escape(const std::string& field);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

// Reads files written by CsvWriter.
CsvTable read_csv(const std::string& path);

}  // namespace segadv
