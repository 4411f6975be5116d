#include "fbbai/arms_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <string_view>
#include <vector>

#include "fbbai/errors.hpp"

namespace fbbai {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    cells.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

double parse_real(std::string_view cell, std::size_t line_no) {
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end || cell.empty())
    throw DegenerateInput("line " + std::to_string(line_no) + ": cannot parse '" +
                          std::string(cell) + "' as a number");
  return value;
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DegenerateInput("cannot open " + path);
  return in;
}

}  // namespace

Eigen::MatrixXd read_arms_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw DegenerateInput("arms CSV is empty");

  const auto header = split(line, ',');
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] != "x" + std::to_string(j + 1))
      throw DegenerateInput("arms CSV header must be x1..xd, got '" + std::string(header[j]) +
                            "'");
  const std::size_t d = header.size();

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != d)
      throw DegenerateInput("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(d) + " columns");
    for (auto cell : cells) values.push_back(parse_real(cell, line_no));
    ++rows;
  }
  if (rows == 0) throw DegenerateInput("arms CSV has no data rows");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = values[r * d + j];
  return x;
}

Eigen::MatrixXd read_arms_csv_file(const std::string& path) {
  auto in = open(path);
  return read_arms_csv(in);
}

Eigen::VectorXd read_vector(std::istream& in) {
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    for (char& c : line)
      if (c == ',' || c == '\t') c = ' ';
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) values.push_back(parse_real(tok, line_no));
  }
  if (values.empty()) throw DegenerateInput("parameter vector file is empty");
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::VectorXd read_vector_file(const std::string& path) {
  auto in = open(path);
  return read_vector(in);
}

}  // namespace fbbai
