#include "dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "error.hpp"

namespace emcs {

namespace {

std::string Trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '"')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '"')) {
    --e;
  }
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> SplitLine(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(Trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

bool ParseNumber(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* b = cell.data();
  const char* e = b + cell.size();
  if (*b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && std::isfinite(out);
}

}  // namespace

Sample ParseDatasetCsv(std::string_view text, const DatasetSchema& schema) {
  schema.Validate();
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && Trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) Fail(ErrorKind::kParse, "dataset: empty file, no header row");

  const auto header = SplitLine(lines.front());
  auto column_of = [&](const std::string& name) -> std::size_t {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    Fail(ErrorKind::kParse, "dataset: missing column '" + name + "' in header");
  };
  const std::size_t y_col = column_of(schema.outcome);
  const std::size_t d_col = column_of(schema.treatment);
  std::vector<std::size_t> x_cols;
  std::vector<std::string> names;
  for (const auto& c : schema.covariates) {
    x_cols.push_back(column_of(c.name));
    names.push_back(c.name);
  }

  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_no;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (Trim(lines[i]).empty()) continue;
    rows.push_back(SplitLine(lines[i]));
    line_no.push_back(i + 1);
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd y(n), d(n);
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(x_cols.size()));

  auto cell = [&](std::size_t r, std::size_t c) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      Fail(ErrorKind::kParse, "dataset: row " + std::to_string(line_no[r]) + " has " +
                                  std::to_string(row.size()) + " fields, header has " +
                                  std::to_string(header.size()));
    }
    double v = 0.0;
    if (!ParseNumber(row[c], v)) {
      Fail(ErrorKind::kParse, "dataset: non-numeric cell at row " + std::to_string(line_no[r]) +
                                  ", column " + std::to_string(c + 1) + " ('" + header[c] +
                                  "'): '" + row[c] + "'");
    }
    return v;
  };
  auto binary = [&](double v, std::size_t r, const std::string& name) {
    if (v != 0.0 && v != 1.0) {
      std::ostringstream os;
      os << "dataset: binary column '" << name << "' has value " << v << " at row "
         << line_no[r];
      Fail(ErrorKind::kValidation, os.str());
    }
  };

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    y[i] = cell(r, y_col);
    d[i] = cell(r, d_col);
    binary(d[i], r, schema.treatment);
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      const double v = cell(r, x_cols[k]);
      if (schema.covariates[k].kind == VariableKind::kBinary) {
        binary(v, r, schema.covariates[k].name);
      }
      x(i, static_cast<Eigen::Index>(k)) = v;
    }
  }
  return Sample(std::move(y), std::move(d), std::move(x), std::move(names));
}

Sample LoadDatasetCsv(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open dataset '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseDatasetCsv(ss.str(), schema);
}

}  // namespace emcs
