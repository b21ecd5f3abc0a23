#pragma once

// Delimited-text ingestion and emission.  Reading is header-driven: callers
// bind model roles to column names and get back a Dataset whose pool holds
// each distinct bound regressor column exactly once, in first-use order.
// Numbers are parsed and written locale-independently; emission uses 17
// significant digits so a written file re-ingests to the same doubles.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "mixsur/types.hpp"

namespace mixsur {

struct TextTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Index column(const std::string& name) const {
    for (size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<Index>(j);
    return -1;
  }
};

namespace detail {

// Splits one line on the delimiter, honoring double quotes with "" escapes.
inline std::vector<std::string> split_fields(const std::string& line,
                                             char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delimiter) {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

inline char detect_delimiter(const std::string& header_line) {
  const char candidates[] = {',', ';', '\t'};
  char best = ',';
  size_t best_count = 0;
  for (char c : candidates) {
    size_t count = 0;
    bool quoted = false;
    for (char ch : header_line) {
      if (ch == '"') quoted = !quoted;
      if (!quoted && ch == c) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best = c;
    }
  }
  return best;
}

}  // namespace detail

// Reads a delimited table with a header row.  delimiter 0 means detect
// among comma, semicolon and tab from the header line.
inline TextTable read_delimited(std::istream& in, char delimiter = '\0') {
  std::string line;
  if (!std::getline(in, line))
    throw EmptyData("delimited input has no header row");
  if (delimiter == '\0') delimiter = detail::detect_delimiter(line);

  TextTable table;
  table.header = detail::split_fields(line, delimiter);
  size_t file_line = 1;
  while (std::getline(in, line)) {
    ++file_line;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> fields = detail::split_fields(line, delimiter);
    if (fields.size() != table.header.size())
      throw ParseError("line " + std::to_string(file_line) + ": expected " +
                       std::to_string(table.header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
  }
  return table;
}

inline TextTable read_delimited_file(const std::string& path,
                                     char delimiter = '\0') {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_delimited(in, delimiter);
}

namespace detail {

inline double parse_double(const std::string& text, Index row,
                           const std::string& column) {
  // Strip surrounding blanks; from_chars does the rest without locales.
  size_t begin = text.find_first_not_of(" \t");
  size_t end = text.find_last_not_of(" \t");
  if (begin == std::string::npos)
    throw ParseError("row " + std::to_string(row) + ", column '" + column +
                     "': empty value");
  double value = 0;
  const char* first = text.data() + begin;
  const char* last = text.data() + end + 1;
  const auto state = std::from_chars(first, last, value);
  if (state.ec != std::errc() || state.ptr != last)
    throw ParseError("row " + std::to_string(row) + ", column '" + column +
                     "': '" + text + "' is not a number");
  return value;
}

}  // namespace detail

// Which columns play which model role.  regressors may be empty (no
// equation gets any) or must have one list per response.
struct ColumnBindings {
  std::vector<std::string> responses;
  std::vector<std::vector<std::string>> regressors;
};

// Builds a Dataset from bound columns.  Each distinct regressor name
// becomes one pool column (first-use order), so a column bound in several
// equations is shared, not duplicated.  Row numbers in errors are 1-based
// data rows.
inline Dataset<double> ingest(const TextTable& table,
                              const ColumnBindings& bindings,
                              Index components = 1) {
  const Index dim = static_cast<Index>(bindings.responses.size());
  if (dim < 1) throw InvalidArgument("ingest: no response columns bound");
  if (!bindings.regressors.empty() &&
      static_cast<Index>(bindings.regressors.size()) != dim)
    throw InvalidArgument(
        "ingest: regressor bindings must cover every equation");
  if (table.rows.empty()) throw EmptyData("ingest: table has no data rows");

  ModelSpec spec;
  spec.response_count = dim;
  spec.component_count = components;
  spec.response_names = bindings.responses;

  std::vector<Index> response_cols;
  for (const std::string& name : bindings.responses) {
    const Index c = table.column(name);
    if (c < 0) throw MissingColumn(name, "column '" + name + "' not found");
    response_cols.push_back(c);
  }

  std::vector<Index> pool_cols;  // table columns, one per distinct name
  for (Index d = 0; d < dim; ++d) {
    std::vector<Index> equation;
    if (!bindings.regressors.empty())
      for (const std::string& name : bindings.regressors[size_t(d)]) {
        const Index c = table.column(name);
        if (c < 0)
          throw MissingColumn(name, "column '" + name + "' not found");
        Index slot = -1;
        for (size_t j = 0; j < spec.pool_names.size(); ++j)
          if (spec.pool_names[j] == name) slot = static_cast<Index>(j);
        if (slot < 0) {
          slot = static_cast<Index>(pool_cols.size());
          pool_cols.push_back(c);
          spec.pool_names.push_back(name);
        }
        equation.push_back(slot);
      }
    spec.equation_regressors.push_back(std::move(equation));
  }

  const Index n = static_cast<Index>(table.rows.size());
  Dataset<double> data;
  data.responses.resize(n, dim);
  data.pool.resize(n, static_cast<Index>(pool_cols.size()));
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[size_t(i)];
    for (Index d = 0; d < dim; ++d)
      data.responses(i, d) = detail::parse_double(
          row[size_t(response_cols[size_t(d)])], i + 1,
          bindings.responses[size_t(d)]);
    for (size_t j = 0; j < pool_cols.size(); ++j)
      data.pool(i, static_cast<Index>(j)) = detail::parse_double(
          row[size_t(pool_cols[j])], i + 1, spec.pool_names[j]);
  }
  data.active = spec;
  return data;
}

// A non-numeric column mapped to integer codes, levels in first-use order.
struct FactorColumn {
  std::vector<Index> codes;
  std::vector<std::string> levels;
};

inline FactorColumn read_factor(const TextTable& table,
                                const std::string& column) {
  const Index c = table.column(column);
  if (c < 0) throw MissingColumn(column, "column '" + column + "' not found");
  if (table.rows.empty()) throw EmptyData("read_factor: table has no rows");
  FactorColumn factor;
  for (const auto& row : table.rows) {
    const std::string& value = row[size_t(c)];
    Index code = -1;
    for (size_t k = 0; k < factor.levels.size(); ++k)
      if (factor.levels[k] == value) code = static_cast<Index>(k);
    if (code < 0) {
      code = static_cast<Index>(factor.levels.size());
      factor.levels.push_back(value);
    }
    factor.codes.push_back(code);
  }
  return factor;
}

// 17 significant digits: enough for the written text to parse back to the
// identical double.
inline std::string format_full(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

// Writes responses, pool columns, and optional 1-based component labels in
// an ingest-compatible layout.
inline void write_dataset_csv(std::ostream& out, const Dataset<double>& data,
                              const ModelSpec& spec,
                              const std::vector<Index>* labels = nullptr) {
  const Index dim = spec.response_count;
  for (Index d = 0; d < dim; ++d) {
    if (d) out << ',';
    out << spec.response_name(d);
  }
  for (Index c = 0; c < data.pool.cols(); ++c) out << ',' << spec.pool_name(c);
  if (labels) out << ",component";
  out << '\n';
  for (Index i = 0; i < data.observation_count(); ++i) {
    for (Index d = 0; d < dim; ++d) {
      if (d) out << ',';
      out << format_full(data.responses(i, d));
    }
    for (Index c = 0; c < data.pool.cols(); ++c)
      out << ',' << format_full(data.pool(i, c));
    if (labels) out << ',' << (*labels)[size_t(i)] + 1;
    out << '\n';
  }
}

}  // namespace mixsur
