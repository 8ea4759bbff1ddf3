#include "hte/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace hte::io {

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return j;
  }
  throw InputError("CSV has no column named '" + std::string(name) + "'");
}

CsvTable parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) throw InputError("malformed CSV: stray quote inside unquoted field");
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw InputError("malformed CSV: unterminated quoted field");
  if (field_started || !record.empty()) end_record();

  if (records.empty()) throw InputError("CSV is empty; a header row is required");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw InputError("CSV row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                       " fields, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw Error("failed to format number");
  return std::string(buf, ptr);
}

double parse_double(std::string_view s, std::string_view context) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InputError("non-numeric value '" + std::string(s) + "' in " + std::string(context));
  }
  return v;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

namespace {
void append_row(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t j = 0; j < cells.size(); ++j) {
    if (j) out.push_back(',');
    out += csv_escape(cells[j]);
  }
  out.push_back('\n');
}
}  // namespace

std::string to_csv(const CsvTable& table) {
  std::string out;
  append_row(out, table.header);
  for (const auto& r : table.rows) append_row(out, r);
  return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  }
}

std::string dataset_to_csv(const Dataset& data) {
  CsvTable t;
  t.header = data.covariate_names;
  t.header.push_back("W");
  t.header.push_back("Y");
  const auto p = data.covariates.cols();
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<std::string> r;
    r.reserve(static_cast<std::size_t>(p) + 2);
    for (Eigen::Index j = 0; j < p; ++j) {
      r.push_back(format_double(data.covariates(static_cast<Eigen::Index>(i), j)));
    }
    r.push_back(std::to_string(data.treatment[i]));
    r.push_back(format_double(data.outcome[i]));
    t.rows.push_back(std::move(r));
  }
  return to_csv(t);
}

std::string ground_truth_to_csv(const GroundTruth& truth) {
  CsvTable t;
  t.header = {"tau_true", "ite_true", "y0", "y1", "u", "propensity"};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    t.rows.push_back({format_double(truth.tau_true[i]), format_double(truth.ite_true[i]),
                      format_double(truth.y0[i]), format_double(truth.y1[i]),
                      format_double(truth.u[i]), format_double(truth.propensity[i])});
  }
  return to_csv(t);
}

Dataset dataset_from_table(const CsvTable& table, const std::string& treatment_col,
                           const std::string& outcome_col,
                           const std::vector<std::string>& covariate_cols) {
  const std::size_t w_col = table.column(treatment_col);
  const std::size_t y_col = table.column(outcome_col);

  std::vector<std::size_t> x_cols;
  std::vector<std::string> names;
  if (covariate_cols.empty()) {
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (j == w_col || j == y_col) continue;
      x_cols.push_back(j);
      names.push_back(table.header[j]);
    }
  } else {
    for (const auto& c : covariate_cols) {
      x_cols.push_back(table.column(c));
      names.push_back(c);
    }
  }
  if (x_cols.empty()) throw InputError("no covariate columns selected");

  const std::size_t n = table.rows.size();
  Dataset d;
  d.covariate_names = std::move(names);
  d.covariates.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(x_cols.size()));
  d.treatment.resize(n);
  d.outcome.resize(n);

  std::vector<std::size_t> bad_rows;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = table.rows[i];
    const std::string ctx = "row " + std::to_string(i + 1);
    const double w = parse_double(r[w_col], "column '" + treatment_col + "', " + ctx);
    if (w != 0.0 && w != 1.0) {
      bad_rows.push_back(i + 1);
    } else {
      d.treatment[i] = static_cast<int>(w);
    }
    d.outcome[i] = parse_double(r[y_col], "column '" + outcome_col + "', " + ctx);
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      d.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          parse_double(r[x_cols[k]], "column '" + d.covariate_names[k] + "', " + ctx);
    }
  }
  if (!bad_rows.empty()) {
    std::string msg = "treatment column '" + treatment_col + "' must be 0/1; offending rows:";
    for (std::size_t k = 0; k < bad_rows.size() && k < 10; ++k) msg += " " + std::to_string(bad_rows[k]);
    if (bad_rows.size() > 10) msg += " (+" + std::to_string(bad_rows.size() - 10) + " more)";
    throw InputError(msg);
  }
  return d;
}

}  // namespace hte::io
