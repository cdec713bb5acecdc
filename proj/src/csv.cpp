#include "trajan/csv.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "trajan/errors.hpp"

namespace trajan {

std::string csv_field(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> parse_csv_record(std::string_view record) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < record.size(); ++i) {
    const char c = record[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < record.size() && record[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r' && c != '\n') {
      fields.back() += c;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  return fields;
}

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string record, line;
  while (std::getline(in, line)) {
    if (!record.empty()) record += '\n';
    record += line;
    // A record ends once its quotes balance.
    std::size_t quotes = 0;
    for (char c : record) quotes += c == '"';
    if (quotes % 2 != 0) continue;
    if (!record.empty() && record.back() == '\r') record.pop_back();
    rows.push_back(parse_csv_record(record));
    record.clear();
  }
  if (!record.empty()) throw FormatError("unterminated quoted CSV field at end of input");
  return rows;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& s, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw FormatError(std::string("bad ") + what + " value '" + s + "'");
  }
  return v;
}

std::size_t emit(std::ostream& out, const std::string& text) {
  out << text;
  if (!out) throw IoError("CSV write failed");
  return text.size();
}

}  // namespace

std::size_t write_results_csv(std::span<const BenchRecord> records, std::ostream& out) {
  std::size_t n = emit(out, std::string(kResultsHeader) + "\n");
  for (const auto& r : records) {
    std::string line = csv_field(r.op) + "," + csv_field(r.scale) + "," +
                       std::to_string(r.workers) + "," + std::to_string(r.repeat) + "," +
                       format_double(r.wall_seconds) + "," + std::to_string(r.bytes_shuffled) +
                       "\n";
    n += emit(out, line);
  }
  return n;
}

std::vector<BenchRecord> read_results_csv(std::istream& in) {
  auto rows = read_csv(in);
  if (rows.empty()) throw FormatError("results CSV is empty");
  std::ostringstream header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header << (i ? "," : "") << rows[0][i];
  if (header.str() != kResultsHeader) throw FormatError("unexpected results header: " + header.str());
  std::vector<BenchRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != 6) {
      throw FormatError("results row " + std::to_string(i) + " has " + std::to_string(f.size()) +
                        " fields");
    }
    BenchRecord r;
    r.op = f[0];
    r.scale = f[1];
    r.workers = parse_number<std::size_t>(f[2], "workers");
    r.repeat = parse_number<std::size_t>(f[3], "repeat");
    r.wall_seconds = parse_number<double>(f[4], "wall_seconds");
    r.bytes_shuffled = parse_number<std::uint64_t>(f[5], "bytes_shuffled");
    out.push_back(std::move(r));
  }
  return out;
}

std::size_t write_components_csv(const ComponentSet& components, std::ostream& out) {
  std::string text = "atom_index,component_id\n";
  for (std::size_t v = 0; v < components.assignment.size(); ++v) {
    text += std::to_string(v);
    text += ',';
    text += std::to_string(components.assignment[v]);
    text += '\n';
  }
  return emit(out, text);
}

ComponentSet read_components_csv(std::istream& in) {
  auto rows = read_csv(in);
  if (rows.empty() || rows[0] != std::vector<std::string>{"atom_index", "component_id"}) {
    throw FormatError("components CSV must start with atom_index,component_id");
  }
  std::vector<std::uint32_t> labels(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) throw FormatError("components row " + std::to_string(i) + " malformed");
    const auto v = parse_number<std::size_t>(rows[i][0], "atom_index");
    if (v != i - 1) throw FormatError("components CSV rows must be in atom order");
    labels[v] = parse_number<std::uint32_t>(rows[i][1], "component_id");
  }
  auto out = canonicalize(labels);
  if (out.assignment != labels) throw FormatError("component ids are not canonical");
  return out;
}

std::string component_summary(const ComponentSet& components) {
  std::string s = "n_components=" + std::to_string(components.n_components) + " sizes=";
  const auto sizes = components.sizes();
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(sizes[i]);
  }
  return s;
}

}  // namespace trajan
