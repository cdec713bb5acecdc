#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trajan/bench.hpp"
#include "trajan/core.hpp"

namespace trajan {


// RFC 4180 field quoting: quote when the field holds a comma, quote, CR or
// LF; embedded quotes are doubled.
std::string csv_field(std::string_view field);
// Splits one CSV record. Handles quoted fields, including embedded newlines
// when the whole record is passed in.
std::vector<std::string> parse_csv_record(std::string_view record);
// Reads all records from a stream (quoted newlines allowed).
std::vector<std::vector<std::string>> read_csv(std::istream& in);

inline constexpr std::string_view kResultsHeader =
    "op,scale,workers,repeat,wall_seconds,bytes_shuffled";

std::size_t write_results_csv(std::span<const BenchRecord> records, std::ostream& out);
std::vector<BenchRecord> read_results_csv(std::istream& in);

// atom_index,component_id
std::size_t write_components_csv(const ComponentSet& components, std::ostream& out);
ComponentSet read_components_csv(std::istream& in);

// "n_components=2 sizes=4,4"
std::string component_summary(const ComponentSet& components);

}  // namespace trajan
