#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "ncs/care_solver.hpp"
#include "ncs/cdre_solver.hpp"
#include "ncs/linalg.hpp"

namespace ncs {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

// 17 significant digits: enough to round-trip any double.
std::string fmt17(double v);
// 6 significant digits for human-facing summaries.
std::string fmt6(double v);

// 64-bit FNV-1a, printed as 16 hex digits.
std::string config_hash(std::string_view bytes);

// "# ncs-toolkit <version> config=<hash>"
std::string header_line(const std::string& hash);

// One matrix of a solution. `k` is empty for stationary arrays.
struct ArrayRecord {
  std::optional<int> k;
  int mode = 0;
  std::string array;
  Mat value;
};

// Array names: p_bar, gamma, m0..m{d+1}, s_tilde1..s_tilde{d}, f1..f{d+2}.
std::vector<ArrayRecord> solution_records(const CdreSolution& sol);
std::vector<ArrayRecord> solution_records(const CareSolution& sol);
// Array names: k0, k1..k{d}.
std::vector<ArrayRecord> gain_records(const CdreSolution& sol);
std::vector<ArrayRecord> gain_records(const CareSolution& sol);

enum class Format { Csv, Json };

// CSV: header line, column line "k,mode,array,rows,cols,values...", then one
// row per record with the matrix entries row-major. Stationary rows carry
// "*" in the k column. JSON: an object with "header" and "records".
void write_records(std::ostream& os, const std::vector<ArrayRecord>& records, Format format,
                   const std::string& header);

// Reads either layout (detected from the first non-blank character).
std::vector<ArrayRecord> read_records(std::istream& is);

// Rebuilds a finite-horizon solution from its records.
CdreSolution cdre_from_records(const std::vector<ArrayRecord>& records, int delay, int num_modes, const Mat& terminal);

// Rebuilds a policy from gain records: time-varying if the records carry a
// k index, stationary otherwise.
PolicySpec policy_from_gain_records(const std::vector<ArrayRecord>& records, int delay, int num_modes);

}  // namespace ncs
