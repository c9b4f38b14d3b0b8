#include "ncs/serialize.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"

#include "ncs/errors.hpp"

namespace ncs {

std::string fmt17(double v) { return fmt::format("{:.17g}", v); }
std::string fmt6(double v) { return fmt::format("{:.6g}", v); }

std::string config_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string header_line(const std::string& hash) {
  return fmt::format("# ncs-toolkit {} config={}", kToolkitVersion, hash);
}

namespace {

void add_slice(std::vector<ArrayRecord>& out, std::optional<int> k, int mode, const ModeSlice& s) {
  out.push_back({k, mode, "p_bar", s.p_bar});
  out.push_back({k, mode, "gamma", s.gamma});
  for (std::size_t j = 0; j < s.m.size(); ++j) out.push_back({k, mode, fmt::format("m{}", j), s.m[j]});
  for (std::size_t j = 0; j < s.s_tilde.size(); ++j) out.push_back({k, mode, fmt::format("s_tilde{}", j + 1), s.s_tilde[j]});
  for (std::size_t j = 0; j < s.f.size(); ++j) out.push_back({k, mode, fmt::format("f{}", j + 1), s.f[j]});
}

void add_gains(std::vector<ArrayRecord>& out, std::optional<int> k, int mode, const FeedbackGains& g) {
  out.push_back({k, mode, "k0", g.k0});
  for (std::size_t j = 0; j < g.kj.size(); ++j) out.push_back({k, mode, fmt::format("k{}", j + 1), g.kj[j]});
}

}  // namespace

std::vector<ArrayRecord> solution_records(const CdreSolution& sol) {
  std::vector<ArrayRecord> out;
  for (int k = sol.delay(); k <= sol.horizon(); ++k) {
    for (int i = 0; i < sol.num_modes(); ++i) add_slice(out, k, i, sol.at(k, i));
  }
  return out;
}

std::vector<ArrayRecord> solution_records(const CareSolution& sol) {
  std::vector<ArrayRecord> out;
  for (std::size_t i = 0; i < sol.slices.size(); ++i) add_slice(out, std::nullopt, static_cast<int>(i), sol.slices[i]);
  return out;
}

std::vector<ArrayRecord> gain_records(const CdreSolution& sol) {
  std::vector<ArrayRecord> out;
  for (int k = sol.delay(); k <= sol.horizon(); ++k) {
    for (int i = 0; i < sol.num_modes(); ++i) add_gains(out, k, i, sol.at(k, i).gains);
  }
  return out;
}

std::vector<ArrayRecord> gain_records(const CareSolution& sol) {
  std::vector<ArrayRecord> out;
  for (std::size_t i = 0; i < sol.slices.size(); ++i) add_gains(out, std::nullopt, static_cast<int>(i), sol.slices[i].gains);
  return out;
}

void write_records(std::ostream& os, const std::vector<ArrayRecord>& records, Format format,
                   const std::string& header) {
  if (format == Format::Csv) {
    os << header << '\n' << "k,mode,array,rows,cols,values\n";
    for (const auto& r : records) {
      os << (r.k ? std::to_string(*r.k) : std::string("*")) << ',' << r.mode << ',' << r.array << ','
         << r.value.rows() << ',' << r.value.cols();
      for (Eigen::Index i = 0; i < r.value.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.value.cols(); ++j) os << ',' << fmt17(r.value(i, j));
      }
      os << '\n';
    }
    return;
  }
  // Hand-written so numbers keep the fixed 17-digit format.
  os << "{\"header\": \"" << header << "\",\n \"records\": [";
  for (std::size_t n = 0; n < records.size(); ++n) {
    const auto& r = records[n];
    os << (n ? ",\n  " : "\n  ") << "{\"k\": " << (r.k ? std::to_string(*r.k) : std::string("null"))
       << ", \"mode\": " << r.mode << ", \"array\": \"" << r.array << "\", \"rows\": " << r.value.rows()
       << ", \"cols\": " << r.value.cols() << ", \"data\": [";
    bool first = true;
    for (Eigen::Index i = 0; i < r.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < r.value.cols(); ++j) {
        os << (first ? "" : ", ") << fmt17(r.value(i, j));
        first = false;
      }
    }
    os << "]}";
  }
  os << "\n ]}\n";
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ShapeMismatch(fmt::format("not a number: '{}'", s));
  }
  if (used != s.size()) throw ShapeMismatch(fmt::format("not a number: '{}'", s));
  return v;
}

int parse_int(const std::string& s) {
  const double v = parse_double(s);
  if (v != static_cast<int>(v)) throw ShapeMismatch(fmt::format("not an integer: '{}'", s));
  return static_cast<int>(v);
}

}  // namespace

std::vector<ArrayRecord> read_records(std::istream& is) {
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto first = text.find_first_not_of(" \t\r\n");
  std::vector<ArrayRecord> out;
  if (first != std::string::npos && text[first] == '{') {
    const auto j = nlohmann::json::parse(text);
    for (const auto& r : j.at("records")) {
      ArrayRecord rec;
      if (!r.at("k").is_null()) rec.k = r.at("k").get<int>();
      rec.mode = r.at("mode").get<int>();
      rec.array = r.at("array").get<std::string>();
      const int rows = r.at("rows").get<int>();
      const int cols = r.at("cols").get<int>();
      const auto& data = r.at("data");
      if (static_cast<int>(data.size()) != rows * cols) throw ShapeMismatch("record data length mismatch");
      rec.value.resize(rows, cols);
      for (int i = 0; i < rows; ++i) {
        for (int c = 0; c < cols; ++c) rec.value(i, c) = data[static_cast<std::size_t>(i * cols + c)].get<double>();
      }
      out.push_back(std::move(rec));
    }
    return out;
  }
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line.rfind("k,", 0) == 0) continue;
    const auto f = split_csv(line);
    if (f.size() < 5) throw ShapeMismatch(fmt::format("malformed record line: '{}'", line));
    ArrayRecord rec;
    if (f[0] != "*") rec.k = parse_int(f[0]);
    rec.mode = parse_int(f[1]);
    rec.array = f[2];
    const int rows = parse_int(f[3]);
    const int cols = parse_int(f[4]);
    if (rows < 0 || cols < 0 || f.size() != 5 + static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
      throw ShapeMismatch(fmt::format("record '{}' has the wrong number of entries", rec.array));
    }
    rec.value.resize(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int c = 0; c < cols; ++c) rec.value(i, c) = parse_double(f[5 + static_cast<std::size_t>(i * cols + c)]);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

// Index of the numeric suffix in names like "m3"; -1 if `name` lacks `prefix`.
int suffix_index(const std::string& name, const std::string& prefix) {
  if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return -1;
  const std::string rest = name.substr(prefix.size());
  if (!std::all_of(rest.begin(), rest.end(), [](char c) { return c >= '0' && c <= '9'; })) return -1;
  return std::stoi(rest);
}

}  // namespace

CdreSolution cdre_from_records(const std::vector<ArrayRecord>& records, int delay, int num_modes, const Mat& terminal) {
  int k_max = delay - 1;
  for (const auto& r : records) {
    if (!r.k) throw ShapeMismatch("finite-horizon records need a time index");
    k_max = std::max(k_max, *r.k);
  }
  if (k_max < delay) throw ShapeMismatch("no records in the horizon");
  std::vector<std::vector<ModeSlice>> slices(static_cast<std::size_t>(k_max - delay + 1),
                                             std::vector<ModeSlice>(static_cast<std::size_t>(num_modes)));
  for (auto& per_k : slices) {
    for (auto& s : per_k) {
      s.m.resize(static_cast<std::size_t>(delay) + 2);
      s.s_tilde.resize(static_cast<std::size_t>(delay));
      s.f.resize(static_cast<std::size_t>(delay) + 2);
    }
  }
  for (const auto& r : records) {
    if (*r.k < delay || r.mode < 0 || r.mode >= num_modes) throw ShapeMismatch("record index out of range");
    ModeSlice& s = slices[static_cast<std::size_t>(*r.k - delay)][static_cast<std::size_t>(r.mode)];
    int j = -1;
    if (r.array == "p_bar") {
      s.p_bar = r.value;
    } else if (r.array == "gamma") {
      s.gamma = r.value;
    } else if ((j = suffix_index(r.array, "s_tilde")) >= 1 && j <= delay) {
      s.s_tilde[static_cast<std::size_t>(j - 1)] = r.value;
    } else if ((j = suffix_index(r.array, "m")) >= 0 && j <= delay + 1) {
      s.m[static_cast<std::size_t>(j)] = r.value;
    } else if ((j = suffix_index(r.array, "f")) >= 1 && j <= delay + 2) {
      s.f[static_cast<std::size_t>(j - 1)] = r.value;
    } else {
      throw ShapeMismatch(fmt::format("unknown array '{}'", r.array));
    }
  }
  for (auto& per_k : slices) {
    for (auto& s : per_k) {
      if (s.gamma.size() == 0 || s.m[0].size() == 0) throw ShapeMismatch("solution records are incomplete");
      Eigen::LLT<Mat> llt(s.gamma);
      s.gains.k0 = llt.solve(s.m[0]);
      s.gains.kj.clear();
      for (int j = 1; j <= delay; ++j) s.gains.kj.push_back(llt.solve(s.m[static_cast<std::size_t>(j)]));
    }
  }
  return CdreSolution(k_max, delay, terminal, std::move(slices));
}

PolicySpec policy_from_gain_records(const std::vector<ArrayRecord>& records, int delay, int num_modes) {
  if (records.empty()) throw ShapeMismatch("gain file has no records");
  const bool timed = records.front().k.has_value();
  std::map<int, std::vector<FeedbackGains>> table;
  for (const auto& r : records) {
    if (r.k.has_value() != timed) throw ShapeMismatch("gain file mixes stationary and time-indexed records");
    if (r.mode < 0 || r.mode >= num_modes) throw ShapeMismatch("gain record mode out of range");
    const int k = timed ? *r.k : 0;
    auto& per_mode = table[k];
    if (per_mode.empty()) {
      per_mode.resize(static_cast<std::size_t>(num_modes));
      for (auto& g : per_mode) g.kj.resize(static_cast<std::size_t>(delay));
    }
    FeedbackGains& g = per_mode[static_cast<std::size_t>(r.mode)];
    const int j = suffix_index(r.array, "k");
    if (j == 0) {
      g.k0 = r.value;
    } else if (j >= 1 && j <= delay) {
      g.kj[static_cast<std::size_t>(j - 1)] = r.value;
    } else {
      throw ShapeMismatch(fmt::format("unknown gain '{}'", r.array));
    }
  }
  for (const auto& [k, per_mode] : table) {
    for (const auto& g : per_mode) {
      if (g.k0.size() == 0) throw ShapeMismatch(fmt::format("gain file lacks k0 at k={}", k));
      for (const auto& kj : g.kj) {
        if (kj.size() == 0) throw ShapeMismatch(fmt::format("gain file lacks a history gain at k={}", k));
      }
    }
  }
  if (!timed) return StationaryPolicy{table.begin()->second};
  TimeVaryingPolicy p;
  p.delay = delay;
  int expect = delay;
  for (auto& [k, per_mode] : table) {
    if (k != expect++) throw ShapeMismatch("gain file time indices must be contiguous from d");
    p.gains.push_back(std::move(per_mode));
  }
  return p;
}

}  // namespace ncs
