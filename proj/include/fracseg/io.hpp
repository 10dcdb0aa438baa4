#pragma once
// Persistence layer: 17-significant-digit CSV emission, atomic file writes,
// and the flat key = value run configuration with one section level.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "params.hpp"

namespace fracseg {

// ---------------------------------------------------------------------------
// Serialization primitives.

// Floats are serialized with 17 significant digits so round-tripping is
// bit-exact.
inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Write via a temporary file in the same directory plus rename, so readers
// never observe a partially written file.
inline void write_atomic(const std::filesystem::path& path,
                         const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("write_atomic: cannot open " + tmp.string());
    out << content;
    if (!out.flush())
      throw DataError("write_atomic: write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_file: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// CSV with a header row; cells are preformatted strings (use format_g17 for
// floats).
inline std::string csv_text(const std::vector<std::string>& header,
                            const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (size_t j = 0; j < header.size(); ++j)
    out << (j ? "," : "") << header[j];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw DataError("csv_text: row width does not match header");
    for (size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << "\n";
  }
  return out.str();
}

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  write_atomic(path, csv_text(header, rows));
}

// Parse a CSV written by write_csv back into header + string rows.
inline void read_csv_raw(const std::filesystem::path& path,
                         std::vector<std::string>& header,
                         std::vector<std::vector<std::string>>& rows) {
  std::istringstream in(read_file(path));
  std::string line;
  header.clear();
  rows.clear();
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      header = cells;
      first = false;
      continue;
    }
    if (cells.size() != header.size())
      throw DataError("read_csv: ragged row in " + path.string());
    rows.push_back(std::move(cells));
  }
}

// Numeric variant: every data cell must parse as a double.
inline void read_csv(const std::filesystem::path& path,
                     std::vector<std::string>& header,
                     std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<std::string>> raw;
  read_csv_raw(path, header, raw);
  rows.clear();
  for (const auto& cells : raw) {
    std::vector<double> row;
    for (const std::string& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw DataError("read_csv: non-numeric cell '" + c + "' in " +
                        path.string());
      }
    }
    rows.push_back(std::move(row));
  }
}

// ---------------------------------------------------------------------------
// Flat key = value configuration with one section level.

// Keys are flattened to "section.key"; '#' starts a comment; whitespace
// around tokens is ignored.
inline std::map<std::string, std::string> parse_config_text(
    const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    const size_t b = s.find_first_not_of(ws);
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw UsageError("config line " + std::to_string(lineno) +
                         ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw UsageError("config line " + std::to_string(lineno) +
                         ": empty section name");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(lineno) +
                       ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw UsageError("config line " + std::to_string(lineno) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (kv.count(full))
      throw UsageError("config: duplicate key '" + full + "'");
    kv[full] = val;
  }
  return kv;
}

namespace io_detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("config: key '" + key + "' expects a number, got '" + v +
                     "'");
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError("config: key '" + key + "' expects an integer, got '" +
                     v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError("config: key '" + key + "' expects true/false, got '" + v +
                   "'");
}

inline std::vector<double> to_list(const std::string& key,
                                   const std::string& v) {
  std::vector<double> out;
  std::string cell;
  std::istringstream ss(v);
  while (std::getline(ss, cell, ','))
    if (!cell.empty()) out.push_back(to_double(key, cell));
  return out;
}

}  // namespace io_detail

// Full run configuration.  Every field has a recorded default; to_text()
// materializes all of them so a persisted config reproduces the run.
struct RunConfig {
  // [domain]
  double s = 0.5;
  int k = 2;
  double x_left = -1.0, x_right = 1.0;
  int n = 256;
  // [continuation]
  double beta0 = 1.0, ratio = 4.0;
  int stages = 10;
  double stage_tol = 1e-6;
  int max_iter = 20000;
  // [model]
  bool anchored = false;
  std::vector<double> m;  // cubic weights; empty = all zero
  double coupling = 1.0;  // uniform off-diagonal a_ij
  // [init]
  unsigned long long seed = 0;
  double noise = 0.01;  // relative amplitude of the seeded perturbation
  // [frequency]
  int angular = 64, radial = 32;
  std::string points = "auto";  // "auto" or comma-separated x values
  std::string builtin;          // empty or "y1ma" (analytic test field)
  int radii_count = 24;
  // [eig]
  std::string mask;  // optional path to a 0/1 mask file (one line per node)
  // [report]
  double eps_rel = 1e-3;
  bool with_frequency = true;
  // [run]
  int threads = 1;

  void validate() const {
    if (!(s > 0.0) || !(s < 1.0))
      throw UsageError("config: s must lie in (0,1)");
    if (k < 1) throw UsageError("config: k must be >= 1");
    if (!(x_right > x_left))
      throw UsageError("config: interval must satisfy x_left < x_right");
    if (n < 8) throw UsageError("config: n must be >= 8");
    if (!(beta0 > 0.0) || !(ratio > 1.0) || stages < 1)
      throw UsageError("config: continuation schedule must have beta0 > 0, "
                       "ratio > 1, stages >= 1");
    if (!(stage_tol > 0.0) || max_iter < 1)
      throw UsageError("config: stage_tol > 0 and max_iter >= 1 required");
    if (!m.empty() && static_cast<int>(m.size()) != k)
      throw UsageError("config: model.m must have k entries");
    if (!(coupling > 0.0)) throw UsageError("config: coupling must be > 0");
    if (!(noise >= 0.0)) throw UsageError("config: noise must be >= 0");
    if (angular < 4 || radial < 2 || radii_count < 2)
      throw UsageError("config: quadrature/radii sizes too small");
    if (!builtin.empty() && builtin != "y1ma")
      throw UsageError("config: frequency.builtin must be empty or 'y1ma'");
    if (!(eps_rel > 0.0) || !(eps_rel < 1.0))
      throw UsageError("config: report.eps_rel must lie in (0,1)");
    if (threads < 1) throw UsageError("config: threads must be >= 1");
  }

  static RunConfig from_map(const std::map<std::string, std::string>& kv) {
    using namespace io_detail;
    RunConfig c;
    for (const auto& [key, v] : kv) {
      if (key == "domain.s") c.s = to_double(key, v);
      else if (key == "domain.k") c.k = static_cast<int>(to_int(key, v));
      else if (key == "domain.x_left") c.x_left = to_double(key, v);
      else if (key == "domain.x_right") c.x_right = to_double(key, v);
      else if (key == "domain.n") c.n = static_cast<int>(to_int(key, v));
      else if (key == "continuation.beta0") c.beta0 = to_double(key, v);
      else if (key == "continuation.ratio") c.ratio = to_double(key, v);
      else if (key == "continuation.stages")
        c.stages = static_cast<int>(to_int(key, v));
      else if (key == "continuation.stage_tol")
        c.stage_tol = to_double(key, v);
      else if (key == "continuation.max_iter")
        c.max_iter = static_cast<int>(to_int(key, v));
      else if (key == "model.anchored") c.anchored = to_bool(key, v);
      else if (key == "model.m") c.m = to_list(key, v);
      else if (key == "model.coupling") c.coupling = to_double(key, v);
      else if (key == "init.seed")
        c.seed = static_cast<unsigned long long>(to_int(key, v));
      else if (key == "init.noise") c.noise = to_double(key, v);
      else if (key == "frequency.angular")
        c.angular = static_cast<int>(to_int(key, v));
      else if (key == "frequency.radial")
        c.radial = static_cast<int>(to_int(key, v));
      else if (key == "frequency.points") c.points = v;
      else if (key == "frequency.builtin") c.builtin = v;
      else if (key == "frequency.radii_count")
        c.radii_count = static_cast<int>(to_int(key, v));
      else if (key == "eig.mask") c.mask = v;
      else if (key == "report.eps_rel") c.eps_rel = to_double(key, v);
      else if (key == "report.with_frequency")
        c.with_frequency = to_bool(key, v);
      else if (key == "run.threads")
        c.threads = static_cast<int>(to_int(key, v));
      else
        throw UsageError("config: unknown key '" + key + "'");
    }
    c.validate();
    return c;
  }

  static RunConfig from_file(const std::filesystem::path& path) {
    return from_map(parse_config_text(read_file(path)));
  }

  std::string to_text() const {
    std::ostringstream o;
    o << "[domain]\n";
    o << "s = " << format_g17(s) << "\n";
    o << "k = " << k << "\n";
    o << "x_left = " << format_g17(x_left) << "\n";
    o << "x_right = " << format_g17(x_right) << "\n";
    o << "n = " << n << "\n";
    o << "[continuation]\n";
    o << "beta0 = " << format_g17(beta0) << "\n";
    o << "ratio = " << format_g17(ratio) << "\n";
    o << "stages = " << stages << "\n";
    o << "stage_tol = " << format_g17(stage_tol) << "\n";
    o << "max_iter = " << max_iter << "\n";
    o << "[model]\n";
    o << "anchored = " << (anchored ? "true" : "false") << "\n";
    o << "m = ";
    for (size_t i = 0; i < m.size(); ++i)
      o << (i ? "," : "") << format_g17(m[i]);
    o << "\n";
    o << "coupling = " << format_g17(coupling) << "\n";
    o << "[init]\n";
    o << "seed = " << seed << "\n";
    o << "noise = " << format_g17(noise) << "\n";
    o << "[frequency]\n";
    o << "angular = " << angular << "\n";
    o << "radial = " << radial << "\n";
    o << "points = " << points << "\n";
    o << "builtin = " << builtin << "\n";
    o << "radii_count = " << radii_count << "\n";
    o << "[eig]\n";
    o << "mask = " << mask << "\n";
    o << "[report]\n";
    o << "eps_rel = " << format_g17(eps_rel) << "\n";
    o << "with_frequency = " << (with_frequency ? "true" : "false") << "\n";
    o << "[run]\n";
    o << "threads = " << threads << "\n";
    return o.str();
  }
};

}  // namespace fracseg
