#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pdsplit/errors.hpp"
#include "pdsplit/solvers.hpp"

namespace pdsplit {

// Plain-text, line-oriented output formats. Doubles are printed with
// %.17g so that a rerun with the same config and seed is byte-identical.

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_mask(std::uint64_t mask) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%llx",
                static_cast<unsigned long long>(mask));
  return buf;
}

}  // namespace detail

inline constexpr const char* kTraceHeader =
    "k,step_norm,dist_P_sq,dist_D_sq,dist_M_sq,kkt,envelope_bound,active_mask";

inline void write_trace(const IterateLog& log, std::ostream& out) {
  out << kTraceHeader << "\n";
  for (const auto& r : log.records) {
    out << r.k << ',' << detail::fmt_double(r.step_norm) << ','
        << detail::fmt_double(r.dist_P_sq) << ','
        << detail::fmt_double(r.dist_D_sq) << ','
        << detail::fmt_double(r.dist_M_sq) << ','
        << detail::fmt_double(r.kkt) << ','
        << detail::fmt_double(r.envelope_bound) << ','
        << (r.has_active_mask ? detail::fmt_mask(r.active_mask) : "") << "\n";
  }
}

inline void write_trace(const IterateLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open trace file for writing: " + path);
  write_trace(log, out);
}

struct TraceRow {
  long k = 0;
  double step_norm = kMissing;
  double dist_P_sq = kMissing;
  double dist_D_sq = kMissing;
  double dist_M_sq = kMissing;
  double kkt = kMissing;
  double envelope_bound = kMissing;
  std::string active_mask;
};

inline std::vector<TraceRow> read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("trace: empty file");
  if (line != kTraceHeader)
    throw ConfigError("trace: unexpected header row");
  std::vector<TraceRow> rows;
  auto parse_field = [](const std::string& s) {
    return s.empty() ? kMissing : std::stod(s);
  };
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    f.push_back(cur);
    if (f.size() != 8)
      throw ConfigError("trace: line " + std::to_string(lineno) +
                        " has " + std::to_string(f.size()) + " fields");
    TraceRow r;
    r.k = std::stol(f[0]);
    r.step_norm = parse_field(f[1]);
    r.dist_P_sq = parse_field(f[2]);
    r.dist_D_sq = parse_field(f[3]);
    r.dist_M_sq = parse_field(f[4]);
    r.kkt = parse_field(f[5]);
    r.envelope_bound = parse_field(f[6]);
    r.active_mask = f[7];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<TraceRow> read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trace file: " + path);
  return read_trace(in);
}

// Primal-dual point file: one labeled block per line.
inline void write_point(const PrimalDualPoint& z, std::ostream& out) {
  out << "pdsplit-point v1\n";
  out << "m " << z.x.block_count() << "\n";
  out << "primal";
  for (int d : z.x.dims()) out << ' ' << d;
  out << "\ndual";
  for (int d : z.u.dims()) out << ' ' << d;
  out << "\n";
  for (int i = 0; i < z.x.block_count(); ++i) {
    out << "x " << i;
    for (Eigen::Index t = 0; t < z.x[i].size(); ++t)
      out << ' ' << detail::fmt_double(z.x[i][t]);
    out << "\n";
  }
  for (int i = 0; i < z.u.block_count(); ++i) {
    out << "u " << i;
    for (Eigen::Index t = 0; t < z.u[i].size(); ++t)
      out << ' ' << detail::fmt_double(z.u[i][t]);
    out << "\n";
  }
}

inline void write_point(const PrimalDualPoint& z, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open point file for writing: " + path);
  write_point(z, out);
}

inline PrimalDualPoint read_point(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "pdsplit-point v1")
    throw ConfigError("point file: bad magic line");
  int m = 0;
  {
    std::getline(in, line);
    std::istringstream row(line);
    std::string tag;
    if (!(row >> tag >> m) || tag != "m" || m < 1)
      throw ConfigError("point file: bad agent count");
  }
  auto read_dims = [&](const std::string& expect) {
    std::getline(in, line);
    std::istringstream row(line);
    std::string tag;
    row >> tag;
    if (tag != expect) throw ConfigError("point file: expected " + expect);
    std::vector<int> dims;
    int d;
    while (row >> d) dims.push_back(d);
    if (static_cast<int>(dims.size()) != m)
      throw ConfigError("point file: dim count mismatch");
    return dims;
  };
  std::vector<int> pd = read_dims("primal");
  std::vector<int> dd = read_dims("dual");
  PrimalDualPoint z;
  z.x = BlockVector::zeros(pd);
  z.u = BlockVector::zeros(dd);
  for (int n = 0; n < 2 * m; ++n) {
    if (!std::getline(in, line))
      throw ConfigError("point file: truncated");
    std::istringstream row(line);
    std::string side;
    int i;
    row >> side >> i;
    if ((side != "x" && side != "u") || i < 0 || i >= m)
      throw ConfigError("point file: bad block line");
    Eigen::VectorXd& blk = side == "x" ? z.x[i] : z.u[i];
    for (Eigen::Index t = 0; t < blk.size(); ++t)
      if (!(row >> blk[t]))
        throw ConfigError("point file: short block " + side + " " +
                          std::to_string(i));
  }
  return z;
}

inline PrimalDualPoint read_point(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open point file: " + path);
  return read_point(in);
}

}  // namespace pdsplit
