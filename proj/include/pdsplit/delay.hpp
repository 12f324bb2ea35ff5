#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "pdsplit/block.hpp"
#include "pdsplit/errors.hpp"
#include "pdsplit/problem.hpp"
#include "pdsplit/rng.hpp"

namespace pdsplit {

enum class Side { primal, dual };

enum class ScheduleKind { none, fixed, uniform_random, adversarial_max, custom };

// Deterministic delay schedule satisfying the bounded-delay contract:
// every value agent i reads from agent j at iteration k has age in
// [0, B], and an agent reads its own block with age 0. The age of a
// read is a pure function of (i, j, k, side), so primal and dual reads
// from the same sender may carry different delays.
class DelaySchedule {
 public:
  static DelaySchedule none() { return DelaySchedule(ScheduleKind::none, 0); }

  static DelaySchedule fixed(int age, int B) {
    if (B < 0) throw ConfigError("DelaySchedule: B must be >= 0");
    if (age < 0 || age > B)
      throw ConfigError("DelaySchedule: fixed age must lie in [0, B]");
    DelaySchedule s(ScheduleKind::fixed, B);
    s.fixed_age_ = age;
    return s;
  }

  static DelaySchedule uniform_random(int B, std::uint64_t seed) {
    if (B < 0) throw ConfigError("DelaySchedule: B must be >= 0");
    DelaySchedule s(ScheduleKind::uniform_random, B);
    s.seed_ = seed;
    return s;
  }

  static DelaySchedule adversarial_max(int B) {
    if (B < 0) throw ConfigError("DelaySchedule: B must be >= 0");
    return DelaySchedule(ScheduleKind::adversarial_max, B);
  }

  static DelaySchedule custom(
      std::unordered_map<std::uint64_t, int> table, int B) {
    if (B < 0) throw ConfigError("DelaySchedule: B must be >= 0");
    DelaySchedule s(ScheduleKind::custom, B);
    s.table_ = std::move(table);
    for (const auto& [key, age] : s.table_) {
      if (age < 0 || age > B)
        throw ProtocolError("DelaySchedule: custom age " +
                            std::to_string(age) + " outside [0, " +
                            std::to_string(B) + "]");
    }
    return s;
  }

  // Text format: one "k i j side age" row per line, side is p or d.
  // Entries not listed default to age 0. Rows with i == j must have
  // age 0.
  static DelaySchedule load(std::istream& in, int B) {
    std::unordered_map<std::uint64_t, int> table;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      std::istringstream row(line);
      long k;
      int i, j, age;
      std::string side;
      if (!(row >> k)) continue;  // blank line
      if (!(row >> i >> j >> side >> age))
        throw ConfigError("schedule file line " + std::to_string(lineno) +
                          ": expected 'k i j side age'");
      if (side != "p" && side != "d")
        throw ConfigError("schedule file line " + std::to_string(lineno) +
                          ": side must be p or d");
      if (k < 0 || i < 0 || j < 0)
        throw ConfigError("schedule file line " + std::to_string(lineno) +
                          ": negative index");
      if (i == j && age != 0)
        throw ProtocolError("schedule file line " + std::to_string(lineno) +
                            ": self delay must be 0");
      table[custom_key(i, j, k, side == "p" ? Side::primal : Side::dual)] = age;
    }
    return custom(std::move(table), B);
  }

  ScheduleKind kind() const { return kind_; }
  int bound() const { return B_; }
  bool monotone() const { return monotone_; }

  // Clamps the age transformation so that tau_j^i(k) is nondecreasing
  // in k (a receiver never regresses to an older value). The raw
  // schedules permit regressions, which the bounded-delay contract
  // allows.
  DelaySchedule with_monotone(bool on) const {
    DelaySchedule s = *this;
    s.monotone_ = on;
    return s;
  }

  // Latest iteration index whose value of block j agent i uses at
  // iteration k on the given side.
  long tau(int i, int j, long k, Side side) const {
    if (k < 0) throw StructuralError("DelaySchedule: negative iteration");
    if (i == j) return k;
    if (!monotone_) return raw_tau(i, j, k, side);
    // tau_raw(k') <= k' and tau_raw(k) >= k - B, so the running max over
    // all k' <= k equals the max over the last B+1 indices.
    long best = 0;
    for (long kk = std::max<long>(0, k - B_); kk <= k; ++kk)
      best = std::max(best, raw_tau(i, j, kk, side));
    return best;
  }

  int age(int i, int j, long k, Side side) const {
    return static_cast<int>(k - tau(i, j, k, side));
  }

 private:
  DelaySchedule(ScheduleKind kind, int B) : kind_(kind), B_(B) {}

  static std::uint64_t custom_key(int i, int j, long k, Side side) {
    // 20 bits per agent index, side bit, remaining bits of k.
    return (static_cast<std::uint64_t>(i) << 44) |
           (static_cast<std::uint64_t>(j) << 24) |
           (static_cast<std::uint64_t>(side == Side::dual) << 23) |
           (static_cast<std::uint64_t>(k) & 0x7fffff);
  }

  long raw_tau(int i, int j, long k, Side side) const {
    int a = 0;
    switch (kind_) {
      case ScheduleKind::none:
        a = 0;
        break;
      case ScheduleKind::fixed:
        a = fixed_age_;
        break;
      case ScheduleKind::uniform_random:
        a = uniform_int_draw(B_ + 1, seed_, static_cast<std::uint64_t>(i),
                             static_cast<std::uint64_t>(j),
                             static_cast<std::uint64_t>(k),
                             side == Side::dual ? 1u : 0u);
        break;
      case ScheduleKind::adversarial_max:
        a = B_;
        break;
      case ScheduleKind::custom: {
        auto it = table_.find(custom_key(i, j, k, side));
        a = it == table_.end() ? 0 : it->second;
        break;
      }
    }
    return std::max<long>(k - a, 0);
  }

  ScheduleKind kind_;
  int B_;
  int fixed_age_ = 0;
  std::uint64_t seed_ = 0;
  bool monotone_ = false;
  std::unordered_map<std::uint64_t, int> table_;
};

inline DelaySchedule make_schedule(ScheduleKind kind, int B,
                                   std::uint64_t seed = 0, int fixed_age = -1) {
  switch (kind) {
    case ScheduleKind::none:
      return DelaySchedule::none();
    case ScheduleKind::fixed:
      return DelaySchedule::fixed(fixed_age < 0 ? B : fixed_age, B);
    case ScheduleKind::uniform_random:
      return DelaySchedule::uniform_random(B, seed);
    case ScheduleKind::adversarial_max:
      return DelaySchedule::adversarial_max(B);
    case ScheduleKind::custom:
      throw ConfigError("make_schedule: custom schedules are built from a table");
  }
  throw ConfigError("make_schedule: unknown kind");
}

// Rolling window of the last B+1 iterates. Retrieval clamps to the
// initial iterate for ages that reach past the start of the run.
class HistoryBuffer {
 public:
  HistoryBuffer(int B, const BlockDims& dims)
      : B_(B), dims_(dims), ring_(static_cast<std::size_t>(B) + 1) {
    if (B < 0) throw ConfigError("HistoryBuffer: B must be >= 0");
  }

  int bound() const { return B_; }
  long current_iteration() const { return k_; }

  // Call exactly once per iteration, in order, starting with z^0.
  void record(const PrimalDualPoint& z) {
    if (z.x.block_count() != dims_.agents() ||
        z.u.block_count() != dims_.agents())
      throw StructuralError("HistoryBuffer: block count mismatch");
    ++k_;
    ring_[static_cast<std::size_t>(k_ % (B_ + 1))] = z;
  }

  const PrimalDualPoint& at(long iter) const {
    if (k_ < 0) throw StructuralError("HistoryBuffer: empty");
    if (iter < 0 || iter > k_)
      throw StructuralError("HistoryBuffer: iterate " + std::to_string(iter) +
                            " not recorded");
    if (iter < k_ - B_)
      throw StructuralError("HistoryBuffer: iterate " + std::to_string(iter) +
                            " evicted");
    return ring_[static_cast<std::size_t>(iter % (B_ + 1))];
  }

  const PrimalDualPoint& current() const { return at(k_); }

 private:
  int B_;
  BlockDims dims_;
  long k_ = -1;
  std::vector<PrimalDualPoint> ring_;
};

// Agent i's local copy of the iterate, assembled from values of bounded
// age. Blocks the agent is not entitled to are zero-filled and flagged;
// reading one is a protocol error, which surfaces dependency bugs.
struct LocalView {
  int agent = 0;
  long k = 0;
  BlockVector x;
  BlockVector u;
  std::vector<bool> x_populated;
  std::vector<bool> u_populated;

  const Eigen::VectorXd& x_block(int j) const {
    if (j < 0 || j >= x.block_count())
      throw StructuralError("LocalView: block index out of range");
    if (!x_populated[static_cast<std::size_t>(j)])
      throw ProtocolError("LocalView: agent " + std::to_string(agent) +
                          " read unpopulated primal block " +
                          std::to_string(j) + " at iteration " +
                          std::to_string(k));
    return x[j];
  }

  const Eigen::VectorXd& u_block(int j) const {
    if (j < 0 || j >= u.block_count())
      throw StructuralError("LocalView: block index out of range");
    if (!u_populated[static_cast<std::size_t>(j)])
      throw ProtocolError("LocalView: agent " + std::to_string(agent) +
                          " read unpopulated dual block " + std::to_string(j) +
                          " at iteration " + std::to_string(k));
    return u[j];
  }
};

namespace detail {

inline void check_delay_contract(const DelaySchedule& schedule, int i, int j,
                              long k, long tau) {
  long age = k - tau;
  if (tau < 0 || age < 0 || age > schedule.bound())
    throw ProtocolError("delay bound violated for receiver " +
                        std::to_string(i) + ", sender " + std::to_string(j) +
                        " at iteration " + std::to_string(k));
  if (i == j && tau != k)
    throw ProtocolError("self-delay must be zero for agent " +
                        std::to_string(i) + " at iteration " +
                        std::to_string(k));
}

}  // namespace detail

// Assembles x^k[i] and u^k[i]. The primal side is populated for
// N_i^in and M_i^d (senders whose x feeds nabla_i f and L_{i.}),
// the dual side for M_i^p, and the agent's own blocks are taken from
// iterate k itself.
inline LocalView local_view(const HistoryBuffer& buf,
                            const DelaySchedule& schedule,
                            const CouplingSets& coupling, int i, long k) {
  if (k != buf.current_iteration())
    throw StructuralError("local_view: iterate not recorded");
  const PrimalDualPoint& now = buf.current();
  const int m = now.x.block_count();
  if (i < 0 || i >= m) throw StructuralError("local_view: bad agent index");

  LocalView view;
  view.agent = i;
  view.k = k;
  view.x = BlockVector::zeros(now.x.dims());
  view.u = BlockVector::zeros(now.u.dims());
  view.x_populated.assign(static_cast<std::size_t>(m), false);
  view.u_populated.assign(static_cast<std::size_t>(m), false);

  auto fill = [&](int j, Side side) {
    long tau = schedule.tau(i, j, k, side);
    detail::check_delay_contract(schedule, i, j, k, tau);
    if (side == Side::primal) {
      view.x[j] = buf.at(tau).x[j];
      view.x_populated[static_cast<std::size_t>(j)] = true;
    } else {
      view.u[j] = buf.at(tau).u[j];
      view.u_populated[static_cast<std::size_t>(j)] = true;
    }
  };

  fill(i, Side::primal);
  fill(i, Side::dual);
  for (int j : coupling.n_in[static_cast<std::size_t>(i)]) fill(j, Side::primal);
  for (int j : coupling.m_d[static_cast<std::size_t>(i)])
    if (!view.x_populated[static_cast<std::size_t>(j)]) fill(j, Side::primal);
  for (int j : coupling.m_p[static_cast<std::size_t>(i)]) fill(j, Side::dual);
  return view;
}

inline LocalView local_view_full(const HistoryBuffer& buf,
                                 const DelaySchedule& schedule, int i, long k) {
  const int m = buf.current().x.block_count();
  return local_view(buf, schedule, full_coupling(m), i, k);
}

}  // namespace pdsplit
