#include "dalvq/schedule.hpp"

#include "dalvq/errors.hpp"
#include "dalvq/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dalvq {

namespace {
constexpr double kTol = 1e-12;
} // namespace

std::string to_string(Topology t) {
  switch (t) {
  case Topology::Complete: return "complete";
  case Topology::Ring: return "ring";
  case Topology::RandomSymmetricGossip: return "random-symmetric-gossip";
  case Topology::CustomTrace: return "custom-trace";
  }
  return "?";
}

std::string to_string(DelayLaw d) {
  switch (d) {
  case DelayLaw::Zero: return "zero";
  case DelayLaw::Fixed: return "fixed";
  case DelayLaw::Uniform: return "uniform";
  }
  return "?";
}

std::string to_string(ActivityLaw a) {
  switch (a) {
  case ActivityLaw::AllActive: return "all-active";
  case ActivityLaw::RoundRobin: return "round-robin";
  case ActivityLaw::RandomSubset: return "random-subset";
  case ActivityLaw::None: return "none";
  }
  return "?";
}

Topology topology_from_string(const std::string& s) {
  for (auto t : {Topology::Complete, Topology::Ring, Topology::RandomSymmetricGossip, Topology::CustomTrace}) {
    if (to_string(t) == s) return t;
  }
  throw ConfigError("unknown topology '" + s + "'");
}

DelayLaw delay_law_from_string(const std::string& s) {
  for (auto d : {DelayLaw::Zero, DelayLaw::Fixed, DelayLaw::Uniform}) {
    if (to_string(d) == s) return d;
  }
  throw ConfigError("unknown delay law '" + s + "'");
}

ActivityLaw activity_law_from_string(const std::string& s) {
  for (auto a : {ActivityLaw::AllActive, ActivityLaw::RoundRobin, ActivityLaw::RandomSubset, ActivityLaw::None}) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("unknown activity law '" + s + "'");
}

CommSchedule::CommSchedule(std::size_t processors, std::size_t horizon)
    : m_(processors), t_(horizon), coeff_(horizon * processors * processors, 0.0),
      delay_(horizon * processors * processors, 0), active_(horizon * processors, 0) {
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t i = 0; i < processors; ++i) coeff_[index(t, i, i)] = 1.0;
  }
}

std::vector<std::size_t> CommSchedule::active_set(std::size_t t) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m_; ++i) {
    if (active(t, i)) out.push_back(i);
  }
  return out;
}

bool CommSchedule::identity_row(std::size_t t, std::size_t i) const {
  for (std::size_t j = 0; j < m_; ++j) {
    if (coeff(t, i, j) != (i == j ? 1.0 : 0.0) || delay(t, i, j) != 0) return false;
  }
  return true;
}

std::size_t CommSchedule::max_delay() const {
  return delay_.empty() ? 0 : *std::max_element(delay_.begin(), delay_.end());
}

CommSchedule CommSchedule::prefix(std::size_t horizon) const {
  if (horizon > t_) throw UsageError("prefix longer than the schedule");
  CommSchedule out(m_, horizon);
  const std::size_t n = horizon * m_ * m_;
  std::copy_n(coeff_.begin(), n, out.coeff_.begin());
  std::copy_n(delay_.begin(), n, out.delay_.begin());
  std::copy_n(active_.begin(), horizon * m_, out.active_.begin());
  out.constants = constants;
  out.separate_merge_descent = separate_merge_descent;
  return out;
}

void check_schedule_spec(const ScheduleSpec& spec, std::size_t m, std::size_t horizon) {
  if (m == 0) throw ConfigError("schedule: M must be at least 1");
  if (horizon == 0) throw ConfigError("schedule: horizon must be at least 1");
  if (spec.topology == Topology::CustomTrace) {
    if (spec.trace_path.empty()) throw ConfigError("schedule: custom-trace topology needs trace_path");
    return;
  }
  if (spec.period == 0) throw ConfigError("schedule: period must be at least 1");
  if (spec.b1 == 0) throw ConfigError("schedule: b1 must be at least 1");
  if ((spec.topology == Topology::Ring || spec.topology == Topology::RandomSymmetricGossip) && m == 1) {
    throw ConfigError("schedule: " + to_string(spec.topology) + " needs M >= 2");
  }
  if (m > 1 && spec.period > horizon) {
    throw ConfigError("schedule: period " + std::to_string(spec.period) + " exceeds the horizon; processors never merge");
  }
  if (spec.delay_law == DelayLaw::Fixed && spec.fixed_delay >= spec.b1) {
    throw ConfigError("schedule: fixed delay " + std::to_string(spec.fixed_delay) + " must be below b1 = " +
                      std::to_string(spec.b1));
  }
  if (spec.activity == ActivityLaw::AllActive && spec.separate_merge_descent && m > 1) {
    throw ConfigError("schedule: all-active with separated merge/descent leaves no tick to merge");
  }
  if (spec.activity == ActivityLaw::RandomSubset &&
      !(spec.activity_probability > 0.0 && spec.activity_probability <= 1.0)) {
    throw ConfigError("schedule: activity_probability must lie in (0, 1]");
  }
  const double smallest_weight = spec.topology == Topology::Complete ? 1.0 / static_cast<double>(m) : 0.5;
  if (spec.declared.alpha && (*spec.declared.alpha <= 0.0 || *spec.declared.alpha > smallest_weight + kTol)) {
    throw ConfigError("schedule: declared alpha must lie in (0, " + std::to_string(smallest_weight) +
                      "] for the uniform weights of " + to_string(spec.topology));
  }
}

namespace {

std::uint32_t draw_delay(const ScheduleSpec& spec, DrawUniforms& u, std::size_t t) {
  std::size_t d = 0;
  switch (spec.delay_law) {
  case DelayLaw::Zero: d = 0; break;
  case DelayLaw::Fixed: d = spec.fixed_delay; break;
  case DelayLaw::Uniform:
    d = std::min(static_cast<std::size_t>(u.next() * static_cast<double>(spec.b1)), spec.b1 - 1);
    break;
  }
  return static_cast<std::uint32_t>(std::min(d, t));
}

void fill_tick(const ScheduleSpec& spec, std::size_t m, std::size_t t, CommSchedule& s) {
  // Every random decision of tick t comes from its own Philox counter: prefix-stable.
  DrawUniforms u(StreamHandle{spec.seed, kScheduleStream, t});

  switch (spec.activity) {
  case ActivityLaw::AllActive:
    for (std::size_t i = 0; i < m; ++i) s.set_active(t, i, true);
    break;
  case ActivityLaw::RoundRobin: s.set_active(t, t % m, true); break;
  case ActivityLaw::RandomSubset: {
    bool any = false;
    for (std::size_t i = 0; i < m; ++i) {
      const bool on = u.next() < spec.activity_probability;
      s.set_active(t, i, on);
      any = any || on;
    }
    if (!any) s.set_active(t, std::min(static_cast<std::size_t>(u.next() * static_cast<double>(m)), m - 1), true);
    break;
  }
  case ActivityLaw::None: break;
  }

  if (t % spec.period != 0) return;

  auto merging = [&](std::size_t i) { return !(spec.separate_merge_descent && s.active(t, i)); };

  // Gossip: one symmetric pair among the processors allowed to merge.
  std::size_t pa = m, pb = m;
  if (spec.topology == Topology::RandomSymmetricGossip) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < m; ++i) {
      if (merging(i)) eligible.push_back(i);
    }
    if (eligible.size() >= 2) {
      const std::size_t n = eligible.size();
      const std::size_t a = std::min(static_cast<std::size_t>(u.next() * static_cast<double>(n)), n - 1);
      std::size_t b = std::min(static_cast<std::size_t>(u.next() * static_cast<double>(n - 1)), n - 2);
      if (b >= a) ++b;
      pa = eligible[a];
      pb = eligible[b];
    }
  }

  std::vector<std::size_t> nbrs;
  for (std::size_t i = 0; i < m; ++i) {
    if (!merging(i)) continue;
    nbrs.clear();
    switch (spec.topology) {
    case Topology::Complete:
      for (std::size_t j = 0; j < m; ++j) nbrs.push_back(j);
      break;
    case Topology::Ring:
      nbrs = {i, (i + m - 1) % m};
      break;
    case Topology::RandomSymmetricGossip:
      if (i == pa || i == pb) nbrs = {pa, pb};
      break;
    case Topology::CustomTrace: break;
    }
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    if (nbrs.size() <= 1) continue;
    const double w = 1.0 / static_cast<double>(nbrs.size());
    s.set_coeff(t, i, i, 0.0);
    for (std::size_t j : nbrs) {
      s.set_coeff(t, i, j, w);
      if (j != i) s.set_delay(t, i, j, draw_delay(spec, u, t));
    }
  }
}

} // namespace

CommSchedule generate(const ScheduleSpec& spec, std::size_t processors, std::size_t horizon) {
  check_schedule_spec(spec, processors, horizon);

  CommSchedule s;
  if (spec.topology == Topology::CustomTrace) {
    CommSchedule full = read_trace_jsonl_file(spec.trace_path);
    if (full.processors() != processors) {
      throw ConfigError("custom trace has " + std::to_string(full.processors()) + " processors, config has " +
                        std::to_string(processors));
    }
    if (full.horizon() < horizon) {
      throw ConfigError("custom trace covers " + std::to_string(full.horizon()) + " ticks, horizon is " +
                        std::to_string(horizon));
    }
    s = full.prefix(horizon);
  } else {
    s = CommSchedule(processors, horizon);
    for (std::size_t t = 0; t < horizon; ++t) fill_tick(spec, processors, t, s);
  }
  s.separate_merge_descent = spec.separate_merge_descent;

  const AssumptionConstants measured = measure_constants(s);
  if (spec.topology == Topology::CustomTrace) {
    s.constants.alpha = measured.alpha;
    s.constants.b1 = measured.b1;
  } else {
    s.constants.alpha = 1.0 / static_cast<double>(processors);
    s.constants.b1 = spec.delay_law == DelayLaw::Zero ? 1 : spec.b1;
  }
  if (spec.declared.alpha) s.constants.alpha = *spec.declared.alpha;
  s.constants.b2 = spec.declared.b2.value_or(measured.b2);
  s.constants.b3 = spec.declared.b3.value_or(measured.b3);
  return s;
}

namespace {

using PairCounts = std::vector<std::size_t>;  // index i * M + j counts edges j -> i

bool strongly_connected(const PairCounts& counts, std::size_t m) {
  if (m <= 1) return true;
  auto reach = [&](bool forward) {
    std::vector<char> seen(m, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t n = 1;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w = 0; w < m; ++w) {
        if (seen[w]) continue;
        // forward: edge v -> w means a^{w,v} > 0
        const std::size_t c = forward ? counts[w * m + v] : counts[v * m + w];
        if (c > 0) {
          seen[w] = 1;
          ++n;
          stack.push_back(w);
        }
      }
    }
    return n == m;
  };
  return reach(true) && reach(false);
}

void add_tick(const CommSchedule& s, std::size_t t, PairCounts& counts, long sign) {
  const std::size_t m = s.processors();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j && s.coeff(t, i, j) > 0.0) counts[i * m + j] += static_cast<std::size_t>(sign);
    }
  }
}

// First window start whose edge union is not strongly connected, if any.
std::optional<std::size_t> first_disconnected_window(const CommSchedule& s, std::size_t window) {
  const std::size_t m = s.processors();
  const std::size_t horizon = s.horizon();
  const std::size_t w = std::min(window, horizon);
  PairCounts counts(m * m, 0);
  for (std::size_t t = 0; t < w; ++t) add_tick(s, t, counts, 1);
  const std::size_t last_start = horizon - w;
  for (std::size_t start = 0;; ++start) {
    if (!strongly_connected(counts, m)) return start;
    if (start == last_start) break;
    add_tick(s, start, counts, -1);
    add_tick(s, start + w, counts, 1);
  }
  return std::nullopt;
}

// occurrences[i * M + j]: ticks with a^{i,j}(t) > 0, i != j.
std::vector<std::vector<std::size_t>> edge_occurrences(const CommSchedule& s) {
  const std::size_t m = s.processors();
  std::vector<std::vector<std::size_t>> occ(m * m);
  for (std::size_t t = 0; t < s.horizon(); ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i != j && s.coeff(t, i, j) > 0.0) occ[i * m + j].push_back(t);
      }
    }
  }
  return occ;
}

// Smallest B2 with: first occurrence <= B2 - 1, gaps <= B2, last occurrence >= T - B2,
// over pairs seen at least twice.
std::size_t interval_requirement(const std::vector<std::size_t>& ticks, std::size_t horizon) {
  std::size_t need = ticks.front() + 1;
  for (std::size_t k = 1; k < ticks.size(); ++k) need = std::max(need, ticks[k] - ticks[k - 1]);
  need = std::max(need, horizon - ticks.back());
  return need;
}

// Distance from t to the nearest entry of sorted `ticks`, or nullopt when empty.
std::optional<std::size_t> nearest_distance(const std::vector<std::size_t>& ticks, std::size_t t) {
  if (ticks.empty()) return std::nullopt;
  auto it = std::lower_bound(ticks.begin(), ticks.end(), t);
  std::size_t best = std::numeric_limits<std::size_t>::max();
  if (it != ticks.end()) best = *it - t;
  if (it != ticks.begin()) best = std::min(best, t - *std::prev(it));
  return best;
}

} // namespace

AssumptionConstants measure_constants(const CommSchedule& s) {
  AssumptionConstants c;
  const std::size_t m = s.processors();
  const std::size_t horizon = s.horizon();

  double alpha = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      for (double a : s.coeff_row(t, i)) {
        if (a > 0.0) alpha = std::min(alpha, a);
      }
    }
  }
  c.alpha = alpha;
  c.b1 = s.max_delay() + 1;

  const auto occ = edge_occurrences(s);
  std::size_t b2 = 1;
  for (const auto& ticks : occ) {
    if (ticks.size() >= 2) b2 = std::max(b2, interval_requirement(ticks, horizon));
  }
  // Windowed connectivity is monotone in the window length: bisect.
  if (horizon > 0 && first_disconnected_window(s, b2)) {
    std::size_t lo = b2, hi = horizon;
    if (first_disconnected_window(s, hi)) {
      b2 = horizon;
    } else {
      while (lo + 1 < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (first_disconnected_window(s, mid)) lo = mid;
        else hi = mid;
      }
      b2 = hi;
    }
  }
  c.b2 = b2;

  std::size_t b3 = 1;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      for (std::size_t t : occ[i * m + j]) {
        const auto d = nearest_distance(occ[j * m + i], t);
        b3 = d ? std::max(b3, *d + 1) : std::max(b3, horizon + 1);
      }
    }
  }
  c.b3 = b3;
  return c;
}

std::vector<Edge> communication_graph(const CommSchedule& s, std::size_t t) {
  if (t >= s.horizon()) {
    throw UsageError("communication_graph: tick " + std::to_string(t) + " outside horizon " +
                     std::to_string(s.horizon()));
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < s.processors(); ++i) {
    for (std::size_t j = 0; j < s.processors(); ++j) {
      if (s.coeff(t, i, j) > 0.0) edges.push_back({j, i});
    }
  }
  return edges;
}

std::vector<const AssumptionCheck*> ValidationReport::checks() const {
  return {&bounded_delays, &convex_threshold, &connectivity, &bounded_intervals, &symmetry, &some_active, &separation};
}

namespace {

void fail(AssumptionCheck& c, std::size_t t, std::string detail) {
  if (!c.holds) return;
  c.holds = false;
  c.witness_tick = t;
  c.detail = std::move(detail);
}

std::string at(std::size_t i, std::size_t j) {
  return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

} // namespace

ValidationReport validate(const CommSchedule& s) {
  ValidationReport r;
  r.constants = s.constants;
  const auto& c = s.constants;
  const std::size_t m = s.processors();
  const std::size_t horizon = s.horizon();

  for (std::size_t t = 0; t < horizon; ++t) {
    bool any_active = false;
    for (std::size_t i = 0; i < m; ++i) {
      any_active = any_active || s.active(t, i);
      double sum = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double a = s.coeff(t, i, j);
        const std::uint32_t d = s.delay(t, i, j);
        if (i == j && d != 0) fail(r.bounded_delays, t, "self delay at " + at(i, j) + " is " + std::to_string(d));
        if (a == 0.0 && d != 0) fail(r.bounded_delays, t, "nonzero delay on zero coefficient at " + at(i, j));
        if (d >= c.b1) fail(r.bounded_delays, t, "delay " + std::to_string(d) + " at " + at(i, j) + " not below B1");
        if (d > t) fail(r.bounded_delays, t, "delay reaches before tick 0 at " + at(i, j));
        if (!(a >= 0.0) || a > 1.0 + kTol) fail(r.convex_threshold, t, "coefficient out of [0,1] at " + at(i, j));
        if (a > 0.0 && a < c.alpha - kTol) fail(r.convex_threshold, t, "coefficient below alpha at " + at(i, j));
        if (i == j && a < c.alpha - kTol) fail(r.convex_threshold, t, "self weight below alpha at " + at(i, j));
        sum += a;
      }
      if (std::abs(sum - 1.0) > kTol) {
        fail(r.convex_threshold, t, "row " + std::to_string(i) + " sums to " + std::to_string(sum));
      }
      if (s.separate_merge_descent && s.active(t, i) && !s.identity_row(t, i)) {
        fail(r.separation, t, "active processor " + std::to_string(i) + " merges");
      }
    }
    if (!any_active) fail(r.some_active, t, "no active processor");
  }

  if (horizon > 0) {
    const std::size_t window = std::min(c.b2, horizon);
    if (auto bad = first_disconnected_window(s, window)) {
      fail(r.connectivity, *bad, "edge union over window of " + std::to_string(window) + " ticks not strongly connected");
    }
  }

  const auto occ = edge_occurrences(s);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const auto& ticks = occ[i * m + j];
      if (ticks.empty()) r.never_communicating.push_back({j, i});
      if (ticks.size() == 1) r.communicating_once.push_back({j, i});
      if (ticks.size() >= 2) {
        if (ticks.front() > c.b2 - 1) fail(r.bounded_intervals, ticks.front(), "first edge " + at(j, i) + " too late");
        for (std::size_t k = 1; k < ticks.size(); ++k) {
          if (ticks[k] - ticks[k - 1] > c.b2) fail(r.bounded_intervals, ticks[k], "gap on edge " + at(j, i) + " exceeds B2");
        }
        if (ticks.back() + c.b2 < horizon) fail(r.bounded_intervals, ticks.back(), "edge " + at(j, i) + " stops early");
      }
      for (std::size_t t : ticks) {
        const auto d = nearest_distance(occ[j * m + i], t);
        if (!d || *d >= c.b3) fail(r.symmetry, t, "edge " + at(j, i) + " not reciprocated within B3");
      }
    }
  }
  return r;
}

} // namespace dalvq
