#include "dalvq/config.hpp"

#include "dalvq/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace dalvq {

using nlohmann::json;

std::string to_string(RunMode m) {
  switch (m) {
  case RunMode::Dalvq: return "dalvq";
  case RunMode::ClvqBaseline: return "clvq-baseline";
  case RunMode::LloydBaseline: return "lloyd-baseline";
  case RunMode::AgreementOnly: return "agreement-only";
  case RunMode::ValidateOnly: return "validate-only";
  }
  return "?";
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "dalvq") return RunMode::Dalvq;
  if (s == "clvq-baseline") return RunMode::ClvqBaseline;
  if (s == "lloyd-baseline") return RunMode::LloydBaseline;
  if (s == "agreement-only") return RunMode::AgreementOnly;
  if (s == "validate-only") return RunMode::ValidateOnly;
  throw ConfigError("unknown mode '" + s + "'");
}

namespace {

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seeds are read as size_t");

// One JSON object being read: remembers which keys were consumed so leftovers can be
// reported with their full path.
class Section {
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void read(const std::string& key, std::size_t& out) {
    if (auto v = raw(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(child(key) + ": expected a nonnegative integer");
      out = v->get<std::size_t>();
    }
  }
  void read(const std::string& key, double& out) {
    if (auto v = raw(key)) {
      if (!v->is_number()) throw ConfigError(child(key) + ": expected a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& key, bool& out) {
    if (auto v = raw(key)) {
      if (!v->is_boolean()) throw ConfigError(child(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (auto v = raw(key)) {
      if (!v->is_string()) throw ConfigError(child(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }
  template <class T>
  void read(const std::string& key, std::optional<T>& out) {
    if (auto v = raw(key); v && !v->is_null()) {
      T value{};
      read(key, value);
      out = value;
    }
  }
  template <class Enum>
  void read_enum(const std::string& key, Enum& out, Enum (*from)(const std::string&)) {
    std::string s;
    if (!has(key)) return;
    read(key, s);
    try {
      out = from(s);
    } catch (const ConfigError& e) {
      throw ConfigError(child(key) + ": " + e.what());
    }
  }
  void read(const std::string& key, std::vector<double>& out) {
    if (auto v = raw(key)) out = numbers(*v, child(key));
  }

  static std::vector<double> numbers(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(path + ": expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  // Throws on the first key nobody asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + child(it.key()) + "'");
    }
  }

private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

DistributionSpec parse_distribution(const json& j, const std::string& path, std::size_t dim) {
  Section s(j, path);
  DistributionSpec d;
  d.dim = dim;
  s.read_enum("kind", d.kind, distribution_kind_from_string);
  if (d.kind != DistributionKind::UniformDiskUnion) {
    d.lower.assign(dim, 0.0);
    d.upper.assign(dim, 1.0);
  }
  s.read("lower", d.lower);
  s.read("upper", d.upper);
  if (auto comps = s.raw("components")) {
    if (!comps->is_array()) throw ConfigError(s.child("components") + ": expected an array");
    for (std::size_t k = 0; k < comps->size(); ++k) {
      Section c((*comps)[k], s.child("components") + "[" + std::to_string(k) + "]");
      GaussianComponent g;
      c.read("weight", g.weight);
      c.read("mean", g.mean);
      if (auto cov = c.raw("covariance")) {
        if (!cov->is_array()) throw ConfigError(c.child("covariance") + ": expected an array of rows");
        for (const auto& row : *cov) g.covariance.push_back(Section::numbers(row, c.child("covariance")));
      }
      c.finish();
      d.components.push_back(std::move(g));
    }
  }
  if (auto disks = s.raw("disks")) {
    if (!disks->is_array()) throw ConfigError(s.child("disks") + ": expected an array");
    for (std::size_t k = 0; k < disks->size(); ++k) {
      Section c((*disks)[k], s.child("disks") + "[" + std::to_string(k) + "]");
      Disk disk;
      c.read("center", disk.center);
      c.read("radius", disk.radius);
      c.finish();
      d.disks.push_back(std::move(disk));
    }
  }
  s.finish();
  return d;
}

ScheduleSpec parse_schedule(const json& j, std::uint64_t run_seed) {
  Section s(j, "schedule");
  ScheduleSpec spec;
  spec.seed = run_seed;
  s.read_enum("topology", spec.topology, topology_from_string);
  s.read("period", spec.period);
  s.read_enum("delay_law", spec.delay_law, delay_law_from_string);
  s.read("fixed_delay", spec.fixed_delay);
  s.read("b1", spec.b1);
  s.read_enum("activity", spec.activity, activity_law_from_string);
  s.read("activity_probability", spec.activity_probability);
  s.read("seed", spec.seed);
  s.read("separate_merge_descent", spec.separate_merge_descent);
  s.read("trace_path", spec.trace_path);
  s.read("alpha", spec.declared.alpha);
  s.read("b2", spec.declared.b2);
  s.read("b3", spec.declared.b3);
  s.finish();
  return spec;
}

StepPolicy parse_steps(const json& j) {
  Section s(j, "steps");
  StepPolicy p;
  s.read_enum("mode", p.mode, step_mode_from_string);
  s.read("c", p.c);
  s.read("eps_max", p.eps_max);
  s.read("k1", p.k1);
  s.read("k2", p.k2);
  s.finish();
  return p;
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Section top(j, "");
  ExperimentConfig c;
  RunConfig& r = c.run;
  top.read_enum("mode", c.mode, run_mode_from_string);
  top.read("output_dir", c.output_dir);
  top.read("seed", r.seed);
  top.read("processors", r.processors);
  top.read("kappa", r.kappa);
  top.read("dim", r.dim);
  top.read("horizon", r.horizon);
  top.read("n_ref", r.n_ref);
  top.read("cadence", r.cadence);
  top.read_enum("sampling", r.sampling, sample_mode_from_string);
  top.read_enum("init", r.init, init_mode_from_string);

  r.distribution.dim = r.dim;
  r.distribution.lower.assign(r.dim, 0.0);
  r.distribution.upper.assign(r.dim, 1.0);
  if (auto v = top.raw("distribution")) r.distribution = parse_distribution(*v, "distribution", r.dim);

  r.schedule.seed = r.seed;
  if (auto v = top.raw("schedule")) r.schedule = parse_schedule(*v, r.seed);
  if (auto v = top.raw("steps")) r.steps = parse_steps(*v);

  if (auto v = top.raw("diagnostics")) {
    Section s(*v, "diagnostics");
    s.read("enabled", r.diagnostics);
    s.read("audit_schedule", c.audit_schedule);
    s.finish();
  }
  if (auto v = top.raw("lloyd")) {
    Section s(*v, "lloyd");
    s.read("max_iterations", c.lloyd_max_iterations);
    s.read("tolerance", c.lloyd_tolerance);
    s.finish();
  }
  top.finish();

  if (c.output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  if (c.lloyd_max_iterations == 0) throw ConfigError("lloyd.max_iterations must be at least 1");
  if (!(c.lloyd_tolerance >= 0.0)) throw ConfigError("lloyd.tolerance must be nonnegative");
  check_run_config(effective_run_config(c));
  return c;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

std::string emit_config(const ExperimentConfig& c) {
  const RunConfig& r = c.run;
  json dist = {{"kind", to_string(r.distribution.kind)}, {"lower", r.distribution.lower}, {"upper", r.distribution.upper}};
  json comps = json::array();
  for (const auto& g : r.distribution.components) {
    comps.push_back({{"weight", g.weight}, {"mean", g.mean}, {"covariance", g.covariance}});
  }
  json disks = json::array();
  for (const auto& d : r.distribution.disks) disks.push_back({{"center", d.center}, {"radius", d.radius}});
  dist["components"] = comps;
  dist["disks"] = disks;

  const ScheduleSpec& s = r.schedule;
  json sched = {{"topology", to_string(s.topology)},
                {"period", s.period},
                {"delay_law", to_string(s.delay_law)},
                {"fixed_delay", s.fixed_delay},
                {"b1", s.b1},
                {"activity", to_string(s.activity)},
                {"activity_probability", s.activity_probability},
                {"seed", s.seed},
                {"separate_merge_descent", s.separate_merge_descent},
                {"trace_path", s.trace_path},
                {"alpha", optional_json(s.declared.alpha)},
                {"b2", optional_json(s.declared.b2)},
                {"b3", optional_json(s.declared.b3)}};
  json steps = {{"mode", to_string(r.steps.mode)},
                {"c", r.steps.c},
                {"eps_max", r.steps.eps_max},
                {"k1", optional_json(r.steps.k1)},
                {"k2", optional_json(r.steps.k2)}};
  json j = {{"mode", to_string(c.mode)},
            {"output_dir", c.output_dir},
            {"seed", r.seed},
            {"processors", r.processors},
            {"kappa", r.kappa},
            {"dim", r.dim},
            {"horizon", r.horizon},
            {"n_ref", r.n_ref},
            {"cadence", r.cadence},
            {"sampling", to_string(r.sampling)},
            {"init", to_string(r.init)},
            {"distribution", dist},
            {"schedule", sched},
            {"steps", steps},
            {"diagnostics", {{"enabled", r.diagnostics}, {"audit_schedule", c.audit_schedule}}},
            {"lloyd", {{"max_iterations", c.lloyd_max_iterations}, {"tolerance", c.lloyd_tolerance}}}};
  return j.dump(2) + "\n";
}

RunConfig effective_run_config(const ExperimentConfig& c) {
  RunConfig r = c.run;
  switch (c.mode) {
  case RunMode::ClvqBaseline:
    r.processors = 1;
    r.schedule.topology = Topology::Complete;
    r.schedule.activity = ActivityLaw::AllActive;
    r.schedule.delay_law = DelayLaw::Zero;
    r.schedule.period = 1;
    r.schedule.declared = {};
    break;
  case RunMode::AgreementOnly:
    r.schedule.activity = ActivityLaw::None;
    r.init = InitMode::PerProcessor;
    break;
  default:
    break;
  }
  return r;
}

} // namespace dalvq
