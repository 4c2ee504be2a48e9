#include "dalvq/artifacts.hpp"

#include "dalvq/baselines.hpp"
#include "dalvq/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace dalvq {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_metrics_csv(const std::vector<MetricsRecord>& rows, std::ostream& out) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.t;
    for (double v : {r.consensus_gap, r.agreement_gap, r.bound_normmaj, r.distortion_star, r.grad_norm_star, r.eps_star,
                     r.min_sep_star, r.sum_eps_grad2, r.sum_dm1, r.dm2_partial_norm}) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
}

namespace {

json quantizer_json(const QuantizerVec& w) {
  json points = json::array();
  for (std::size_t l = 0; l < w.kappa(); ++l) {
    auto p = w.point(l);
    points.push_back(std::vector<double>(p.begin(), p.end()));
  }
  return points;
}

json validation_to_json(const ValidationReport& v, bool required_hold) {
  json checks = json::array();
  json failed = json::array();
  for (const AssumptionCheck* c : v.checks()) {
    checks.push_back({{"name", c->name},
                      {"holds", c->holds},
                      {"witness_tick", c->witness_tick ? json(*c->witness_tick) : json(nullptr)},
                      {"detail", c->detail}});
    if (!c->holds) failed.push_back(c->name);
  }
  auto edges = [](const std::vector<Edge>& es) {
    json out = json::array();
    for (const auto& e : es) out.push_back({e.from, e.to});
    return out;
  };
  return {{"required_hold", required_hold},
          {"asy1", v.asy1()},
          {"asy2", v.asy2()},
          {"consensus_assumptions", v.consensus_assumptions()},
          {"all_hold", v.all_hold()},
          {"constants", {{"alpha", v.constants.alpha}, {"b1", v.constants.b1}, {"b2", v.constants.b2}, {"b3", v.constants.b3}}},
          {"checks", checks},
          {"failed", failed},
          {"never_communicating", edges(v.never_communicating)},
          {"communicating_once", edges(v.communicating_once)}};
}

bool required_assumptions(RunMode mode, const ValidationReport& v) {
  switch (mode) {
  case RunMode::AgreementOnly: return v.consensus_assumptions();
  case RunMode::LloydBaseline: return true;
  default: return v.all_hold();
  }
}

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json convergence_json(const ConvergenceReport& r) {
  return {{"consensus_slope", r.consensus_slope},
          {"consensus_rate", r.consensus_rate},
          {"final_consensus_gap", r.final_consensus_gap},
          {"consensus_exact", r.consensus_exact},
          {"consensus_decreasing", r.consensus_decreasing()},
          {"normmaj_available", r.normmaj_available},
          {"normmaj_violations", r.normmaj_violations},
          {"normmaj_max_ratio", r.normmaj_max_ratio},
          {"normmaj_holds", r.normmaj_holds()},
          {"sum_eps_grad2_total", r.sum_eps_grad2_total},
          {"sum_eps_grad2_tail", r.sum_eps_grad2_tail},
          {"cauchy_ratio", r.cauchy_ratio},
          {"min_sep_min", r.min_sep_min},
          {"final_distortion", r.final_distortion},
          {"lloyd_distortion", opt(r.lloyd_distortion)},
          {"clvq_distortion", opt(r.clvq_distortion)},
          {"ratio_to_lloyd", opt(r.ratio_to_lloyd)},
          {"grad_norm_at_100", r.grad_norm_at_100},
          {"grad_norm_final", r.grad_norm_final},
          {"grad_ratio", r.grad_ratio},
          {"grad_norm_slope", r.grad_norm_slope},
          {"distortion_first_quarter", r.distortion_first_quarter},
          {"distortion_last_quarter", r.distortion_last_quarter},
          {"eps_star_available", r.eps_star_available},
          {"eps_star_lower", r.eps_star_lower},
          {"eps_star_upper", r.eps_star_upper},
          {"eps_star_scaled_min", r.eps_star_scaled_min},
          {"eps_star_scaled_max", r.eps_star_scaled_max},
          {"eps_star_within_bounds", r.eps_star_within_bounds()},
          {"eps_star_sum", r.eps_star_sum},
          {"eps_star_sum_floor", r.eps_star_sum_floor},
          {"eps_star_diverges", r.eps_star_diverges()},
          {"dm2_used", r.dm2_used},
          {"dm2_mean_norm", r.dm2_mean_norm},
          {"dm2_std", r.dm2_std},
          {"dm2_centered", r.dm2_centered()},
          {"dm2_envelope", r.dm2_envelope},
          {"dm2_max_partial_norm", r.dm2_max_partial_norm},
          {"dm2_sum_sq", r.dm2_sum_sq},
          {"dm2_sum_sq_bound", r.dm2_sum_sq_bound},
          {"dm2_bounded", r.dm2_bounded()},
          {"triangle_ok", r.triangle_ok}};
}

std::string data_label(const RunConfig& r) {
  return to_string(r.distribution.kind) + ":" + std::to_string(r.seed) + ":" + std::to_string(r.n_ref);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

template <class Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ostringstream s;
  fn(s);
  write_text(path, s.str());
}

json base_report(const ExperimentConfig& c) {
  return {{"version", DALVQ_VERSION}, {"mode", to_string(c.mode)}};
}

json summary_json(const ConvergenceReport& r, const RunConfig& rc, double wall) {
  return {{"data", data_label(rc)},
          {"final_distortion", r.final_distortion},
          {"final_consensus_gap", r.final_consensus_gap},
          {"grad_norm_slope", r.grad_norm_slope},
          {"wall_seconds", wall}};
}

int run_lloyd_mode(const ExperimentConfig& c, const fs::path& dir, std::chrono::steady_clock::time_point started) {
  const RunConfig rc = effective_run_config(c);
  const SampleBatch batch = make_batch(rc.distribution, rc.seed, rc.n_ref);
  const QuantizerVec w0 = initial_versions(rc).front();
  const LloydState state = run_lloyd(w0, batch, c.lloyd_max_iterations, c.lloyd_tolerance, true);

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<MetricsRecord> rows;
  for (std::size_t k = 0; k < state.trajectory.size(); ++k) {
    const auto dh = empirical_distortion_and_h(state.trajectory[k], batch);
    rows.push_back({k, 0.0, 0.0, nan, dh.distortion, dh.h.norm(), nan, min_component_separation(state.trajectory[k]), nan,
                    nan, nan});
  }
  SummaryInputs in;
  in.horizon = state.iterations;
  in.kappa = rc.kappa;
  in.diameter = batch.diameter;
  in.lloyd_distortion = state.distortion;
  const ConvergenceReport report = summarize(rows, in);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  write_with(dir / "metrics.csv", [&](std::ostream& o) { write_metrics_csv(rows, o); });
  write_with(dir / "final-quantizers.json", [&](std::ostream& o) { write_quantizers_json({state.w}, std::nullopt, o); });
  json rep = base_report(c);
  rep["lloyd"] = {{"iterations", state.iterations}, {"distortion", state.distortion}};
  rep["convergence"] = convergence_json(report);
  rep["summary"] = summary_json(report, rc, wall);
  write_text(dir / "report.json", rep.dump(2) + "\n");
  return kExitOk;
}

} // namespace

void write_quantizers_json(const std::vector<QuantizerVec>& versions, const std::optional<QuantizerVec>& agreement,
                           std::ostream& out) {
  json procs = json::array();
  for (const auto& v : versions) procs.push_back(quantizer_json(v));
  json j = {{"processors", procs}, {"agreement_vector", agreement ? quantizer_json(*agreement) : json(nullptr)}};
  out << j.dump(2) << '\n';
}

std::string validation_json(const ValidationReport& v, bool required_hold) {
  return validation_to_json(v, required_hold).dump(2) + "\n";
}

int cmd_run(const ExperimentConfig& c, bool allow_invalid_schedule, std::ostream& log) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  write_text(dir / "effective-config.json", emit_config(c));

  if (c.mode == RunMode::LloydBaseline) return run_lloyd_mode(c, dir, started);

  const RunConfig rc = effective_run_config(c);
  CommSchedule schedule = rc.horizon > 0 ? generate(rc.schedule, rc.processors, rc.horizon) : CommSchedule(rc.processors, 0);
  const ValidationReport validation = validate(schedule);
  const bool holds = required_assumptions(c.mode, validation);
  const bool write_trace = c.audit_schedule || rc.schedule.topology == Topology::CustomTrace;
  if (write_trace) write_with(dir / "schedule-trace.jsonl", [&](std::ostream& o) { write_trace_jsonl(schedule, o); });

  json rep = base_report(c);
  rep["validation"] = validation_to_json(validation, holds);
  rep["assumptions_violated"] = !holds;
  if (!holds) {
    for (const AssumptionCheck* check : validation.checks()) {
      if (!check->holds) log << "assumption failed: " << check->name << ": " << check->detail << '\n';
    }
  }
  if (c.mode == RunMode::ValidateOnly || (!holds && !allow_invalid_schedule)) {
    write_text(dir / "report.json", rep.dump(2) + "\n");
    return holds ? kExitOk : kExitValidation;
  }

  RunArtifacts a = run(rc, std::move(schedule));
  if (c.mode != RunMode::AgreementOnly && rc.horizon > 0) {
    const LloydState lloyd = run_lloyd(a.initial.front(), a.reference, c.lloyd_max_iterations, c.lloyd_tolerance);
    a.summary_inputs.lloyd_distortion = lloyd.distortion;
    const SampleSource source = rc.sampling == SampleMode::ReplayFromBatch ? SampleSource::replay(a.reference)
                                                                           : SampleSource::fresh(rc.distribution);
    const ClvqRun clvq = run_clvq(a.initial.front(), source, rc.steps, rc.seed, rc.horizon);
    a.summary_inputs.clvq_distortion = empirical_distortion(clvq.final, a.reference);
  }
  const ConvergenceReport report = summarize(a.metrics, a.summary_inputs);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  write_with(dir / "metrics.csv", [&](std::ostream& o) { write_metrics_csv(a.metrics, o); });
  write_with(dir / "final-quantizers.json", [&](std::ostream& o) { write_quantizers_json(a.final_versions, a.final_star, o); });
  rep["step_bounds"] = {{"k1", a.step_bounds.k1}, {"k2", a.step_bounds.k2}};
  rep["phi"] = {{"available", a.phi.available}, {"a_hat", a.phi.a_hat},     {"rho_hat", a.phi.rho_hat},
                {"eta_hat", a.phi.eta_hat},     {"converged", a.phi.converged}, {"tail", a.phi.tail},
                {"residual_count", a.phi.residual_count}, {"fit_rms", a.phi.fit_rms}};
  if (!a.phi.available) rep["phi"]["note"] = "limit not resolved";
  rep["convergence"] = convergence_json(report);
  rep["summary"] = summary_json(report, rc, wall);
  write_text(dir / "report.json", rep.dump(2) + "\n");
  log << "run finished: " << a.metrics.size() << " records, final consensus gap "
      << format_double(report.final_consensus_gap) << '\n';
  return kExitOk;
}

std::string cmd_report(const std::vector<std::string>& run_dirs) {
  std::ostringstream out;
  out << "run,mode,data,final_distortion,final_consensus_gap,grad_norm_slope,wall_time\n";
  for (const auto& d : run_dirs) {
    const fs::path dir(d);
    for (const char* name : {"effective-config.json", "report.json", "metrics.csv"}) {
      if (!fs::exists(dir / name)) throw ArtifactError("run dir '" + d + "': missing " + name);
    }
    json rep;
    {
      std::ifstream in(dir / "report.json");
      try {
        rep = json::parse(in);
      } catch (const json::exception&) {
        throw ArtifactError("run dir '" + d + "': corrupt report.json");
      }
    }
    if (!rep.contains("summary") || !rep["summary"].is_object()) {
      throw ArtifactError("run dir '" + d + "': report.json has no summary (validate-only run?)");
    }
    const json& s = rep["summary"];
    auto num = [&](const char* key) -> std::string {
      if (!s.contains(key)) throw ArtifactError("run dir '" + d + "': report.json lacks summary." + key);
      return s[key].is_number() ? format_double(s[key].get<double>()) : "nan";
    };
    out << fs::path(d).filename().string() << ',' << rep.value("mode", std::string("?")) << ','
        << s.value("data", std::string("?")) << ',' << num("final_distortion") << ',' << num("final_consensus_gap") << ','
        << num("grad_norm_slope") << ',' << num("wall_seconds") << '\n';
  }
  return out.str();
}

int cmd_validate_schedule(const ExperimentConfig& c, std::ostream& out) {
  const RunConfig rc = effective_run_config(c);
  const CommSchedule schedule = generate(rc.schedule, rc.processors, std::max<std::size_t>(rc.horizon, 1));
  const ValidationReport v = validate(schedule);
  const bool holds = required_assumptions(c.mode, v);
  out << validation_json(v, holds);
  return holds ? kExitOk : kExitValidation;
}

void cmd_phi_table(const ExperimentConfig& c, std::size_t t, std::ostream& out) {
  const RunConfig rc = effective_run_config(c);
  const CommSchedule schedule = generate(rc.schedule, rc.processors, std::max<std::size_t>(t, rc.schedule.period));
  write_phi_table_json(compute_phi_adjoint(schedule, t), out);
}

} // namespace dalvq
