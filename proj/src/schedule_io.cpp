#include "dalvq/errors.hpp"
#include "dalvq/schedule.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace dalvq {

using nlohmann::json;

void write_trace_jsonl(const CommSchedule& s, std::ostream& out) {
  const std::size_t m = s.processors();
  for (std::size_t t = 0; t < s.horizon(); ++t) {
    json coeff = json::array();
    json delay = json::array();
    for (std::size_t i = 0; i < m; ++i) {
      auto c = s.coeff_row(t, i);
      auto d = s.delay_row(t, i);
      coeff.push_back(std::vector<double>(c.begin(), c.end()));
      delay.push_back(std::vector<std::uint32_t>(d.begin(), d.end()));
    }
    json rec;
    rec["t"] = t;
    rec["coeff"] = std::move(coeff);
    rec["delay"] = std::move(delay);
    rec["active"] = s.active_set(t);
    out << rec.dump() << '\n';
  }
}

namespace {

[[noreturn]] void bad_line(std::size_t line, const std::string& what) {
  throw ConfigError("schedule trace line " + std::to_string(line) + ": " + what);
}

} // namespace

CommSchedule read_trace_jsonl(std::istream& in) {
  std::vector<json> records;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(json::parse(text));
    } catch (const json::parse_error& e) {
      bad_line(line, e.what());
    }
  }
  if (records.empty()) throw ConfigError("schedule trace is empty");

  const auto& first = records.front();
  if (!first.contains("coeff") || !first["coeff"].is_array()) bad_line(1, "missing coeff matrix");
  const std::size_t m = first["coeff"].size();
  if (m == 0) bad_line(1, "empty coeff matrix");

  CommSchedule s(m, records.size());
  for (std::size_t t = 0; t < records.size(); ++t) {
    const json& r = records[t];
    const std::size_t ln = t + 1;
    try {
      for (const char* key : {"t", "coeff", "delay", "active"}) {
        if (!r.contains(key)) bad_line(ln, std::string("missing field '") + key + "'");
      }
      for (const auto& [key, _] : r.items()) {
        if (key != "t" && key != "coeff" && key != "delay" && key != "active") bad_line(ln, "unknown field '" + key + "'");
      }
      if (r["t"].get<std::size_t>() != t) bad_line(ln, "ticks must be consecutive from 0");
      const auto& coeff = r["coeff"];
      const auto& delay = r["delay"];
      if (coeff.size() != m || delay.size() != m) bad_line(ln, "matrix is not " + std::to_string(m) + "x" + std::to_string(m));
      for (std::size_t i = 0; i < m; ++i) {
        if (coeff[i].size() != m || delay[i].size() != m) bad_line(ln, "row " + std::to_string(i) + " has wrong length");
        for (std::size_t j = 0; j < m; ++j) {
          s.set_coeff(t, i, j, coeff[i][j].get<double>());
          const auto d = delay[i][j].get<std::int64_t>();
          if (d < 0) bad_line(ln, "negative delay");
          s.set_delay(t, i, j, static_cast<std::uint32_t>(d));
        }
      }
      for (const auto& a : r["active"]) {
        const auto i = a.get<std::size_t>();
        if (i >= m) bad_line(ln, "active index " + std::to_string(i) + " out of range");
        s.set_active(t, i, true);
      }
    } catch (const json::exception& e) {
      bad_line(ln, e.what());
    }
  }

  s.constants = measure_constants(s);
  s.separate_merge_descent = true;
  for (std::size_t t = 0; t < s.horizon() && s.separate_merge_descent; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      if (s.active(t, i) && !s.identity_row(t, i)) {
        s.separate_merge_descent = false;
        break;
      }
    }
  }
  return s;
}

CommSchedule read_trace_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schedule trace '" + path + "'");
  return read_trace_jsonl(in);
}

} // namespace dalvq
