#include "tvflow/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "tvflow/ball_dynamics.hpp"
#include "tvflow/errors.hpp"

namespace tvflow {

using nlohmann::json;

namespace {

std::vector<double> number_list(const json& doc, const char* key) {
  std::vector<double> out;
  if (!doc.contains(key)) return out;
  const json& arr = doc.at(key);
  if (!arr.is_array()) throw domain_error(std::string("scenario: '") + key + "' must be an array");
  for (const json& x : arr) {
    if (!x.is_number()) throw domain_error(std::string("scenario: '") + key + "' must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

double number(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_number()) {
    throw domain_error(std::string("scenario: missing numeric field '") + key + "'");
  }
  const double v = doc.at(key).get<double>();
  if (!std::isfinite(v)) throw domain_error(std::string("scenario: '") + key + "' must be finite");
  return v;
}

bool is_ball(const Scenario& sc) { return sc.kind == "ball"; }

double effective_dt(const Scenario& sc) { return sc.dt > 0.0 ? sc.dt : (sc.t_end - sc.t0) / 1e4; }

}  // namespace

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

json state_to_json(const EvolutionState& s) {
  json regions = json::array();
  for (const Region& r : s.regions) {
    if (r.bend) {
      regions.push_back({{"bend",
                          {{"sigma", r.profile.sigma},
                           {"r", r.profile.r},
                           {"u_entry", r.profile.u_entry},
                           {"t_entry", r.profile.t_entry}}}});
    } else {
      regions.push_back({{"value", r.value}});
    }
  }
  json kinds = json::array();
  for (InterfaceKind k : s.kinds) kinds.push_back(k == InterfaceKind::Hinge ? "hinge" : "jump");
  return {{"t", s.t}, {"radii", s.radii}, {"interfaces", kinds}, {"regions", regions}};
}

EvolutionState state_from_json(const json& doc) {
  EvolutionState s;
  s.t = number(doc, "t");
  s.radii = number_list(doc, "radii");
  if (!doc.contains("regions") || !doc.at("regions").is_array()) {
    throw domain_error("state: missing 'regions'");
  }
  for (const json& r : doc.at("regions")) {
    Region reg;
    if (r.contains("bend")) {
      const json& b = r.at("bend");
      reg.bend = true;
      reg.profile.sigma = b.at("sigma").get<int>();
      if (reg.profile.sigma != 1 && reg.profile.sigma != -1) throw domain_error("state: sigma must be +-1");
      reg.profile.r = number_list(b, "r");
      reg.profile.u_entry = number_list(b, "u_entry");
      reg.profile.t_entry = number_list(b, "t_entry");
      if (reg.profile.r.empty() || reg.profile.r.size() != reg.profile.u_entry.size() ||
          reg.profile.r.size() != reg.profile.t_entry.size()) {
        throw domain_error("state: bending samples must be non-empty and aligned");
      }
    } else {
      reg.value = number(r, "value");
    }
    s.regions.push_back(std::move(reg));
  }
  if (s.regions.size() != s.radii.size() + 1) throw domain_error("state: need one more region than radii");
  s.kinds.assign(s.radii.size(), InterfaceKind::Jump);
  if (doc.contains("interfaces")) {
    const json& k = doc.at("interfaces");
    if (!k.is_array() || k.size() != s.radii.size()) throw domain_error("state: one interface kind per radius");
    for (std::size_t i = 0; i < k.size(); ++i) {
      const std::string name = k[i].get<std::string>();
      if (name == "hinge") {
        s.kinds[i] = InterfaceKind::Hinge;
      } else if (name != "jump") {
        throw domain_error("state: unknown interface kind '" + name + "'");
      }
    }
  }
  for (std::size_t i = 0; i < s.radii.size(); ++i) {
    if (!(s.radii[i] > 0.0) || (i > 0 && !(s.radii[i] > s.radii[i - 1]))) {
      throw domain_error("state: radii must be positive and increasing");
    }
  }
  return s;
}

Scenario parse_scenario(const json& doc) {
  if (!doc.is_object()) throw domain_error("scenario: expected a JSON object");
  Scenario sc;
  if (!doc.contains("n") || !doc.at("n").is_number_integer()) throw domain_error("scenario: 'n' must be an integer");
  sc.dim = Dimension(doc.at("n").get<int>());
  sc.kind = doc.value("kind", std::string("stack"));
  sc.t_end = number(doc, "t_end");
  if (doc.contains("dt")) sc.dt = number(doc, "dt");
  if (doc.contains("t0")) sc.t0 = number(doc, "t0");
  sc.outputs = number_list(doc, "outputs");
  if (sc.dt < 0.0) throw domain_error("scenario: dt must be positive");
  if (sc.t0 < 0.0) throw domain_error("scenario: t0 must be non-negative");
  if (!(sc.t_end > sc.t0)) throw domain_error("scenario: t_end must exceed t0");
  for (double t : sc.outputs) {
    if (!std::isfinite(t) || t < sc.t0 || t > sc.t_end) throw domain_error("scenario: output times must lie in [t0, t_end]");
  }

  if (sc.kind == "ball" || sc.kind == "stack") {
    sc.radii = number_list(doc, "radii");
    sc.values = number_list(doc, "values");
    if (sc.kind == "ball") {
      if (sc.radii.size() != 1) throw domain_error("scenario: a ball has exactly one radius");
      if (sc.values.size() == 1) sc.values.push_back(0.0);
      if (sc.values.size() != 2 || sc.values[1] != 0.0) throw domain_error("scenario: ball values are [a0] or [a0, 0]");
      if (sc.t0 != 0.0) throw domain_error("scenario: ball scenarios start at t = 0");
    }
    sc.initial = EvolutionState::from_stack(Stack(sc.dim, sc.radii, sc.values), sc.t0);
  } else if (sc.kind == "state") {
    if (!doc.contains("state")) throw domain_error("scenario: kind 'state' needs a 'state' object");
    sc.initial = state_from_json(doc.at("state"));
    sc.initial.dim = sc.dim;
    if (doc.contains("t0") && sc.initial.t != sc.t0) throw domain_error("scenario: t0 disagrees with the state time");
    sc.t0 = sc.initial.t;
    if (!(sc.t_end > sc.t0)) throw domain_error("scenario: t_end must exceed the state time");
    if (!sc.dim.planar() && sc.initial.bend_count() > 0) throw domain_error("scenario: bending regions exist only for n = 2");
  } else {
    throw domain_error("scenario: unknown kind '" + sc.kind + "'");
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw domain_error("cannot open scenario file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw domain_error(std::string("scenario is not valid JSON: ") + e.what());
  }
  try {
    return parse_scenario(doc);
  } catch (const json::exception& e) {
    throw domain_error(std::string("scenario: ") + e.what());
  }
}

Trajectory run_scenario(const Scenario& sc) {
  EvolveOptions opts;
  opts.dt = effective_dt(sc);
  opts.output_times = sc.outputs;
  return evolve_state(sc.initial, sc.t_end, opts);
}

void write_trajectory_csv(std::ostream& os, const Scenario& sc, const Trajectory& tr) {
  std::size_t heights = 0, radii = 0;
  for (const StepRecord& r : tr.steps) {
    heights = std::max(heights, r.heights.size());
    radii = std::max(radii, r.radii.size());
  }
  os << "t,mass,tv";
  for (std::size_t k = 0; k < heights; ++k) os << ",a" << k;
  for (std::size_t k = 0; k < radii; ++k) os << ",R" << k;
  if (is_ball(sc)) os << ",a_exact,R_exact";
  os << "\n";
  for (const StepRecord& r : tr.steps) {
    os << format_number(r.t) << ',' << format_number(r.mass) << ',' << format_number(r.tv);
    for (std::size_t k = 0; k < heights; ++k) {
      os << ',';
      if (k < r.heights.size() && std::isfinite(r.heights[k])) os << format_number(r.heights[k]);
    }
    for (std::size_t k = 0; k < radii; ++k) {
      os << ',';
      if (k < r.radii.size()) os << format_number(r.radii[k]);
    }
    if (is_ball(sc)) {
      const BallState b = evolve_ball(sc.dim, sc.values[0], sc.radii[0], r.t);
      if (b.extinct) {
        os << ",0,";
      } else {
        os << ',' << format_number(b.a) << ',' << format_number(b.R);
      }
    }
    os << "\n";
  }
}

std::vector<double> profile_radii(const EvolutionState& s, std::size_t count) {
  const double outer = s.radii.empty() ? 1.0 : s.radii.back();
  const double r_max = (s.dim.planar() ? 3.0 : 1.5) * outer;
  std::vector<double> r;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = r_max * static_cast<double>(i) / (count - 1);
    bool near_jump = false;
    for (std::size_t k = 0; k < s.radii.size(); ++k) {
      if (s.kinds[k] == InterfaceKind::Jump && std::abs(x - s.radii[k]) <= 1e-9 * s.radii[k]) near_jump = true;
    }
    if (!near_jump) r.push_back(x);
  }
  for (std::size_t i = 0; i < s.radii.size(); ++i) {
    if (s.kinds[i] == InterfaceKind::Hinge) {
      r.push_back(s.radii[i]);
    } else {
      r.push_back(s.radii[i] * (1.0 - 1e-9));
      r.push_back(s.radii[i] * (1.0 + 1e-9));
    }
    // bending samples carry the shape of the profile
    for (std::size_t k = i; k <= i + 1; ++k) {
      if (s.regions[k].bend) {
        for (double x : s.regions[k].profile.r) {
          if (x >= s.lower(k) && x <= s.upper(k)) r.push_back(x);
        }
      }
    }
  }
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end()), r.end());
  return r;
}

void write_profile_csv(std::ostream& os, const Scenario& sc, const EvolutionState& s) {
  os << "t,r,u";
  if (is_ball(sc)) os << ",u_exact";
  os << "\n";
  for (double r : profile_radii(s)) {
    os << format_number(s.t) << ',' << format_number(r) << ',' << format_number(s.u(r));
    if (is_ball(sc)) {
      os << ',' << format_number(r > 0.0 ? profile_at(sc.dim, sc.values[0], sc.radii[0], s.t, r)
                                         : evolve_ball(sc.dim, sc.values[0], sc.radii[0], s.t).a);
    }
    os << "\n";
  }
}

json events_json(const Scenario& sc, const Trajectory& tr) {
  auto restart = [&](const EvolutionState& s) {
    return json{{"n", sc.dim.value()},
                {"kind", "state"},
                {"t_end", sc.t_end},
                {"dt", effective_dt(sc)},
                {"state", state_to_json(s)}};
  };
  json events = json::array();
  for (const TrajectoryEvent& e : tr.events) {
    events.push_back({{"kind", to_string(e.kind)},
                      {"time", e.time},
                      {"index", e.index},
                      {"l1_jump", e.l1_jump},
                      {"restart", restart(e.after)}});
  }
  json doc{{"events", events}, {"final", restart(tr.final_state)}};
  doc["extinction_time"] = tr.extinction_time ? json(*tr.extinction_time) : json(nullptr);
  return doc;
}

std::vector<std::string> write_outputs(const std::string& prefix, const Scenario& sc,
                                       const Trajectory& tr) {
  std::vector<std::string> files;
  auto open = [&](const std::string& name) {
    std::ofstream out(name);
    if (!out) throw Error(ErrorKind::Domain, "cannot write " + name);
    files.push_back(name);
    return out;
  };
  {
    std::ofstream out = open(prefix + "_trajectory.csv");
    write_trajectory_csv(out, sc, tr);
  }
  for (std::size_t i = 0; i < tr.outputs.size(); ++i) {
    std::ofstream out = open(prefix + "_profile_" + std::to_string(i) + ".csv");
    write_profile_csv(out, sc, tr.outputs[i]);
  }
  {
    std::ofstream out = open(prefix + "_events.json");
    out << events_json(sc, tr).dump(2) << "\n";
  }
  return files;
}

}  // namespace tvflow
