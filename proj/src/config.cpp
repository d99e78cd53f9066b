#include "mjls/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace mjls {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) fail(path + "/" + it.key(), "unknown key");
  }
}

double get_number(const json& obj, const std::string& path, const std::string& key, double fallback, bool* present = nullptr) {
  if (!obj.contains(key)) {
    if (present != nullptr) *present = false;
    return fallback;
  }
  if (present != nullptr) *present = true;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "/" + key, "expected a number");
  return v.get<double>();
}

long long get_integer(const json& obj, const std::string& path, const std::string& key, long long fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned()) fail(path + "/" + key, "expected an integer");
  return v.get<long long>();
}

Matrix parse_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of rows");
  int rows = static_cast<int>(v.size());
  if (!v[0].is_array()) fail(path + "/0", "expected a row array");
  int cols = static_cast<int>(v[0].size());
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const json& row = v[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      fail(path + "/" + std::to_string(r), "ragged matrix row");
    for (int c = 0; c < cols; ++c) {
      const json& e = row[static_cast<size_t>(c)];
      if (!e.is_number()) fail(path + "/" + std::to_string(r) + "/" + std::to_string(c), "expected a number");
      m(r, c) = e.get<double>();
    }
  }
  return m;
}

std::vector<double> parse_vector(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) fail(path + "/" + std::to_string(k), "expected a number");
    out.push_back(v[k].get<double>());
  }
  return out;
}

PemAdm parse_model(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  check_keys(v, path, {"state_dim", "input_dim", "output_dim", "modes", "generator"});
  PemAdm model;
  model.state_dim = static_cast<int>(get_integer(v, path, "state_dim", 0));
  model.input_dim = static_cast<int>(get_integer(v, path, "input_dim", 0));
  model.output_dim = static_cast<int>(get_integer(v, path, "output_dim", 0));
  if (!v.contains("modes") || !v.at("modes").is_array()) fail(path + "/modes", "expected an array of mode objects");
  const json& modes = v.at("modes");
  for (size_t i = 0; i < modes.size(); ++i) {
    std::string mpath = path + "/modes/" + std::to_string(i);
    const json& mv = modes[i];
    if (!mv.is_object()) fail(mpath, "expected an object");
    check_keys(mv, mpath, {"A", "B", "C", "D"});
    ModeSystem ms;
    for (const char* key : {"A", "B", "C", "D"}) {
      if (!mv.contains(key)) fail(mpath + "/" + key, "missing matrix");
    }
    ms.a = parse_matrix(mv.at("A"), mpath + "/A");
    ms.b = parse_matrix(mv.at("B"), mpath + "/B");
    ms.c = parse_matrix(mv.at("C"), mpath + "/C");
    ms.d = parse_matrix(mv.at("D"), mpath + "/D");
    model.modes.push_back(ms);
  }
  if (!v.contains("generator")) fail(path + "/generator", "missing generator");
  model.generator.rates = parse_matrix(v.at("generator"), path + "/generator");
  model.generator.n_modes = model.generator.rates.rows();
  model.generator.repair_diagonal();
  if (model.state_dim == 0 && !model.modes.empty()) model.state_dim = model.modes[0].a.rows();
  if (model.input_dim == 0 && !model.modes.empty()) model.input_dim = model.modes[0].b.cols();
  if (model.output_dim == 0 && !model.modes.empty()) model.output_dim = model.modes[0].c.rows();
  ValidationReport rep = validate_model(model);
  if (!rep.ok()) fail(path, "invalid model: " + rep.summary());
  return model;
}

GainSet parse_gains(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected an array of per-mode gain matrices");
  GainSet gs;
  for (size_t i = 0; i < v.size(); ++i) gs.gains.push_back(parse_matrix(v[i], path + "/" + std::to_string(i)));
  return gs;
}

SynthesisOptions parse_synthesis(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  check_keys(v, path, {"gamma1_bar", "gamma2_bar", "gamma3_bar", "alpha1", "epsilon"});
  SynthesisOptions opts;
  opts.gamma1_bar = get_number(v, path, "gamma1_bar", opts.gamma1_bar);
  opts.gamma2_bar = get_number(v, path, "gamma2_bar", opts.gamma2_bar);
  opts.gamma3_bar = get_number(v, path, "gamma3_bar", opts.gamma3_bar);
  opts.alpha1 = get_number(v, path, "alpha1", opts.alpha1);
  opts.strictness = get_number(v, path, "epsilon", opts.strictness);
  try {
    opts.validate();
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
  return opts;
}

SimConfig parse_sim(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  check_keys(v, path, {"dt", "horizon", "n_paths", "seed", "record_stride", "initial_mode"});
  SimConfig sim;
  sim.dt = get_number(v, path, "dt", sim.dt);
  sim.horizon = get_number(v, path, "horizon", sim.horizon);
  sim.n_paths = static_cast<int>(get_integer(v, path, "n_paths", sim.n_paths));
  sim.seed = static_cast<uint64_t>(get_integer(v, path, "seed", static_cast<long long>(sim.seed)));
  sim.record_stride = static_cast<int>(get_integer(v, path, "record_stride", sim.record_stride));
  sim.initial_mode = static_cast<int>(get_integer(v, path, "initial_mode", sim.initial_mode));
  try {
    sim.validate();
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
  return sim;
}

LeadProfile parse_lead_profile(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  check_keys(v, path, {"kind", "amplitude", "frequency", "times", "accels"});
  LeadProfile p;
  std::string kind = v.contains("kind") ? v.at("kind").get<std::string>() : "constant";
  if (kind == "constant") {
    p.kind = LeadProfile::Kind::constant;
  } else if (kind == "sinusoidal") {
    p.kind = LeadProfile::Kind::sinusoidal;
  } else if (kind == "piecewise") {
    p.kind = LeadProfile::Kind::piecewise;
  } else {
    fail(path + "/kind", "expected constant, sinusoidal, or piecewise");
  }
  p.amplitude = get_number(v, path, "amplitude", p.amplitude);
  p.frequency = get_number(v, path, "frequency", p.frequency);
  if (v.contains("times")) p.piece_times = parse_vector(v.at("times"), path + "/times");
  if (v.contains("accels")) p.piece_accels = parse_vector(v.at("accels"), path + "/accels");
  return p;
}

BaselineParams parse_baseline(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  check_keys(v, path,
             {"idm_v0", "idm_t", "idm_a_max", "idm_b", "idm_s0", "idm_b_max", "rbc_e_tol", "rbc_a_r", "rbc_k_v",
              "rbc_clamp", "cruise_speed", "cruise_gain", "control_dt"});
  BaselineParams p;
  p.idm_v0 = get_number(v, path, "idm_v0", p.idm_v0);
  p.idm_t = get_number(v, path, "idm_t", p.idm_t);
  p.idm_a_max = get_number(v, path, "idm_a_max", p.idm_a_max);
  p.idm_b = get_number(v, path, "idm_b", p.idm_b);
  p.idm_s0 = get_number(v, path, "idm_s0", p.idm_s0);
  p.idm_b_max = get_number(v, path, "idm_b_max", p.idm_b_max);
  p.rbc_e_tol = get_number(v, path, "rbc_e_tol", p.rbc_e_tol);
  p.rbc_a_r = get_number(v, path, "rbc_a_r", p.rbc_a_r);
  p.rbc_k_v = get_number(v, path, "rbc_k_v", p.rbc_k_v);
  p.rbc_clamp = get_number(v, path, "rbc_clamp", p.rbc_clamp);
  p.cruise_speed = get_number(v, path, "cruise_speed", p.cruise_speed);
  p.cruise_gain = get_number(v, path, "cruise_gain", p.cruise_gain);
  p.control_dt = get_number(v, path, "control_dt", p.control_dt);
  return p;
}

ConfigDocument::Scenario parse_scenario(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  check_keys(v, path,
             {"id", "sigma00", "sigma01", "sigma10", "sigma11", "generator", "design_generator", "delta_d", "ego0",
              "lead0", "lead_profile", "baseline", "failure_threshold", "n_retain"});
  ConfigDocument::Scenario sc;
  sc.id = static_cast<int>(get_integer(v, path, "id", sc.id));
  if (sc.id < 1 || sc.id > 3) fail(path + "/id", "scenario id must be 1, 2, or 3");
  ScenarioConfig base = make_scenario_config(sc.id);
  sc.acc = base.acc;
  sc.acc.sigma00 = get_number(v, path, "sigma00", sc.acc.sigma00);
  sc.acc.sigma01 = get_number(v, path, "sigma01", sc.acc.sigma01);
  sc.acc.sigma10 = get_number(v, path, "sigma10", sc.acc.sigma10);
  sc.acc.sigma11 = get_number(v, path, "sigma11", sc.acc.sigma11);
  if (v.contains("generator")) {
    sc.acc.generator.rates = parse_matrix(v.at("generator"), path + "/generator");
    sc.acc.generator.n_modes = sc.acc.generator.rates.rows();
    sc.acc.generator.repair_diagonal();
  }
  if (v.contains("design_generator")) {
    sc.design_generator.rates = parse_matrix(v.at("design_generator"), path + "/design_generator");
    sc.design_generator.n_modes = sc.design_generator.rates.rows();
    sc.design_generator.repair_diagonal();
  }
  sc.acc.delta_d = get_number(v, path, "delta_d", sc.acc.delta_d);
  if (v.contains("ego0")) {
    std::vector<double> e = parse_vector(v.at("ego0"), path + "/ego0");
    if (e.size() != 2) fail(path + "/ego0", "expected [position, velocity]");
    sc.acc.ego0_pos = e[0];
    sc.acc.ego0_vel = e[1];
  }
  if (v.contains("lead0")) {
    std::vector<double> l = parse_vector(v.at("lead0"), path + "/lead0");
    if (l.size() != 2) fail(path + "/lead0", "expected [position, velocity]");
    sc.acc.lead0_pos = l[0];
    sc.acc.lead0_vel = l[1];
  }
  if (v.contains("lead_profile")) sc.acc.lead_profile = parse_lead_profile(v.at("lead_profile"), path + "/lead_profile");
  if (v.contains("baseline")) sc.baseline = parse_baseline(v.at("baseline"), path + "/baseline");
  sc.failure_threshold = get_number(v, path, "failure_threshold", sc.failure_threshold);
  sc.n_retain = static_cast<int>(get_integer(v, path, "n_retain", sc.n_retain));
  try {
    sc.acc.validate();
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
  return sc;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

ConfigDocument parse_config(const std::string& text, const std::string& source_name) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source_name + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError(source_name + ": top level must be an object");
  if (root.contains("config")) {
    // run manifest: the embedded config is authoritative, metadata keys
    // alongside it are informational
    root = root.at("config");
    if (!root.is_object()) throw ConfigError(source_name + "/config: expected an object");
  }
  check_keys(root, source_name, {"model", "gains", "synthesis", "sim", "x0", "scenario"});
  ConfigDocument doc;
  if (root.contains("model")) doc.model = parse_model(root.at("model"), source_name + "/model");
  if (root.contains("gains")) doc.gains = parse_gains(root.at("gains"), source_name + "/gains");
  if (root.contains("synthesis")) doc.synthesis = parse_synthesis(root.at("synthesis"), source_name + "/synthesis");
  if (root.contains("sim")) doc.sim = parse_sim(root.at("sim"), source_name + "/sim");
  if (root.contains("x0")) doc.x0 = parse_vector(root.at("x0"), source_name + "/x0");
  if (root.contains("scenario")) doc.scenario = parse_scenario(root.at("scenario"), source_name + "/scenario");
  return doc;
}

ConfigDocument load_config(const std::string& path) { return parse_config(read_file(path), path); }

std::string serialize_config(const ConfigDocument& doc) {
  json root = json::object();
  if (doc.model) {
    json m = json::object();
    m["state_dim"] = doc.model->state_dim;
    m["input_dim"] = doc.model->input_dim;
    m["output_dim"] = doc.model->output_dim;
    json modes = json::array();
    for (const ModeSystem& ms : doc.model->modes) {
      json mv = json::object();
      mv["A"] = matrix_to_json(ms.a);
      mv["B"] = matrix_to_json(ms.b);
      mv["C"] = matrix_to_json(ms.c);
      mv["D"] = matrix_to_json(ms.d);
      modes.push_back(mv);
    }
    m["modes"] = modes;
    m["generator"] = matrix_to_json(doc.model->generator.rates);
    root["model"] = m;
  }
  if (doc.gains) {
    json g = json::array();
    for (const Matrix& k : doc.gains->gains) g.push_back(matrix_to_json(k));
    root["gains"] = g;
  }
  if (doc.synthesis) {
    json s = json::object();
    s["gamma1_bar"] = doc.synthesis->gamma1_bar;
    s["gamma2_bar"] = doc.synthesis->gamma2_bar;
    s["gamma3_bar"] = doc.synthesis->gamma3_bar;
    s["alpha1"] = doc.synthesis->alpha1;
    s["epsilon"] = doc.synthesis->strictness;
    root["synthesis"] = s;
  }
  if (doc.sim) {
    json s = json::object();
    s["dt"] = doc.sim->dt;
    s["horizon"] = doc.sim->horizon;
    s["n_paths"] = doc.sim->n_paths;
    s["seed"] = doc.sim->seed;
    s["record_stride"] = doc.sim->record_stride;
    s["initial_mode"] = doc.sim->initial_mode;
    root["sim"] = s;
  }
  if (doc.x0) root["x0"] = *doc.x0;
  if (doc.scenario) {
    const ConfigDocument::Scenario& sc = *doc.scenario;
    json s = json::object();
    s["id"] = sc.id;
    s["sigma00"] = sc.acc.sigma00;
    s["sigma01"] = sc.acc.sigma01;
    s["sigma10"] = sc.acc.sigma10;
    s["sigma11"] = sc.acc.sigma11;
    s["generator"] = matrix_to_json(sc.acc.generator.rates);
    s["design_generator"] = matrix_to_json(sc.design_generator.rates);
    s["delta_d"] = sc.acc.delta_d;
    s["ego0"] = json::array({sc.acc.ego0_pos, sc.acc.ego0_vel});
    s["lead0"] = json::array({sc.acc.lead0_pos, sc.acc.lead0_vel});
    json lp = json::object();
    switch (sc.acc.lead_profile.kind) {
      case LeadProfile::Kind::constant: lp["kind"] = "constant"; break;
      case LeadProfile::Kind::sinusoidal: lp["kind"] = "sinusoidal"; break;
      case LeadProfile::Kind::piecewise: lp["kind"] = "piecewise"; break;
    }
    lp["amplitude"] = sc.acc.lead_profile.amplitude;
    lp["frequency"] = sc.acc.lead_profile.frequency;
    if (!sc.acc.lead_profile.piece_times.empty()) {
      lp["times"] = sc.acc.lead_profile.piece_times;
      lp["accels"] = sc.acc.lead_profile.piece_accels;
    }
    s["lead_profile"] = lp;
    json b = json::object();
    b["idm_v0"] = sc.baseline.idm_v0;
    b["idm_t"] = sc.baseline.idm_t;
    b["idm_a_max"] = sc.baseline.idm_a_max;
    b["idm_b"] = sc.baseline.idm_b;
    b["idm_s0"] = sc.baseline.idm_s0;
    b["idm_b_max"] = sc.baseline.idm_b_max;
    b["rbc_e_tol"] = sc.baseline.rbc_e_tol;
    b["rbc_a_r"] = sc.baseline.rbc_a_r;
    b["rbc_k_v"] = sc.baseline.rbc_k_v;
    b["rbc_clamp"] = sc.baseline.rbc_clamp;
    b["cruise_speed"] = sc.baseline.cruise_speed;
    b["cruise_gain"] = sc.baseline.cruise_gain;
    b["control_dt"] = sc.baseline.control_dt;
    s["baseline"] = b;
    s["failure_threshold"] = sc.failure_threshold;
    s["n_retain"] = sc.n_retain;
    root["scenario"] = s;
  }
  return root.dump(2) + "\n";
}

std::string to_csv(const std::vector<CsvColumn>& columns) {
  if (columns.empty()) return "";
  size_t n = columns[0].values.size();
  for (const CsvColumn& c : columns) {
    if (c.values.size() != n) throw std::invalid_argument("to_csv: column length mismatch");
  }
  std::ostringstream os;
  for (size_t c = 0; c < columns.size(); ++c) {
    if (c > 0) os << ",";
    os << columns[c].name;
  }
  os << "\n";
  char buf[64];
  for (size_t r = 0; r < n; ++r) {
    for (size_t c = 0; c < columns.size(); ++c) {
      if (c > 0) os << ",";
      std::snprintf(buf, sizeof(buf), "%.17g", columns[c].values[r]);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace mjls
