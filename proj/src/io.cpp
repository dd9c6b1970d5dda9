#include "tdmpc/io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tdmpc/errors.hpp"
#include "tdmpc/riccati.hpp"

namespace tdmpc {

namespace {

double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ParseError(what + ": expected a number");
  return j.get<double>();
}

Polytope polytope_from_json(const json& j, Eigen::Index dim, const std::string& what) {
  if (j.contains("lower") || j.contains("upper")) {
    const VectorXd lo = vector_from_json(j.at("lower"), what + ".lower");
    const VectorXd hi = vector_from_json(j.at("upper"), what + ".upper");
    if (lo.size() != dim || hi.size() != dim) throw DimensionError(what + ": box bounds have wrong size");
    return Polytope::box(lo, hi);
  }
  if (!j.contains("C") || !j.contains("c")) throw ParseError(what + ": expected {\"C\", \"c\"}");
  Polytope p;
  p.c = vector_from_json(j.at("c"), what + ".c");
  if (j.at("C").is_array() && j.at("C").empty()) {
    p.C = MatrixXd(0, dim);
  } else {
    p.C = matrix_from_json(j.at("C"), what + ".C");
  }
  if (p.C.cols() != dim || p.C.rows() != p.c.size()) throw DimensionError(what + ": polytope has wrong size");
  return p;
}

AgentModel agent_from_json(const json& j, std::size_t idx) {
  const std::string who = "agents[" + std::to_string(idx) + "]";
  if (!j.is_object()) throw ParseError(who + ": expected an object");
  AgentModel a;
  a.name = j.value("name", "agent" + std::to_string(idx));
  a.A = matrix_from_json(j.at("A"), who + ".A");
  a.B = matrix_from_json(j.at("B"), who + ".B");
  const auto n = a.A.rows();
  const auto m = a.B.cols();
  if (a.A.cols() != n) throw DimensionError(who + ": A must be square");
  if (a.B.rows() != n) throw DimensionError(who + ": B row count must match A");
  a.Q = matrix_from_json(j.at("Q"), who + ".Q");
  a.R = matrix_from_json(j.at("R"), who + ".R");
  if (a.Q.rows() != n || a.Q.cols() != n) throw DimensionError(who + ": Q must be n x n");
  if (a.R.rows() != m || a.R.cols() != m) throw DimensionError(who + ": R must be m x m");

  a.input_poly = j.contains("input") ? polytope_from_json(j.at("input"), m, who + ".input")
                                     : Polytope::whole_space(m);
  a.state_poly = j.contains("state") ? polytope_from_json(j.at("state"), n, who + ".state")
                                     : Polytope::whole_space(n);
  if (j.contains("terminal") && j.at("terminal").is_string()) {
    if (j.at("terminal").get<std::string>() != "equality") {
      throw ParseError(who + ".terminal: only \"equality\" is recognised as a keyword");
    }
    a.terminal_mode = TerminalMode::Equality;
    a.terminal_poly = Polytope::origin(n);
  } else if (j.contains("terminal")) {
    a.terminal_poly = polytope_from_json(j.at("terminal"), n, who + ".terminal");
  } else {
    a.terminal_poly = Polytope::whole_space(n);
  }

  if (!j.contains("P")) {
    a.P = MatrixXd::Zero(n, n);
  } else if (j.at("P").is_string()) {
    if (j.at("P").get<std::string>() != "dare") throw ParseError(who + ".P: only \"dare\" is recognised");
    a.P = solve_dare(a.A, a.B, a.Q, a.R).P;
  } else {
    a.P = matrix_from_json(j.at("P"), who + ".P");
    if (a.P.rows() != n || a.P.cols() != n) throw DimensionError(who + ": P must be n x n");
  }
  if (a.terminal_mode == TerminalMode::Equality && j.contains("P") && !a.P.isZero(0.0)) {
    throw ValueError(who + ": terminal equality constraint uses P = 0");
  }
  a.disturbance_bound = j.contains("disturbance_bound")
                            ? vector_from_json(j.at("disturbance_bound"), who + ".disturbance_bound")
                            : VectorXd::Zero(n);
  return a;
}

CouplingGroup coupling_from_json(const json& j, const std::vector<AgentModel>& agents, std::size_t idx) {
  const std::string who = "coupling[" + std::to_string(idx) + "]";
  if (!j.is_object() || !j.contains("agents") || !j.at("agents").is_array()) {
    throw ParseError(who + ": expected an object with an \"agents\" array");
  }
  std::vector<int> ids;
  for (const auto& a : j.at("agents")) {
    if (!a.is_number_integer()) throw ParseError(who + ".agents: expected integers");
    const int id = a.get<int>();
    if (id < 0 || id >= static_cast<int>(agents.size())) {
      throw DimensionError(who + ": unknown agent " + std::to_string(id));
    }
    ids.push_back(id);
  }
  if (ids.empty()) throw ValueError(who + ": row group references no agent");
  const VectorXd b = vector_from_json(j.at("b"), who + ".b");

  const std::string type = j.value("type", "linear");
  if (type == "abs_diff") {
    if (ids.size() != 2) throw ValueError(who + ": abs_diff needs exactly two agents");
    const MatrixXd S = matrix_from_json(j.at("select"), who + ".select");
    const auto& ai = agents[static_cast<std::size_t>(ids[0])];
    const auto& aj = agents[static_cast<std::size_t>(ids[1])];
    if (S.cols() != ai.n() || S.cols() != aj.n()) throw DimensionError(who + ": selector width must equal n");
    if (S.rows() != b.size()) throw DimensionError(who + ": selector rows must match b");
    return CouplingSpec::abs_difference(ids[0], ids[1], S, b, ai.m(), aj.m());
  }
  if (type != "linear") throw ParseError(who + ": unknown coupling type '" + type + "'");

  CouplingGroup g;
  g.b = b;
  for (int id : ids) {
    const auto& a = agents[static_cast<std::size_t>(id)];
    const std::string key = std::to_string(id);
    CouplingBlock blk{id, MatrixXd::Zero(b.size(), a.m()), MatrixXd::Zero(b.size(), a.n())};
    if (j.contains("Eu") && j.at("Eu").contains(key)) blk.Eu = matrix_from_json(j.at("Eu").at(key), who + ".Eu");
    if (j.contains("Ex") && j.at("Ex").contains(key)) blk.Ex = matrix_from_json(j.at("Ex").at(key), who + ".Ex");
    if (blk.Eu.rows() != b.size() || blk.Eu.cols() != a.m() || blk.Ex.rows() != b.size() ||
        blk.Ex.cols() != a.n()) {
      throw DimensionError(who + ": block for agent " + key + " has wrong shape");
    }
    g.blocks.push_back(std::move(blk));
  }
  return g;
}

}  // namespace

MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return MatrixXd::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ParseError(what + ": expected a non-empty array");
  if (!j.front().is_array()) {
    VectorXd v = vector_from_json(j, what);
    return v;
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  MatrixXd M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array()) throw ParseError(what + ": expected nested arrays");
    if (static_cast<Eigen::Index>(row.size()) != cols) throw DimensionError(what + ": ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = number(row[static_cast<std::size_t>(c)], what);
  }
  return M;
}

VectorXd vector_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return VectorXd::Constant(1, j.get<double>());
  if (!j.is_array()) throw ParseError(what + ": expected an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Eigen::Index>(k)) = number(j[k], what);
  return v;
}

json to_json(const MatrixXd& M) {
  json out = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

json to_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

Scenario scenario_from_json(const json& doc) {
  try {
    if (!doc.is_object()) throw ParseError("scenario: expected a JSON object");
    Scenario s;
    s.name = doc.value("name", "scenario");
    if (!doc.contains("agents") || !doc.at("agents").is_array()) throw ParseError("scenario: missing \"agents\"");
    const auto& agents = doc.at("agents");
    if (agents.empty()) throw ValueError("scenario has no agents");
    for (std::size_t i = 0; i < agents.size(); ++i) s.agents.push_back(agent_from_json(agents[i], i));
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const auto& a = agents[i];
      const auto n = s.agents[i].n();
      s.initial_states.push_back(a.contains("x0") ? vector_from_json(a.at("x0"), "x0") : VectorXd::Zero(n));
      if (a.contains("target")) {
        if (s.targets.empty() && i > 0) {
          for (std::size_t k = 0; k < i; ++k) s.targets.push_back(VectorXd::Zero(s.agents[k].n()));
        }
        s.targets.push_back(vector_from_json(a.at("target"), "target"));
      } else if (!s.targets.empty()) {
        s.targets.push_back(VectorXd::Zero(n));
      }
    }
    if (doc.contains("coupling")) {
      const auto& rows = doc.at("coupling");
      if (!rows.is_array()) throw ParseError("scenario: \"coupling\" must be an array");
      for (std::size_t k = 0; k < rows.size(); ++k) s.coupling.groups.push_back(coupling_from_json(rows[k], s.agents, k));
    }
    s.horizon = doc.value("horizon", 1);
    s.epsilon = doc.value("epsilon", 1e-3);
    s.iterations = doc.value("iterations", 1);
    s.sim_steps = doc.value("sim_steps", 1);
    s.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("alpha") && !doc.at("alpha").is_null()) s.alpha = number(doc.at("alpha"), "alpha");
    s.hash = content_hash(doc);
    check_dimensions(s);
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("malformed scenario file " + path.string() + ": " + e.what());
  }
  return scenario_from_json(doc);
}

json scenario_to_json(const Scenario& s) {
  json doc;
  doc["name"] = s.name;
  doc["horizon"] = s.horizon;
  doc["epsilon"] = s.epsilon;
  doc["iterations"] = s.iterations;
  doc["sim_steps"] = s.sim_steps;
  doc["seed"] = s.seed;
  if (s.alpha) doc["alpha"] = *s.alpha;
  doc["agents"] = json::array();
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto& a = s.agents[i];
    json ja;
    ja["name"] = a.name;
    ja["A"] = to_json(a.A);
    ja["B"] = to_json(a.B);
    ja["Q"] = to_json(a.Q);
    ja["R"] = to_json(a.R);
    ja["input"] = {{"C", to_json(a.input_poly.C)}, {"c", to_json(a.input_poly.c)}};
    ja["state"] = {{"C", to_json(a.state_poly.C)}, {"c", to_json(a.state_poly.c)}};
    if (a.terminal_mode == TerminalMode::Equality) {
      ja["terminal"] = "equality";
    } else {
      ja["P"] = to_json(a.P);
      ja["terminal"] = {{"C", to_json(a.terminal_poly.C)}, {"c", to_json(a.terminal_poly.c)}};
    }
    ja["disturbance_bound"] = to_json(a.disturbance_bound);
    if (!s.initial_states.empty()) ja["x0"] = to_json(s.initial_states[i]);
    if (!s.targets.empty()) ja["target"] = to_json(s.targets[i]);
    doc["agents"].push_back(std::move(ja));
  }
  doc["coupling"] = json::array();
  for (const auto& g : s.coupling.groups) {
    json jg;
    jg["agents"] = json::array();
    jg["Eu"] = json::object();
    jg["Ex"] = json::object();
    for (const auto& blk : g.blocks) {
      jg["agents"].push_back(blk.agent);
      jg["Eu"][std::to_string(blk.agent)] = to_json(blk.Eu);
      jg["Ex"][std::to_string(blk.agent)] = to_json(blk.Ex);
    }
    jg["b"] = to_json(g.b);
    doc["coupling"].push_back(std::move(jg));
  }
  return doc;
}

std::string content_hash(const json& doc) {
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tdmpc
