#include "cellnav/io.hpp"

#include "cellnav/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace cellnav::io {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::ParseError, "cannot write '" + path + "'");
  out << bytes;
}

namespace {

json point_json(const Point& p) { return json::array({p.x(), p.y()}); }

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
  return a;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorKind::SchemaError, std::string("missing key '") + key + "'");
  return j.at(key);
}

Eigen::VectorXd to_vector(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::SchemaError, "expected a number list");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::SchemaError, "expected a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd to_matrix(const json& j, Eigen::Index cols) {
  if (!j.is_array()) throw Error(ErrorKind::SchemaError, "expected a matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Eigen::VectorXd row = to_vector(j[i]);
    if (row.size() != cols) throw Error(ErrorKind::SchemaError, "matrix rows have inconsistent length");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

Point to_point(const json& j) {
  const Eigen::VectorXd v = to_vector(j);
  if (v.size() != 2) throw Error(ErrorKind::SchemaError, "expected a 2-D point");
  return {v(0), v(1)};
}

std::vector<int> to_ints(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::SchemaError, "expected an integer list");
  std::vector<int> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw Error(ErrorKind::SchemaError, "expected an integer");
    out.push_back(v.get<int>());
  }
  return out;
}

json decomposition_json(const CellDecomposition& d) {
  json j;
  j["seed"] = d.seed;
  json cells = json::array();
  for (std::size_t i = 0; i < d.cells.size(); ++i) {
    json c;
    c["A"] = matrix_json(d.cells[i].A());
    c["b"] = vector_json(d.cells[i].b());
    json verts = json::array();
    for (const auto& v : vertices_2d(d.cells[i])) verts.push_back(point_json(v));
    c["vertices"] = verts;
    c["landmarks"] = d.landmarks[i];
    c["generator"] = point_json(d.generators[i]);
    c["parent"] = d.parents[i];
    cells.push_back(c);
  }
  j["cells"] = cells;
  json adj = json::array();
  for (const auto& [a, b] : d.adjacency) adj.push_back(json::array({a, b}));
  j["adjacency"] = adj;
  return j;
}

}  // namespace

std::string decomposition_to_json(const CellDecomposition& d) { return decomposition_json(d).dump(2) + "\n"; }

std::string decomposition_hash(const CellDecomposition& d) { return hex64(fnv1a64(decomposition_json(d).dump())); }

CellDecomposition decomposition_from_json(const std::string& text) {
  const json j = parse_json(text);
  CellDecomposition d;
  const json& seed = field(j, "seed");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) throw Error(ErrorKind::SchemaError, "seed must be an integer");
  d.seed = seed.get<std::uint64_t>();
  const json& cells = field(j, "cells");
  if (!cells.is_array() || cells.empty()) throw Error(ErrorKind::SchemaError, "'cells' must be a nonempty list");
  for (const auto& c : cells) {
    const Eigen::VectorXd b = to_vector(field(c, "b"));
    const Eigen::MatrixXd A = to_matrix(field(c, "A"), 2);
    if (A.rows() != b.size()) throw Error(ErrorKind::SchemaError, "cell rows and offsets differ in length");
    d.cells.emplace_back(A, b);
    d.landmarks.push_back(to_ints(field(c, "landmarks")));
    d.generators.push_back(to_point(field(c, "generator")));
    d.parents.push_back(field(c, "parent").get<int>());
  }
  for (const auto& e : field(j, "adjacency")) {
    const auto pair = to_ints(e);
    if (pair.size() != 2) throw Error(ErrorKind::SchemaError, "adjacency entries are pairs");
    d.adjacency.emplace_back(pair[0], pair[1]);
  }
  return d;
}

std::string gains_to_json(const GainsFile& f) {
  json j;
  j["decomposition_hash"] = f.decomposition_hash;
  const SynthesisConfig& c = f.config;
  json cfg;
  cfg["alphas"] = c.alphas;
  cfg["clf_alphas"] = c.clf_alphas;
  cfg["eta"] = c.eta;
  cfg["omega_b"] = c.omega_b;
  cfg["omega_l"] = c.omega_l;
  cfg["delta_min"] = c.delta_min ? json(*c.delta_min) : json(nullptr);
  cfg["regularize"] = c.regularize;
  cfg["zero_bias"] = c.zero_bias;
  cfg["allow_mixed_relative_degree"] = c.allow_mixed_relative_degree;
  j["config"] = cfg;
  json cells = json::array();
  for (const auto& g : f.gains.cells) {
    json cj;
    cj["landmarks"] = g.landmarks;
    cj["Kp"] = matrix_json(g.Kp);
    cj["Kd"] = matrix_json(g.Kd);
    cj["Kb"] = vector_json(g.Kb);
    cj["delta_l"] = g.delta_l;
    cj["delta_b"] = vector_json(g.delta_b);
    cells.push_back(cj);
  }
  j["cells"] = cells;
  const ObjectiveBreakdown& o = f.gains.objective;
  j["objective"] = {{"phi_t", o.phi_t}, {"phi_p", o.phi_p}, {"margin_b", o.margin_b}, {"margin_l", o.margin_l},
                    {"total", o.total()}};
  j["warnings"] = f.gains.warnings;
  return j.dump(2) + "\n";
}

GainsFile gains_from_json(const std::string& text) {
  const json j = parse_json(text);
  GainsFile f;
  f.decomposition_hash = field(j, "decomposition_hash").get<std::string>();
  const json& cfg = field(j, "config");
  SynthesisConfig& c = f.config;
  try {
    c.alphas = field(cfg, "alphas").get<std::vector<double>>();
    c.clf_alphas = field(cfg, "clf_alphas").get<std::vector<double>>();
    c.eta = field(cfg, "eta").get<double>();
    c.omega_b = field(cfg, "omega_b").get<double>();
    c.omega_l = field(cfg, "omega_l").get<double>();
    const json& dm = field(cfg, "delta_min");
    c.delta_min = dm.is_null() ? std::nullopt : std::optional<double>(dm.get<double>());
    c.regularize = field(cfg, "regularize").get<bool>();
    c.zero_bias = field(cfg, "zero_bias").get<bool>();
    c.allow_mixed_relative_degree = field(cfg, "allow_mixed_relative_degree").get<bool>();
    for (const auto& cj : field(j, "cells")) {
      CellGains g;
      g.landmarks = to_ints(field(cj, "landmarks"));
      const Eigen::VectorXd Kb = to_vector(field(cj, "Kb"));
      g.Kb = Kb;
      const json& kp = field(cj, "Kp");
      const json& kd = field(cj, "Kd");
      g.Kp = to_matrix(kp, kp.empty() ? 0 : static_cast<Eigen::Index>(kp[0].size()));
      g.Kd = to_matrix(kd, kd.empty() ? 0 : static_cast<Eigen::Index>(kd[0].size()));
      if (g.Kp.rows() != Kb.size() || (g.Kd.rows() != 0 && g.Kd.rows() != Kb.size())) {
        throw Error(ErrorKind::SchemaError, "gain matrices have inconsistent row counts");
      }
      if (g.Kd.rows() == 0) g.Kd.resize(Kb.size(), 0);
      g.delta_l = field(cj, "delta_l").get<double>();
      g.delta_b = to_vector(field(cj, "delta_b"));
      f.gains.cells.push_back(std::move(g));
    }
    const json& o = field(j, "objective");
    f.gains.objective = {field(o, "phi_t").get<double>(), field(o, "phi_p").get<double>(),
                         field(o, "margin_b").get<double>(), field(o, "margin_l").get<double>()};
    f.gains.warnings = field(j, "warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaError, e.what());
  }
  return f;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

std::string trajectory_to_csv(const Trajectory& traj, const TrajectoryHeader& header, int stride) {
  if (stride < 1) throw Error(ErrorKind::InvalidConfig, "stride must be positive");
  std::string out = "# seed=" + std::to_string(header.seed) + " decomposition=" + header.decomposition_hash + " eta=";
  append_double(out, header.eta);
  out += " mode=" + header.mode + "\n";
  const Eigen::Index n = traj.samples.empty() ? 0 : traj.samples.front().x.size();
  const Eigen::Index m = traj.samples.empty() ? 0 : traj.samples.front().u.size();
  out += "t";
  for (Eigen::Index i = 1; i <= n; ++i) out += ",x" + std::to_string(i);
  for (Eigen::Index i = 1; i <= m; ++i) out += ",u" + std::to_string(i);
  out += ",cell\n";
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    if (k % static_cast<std::size_t>(stride) != 0 && k + 1 != traj.samples.size()) continue;
    const Sample& s = traj.samples[k];
    append_double(out, s.t);
    for (Eigen::Index i = 0; i < n; ++i) {
      out += ',';
      append_double(out, s.x(i));
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      out += ',';
      append_double(out, s.u(i));
    }
    out += ',' + std::to_string(s.cell) + '\n';
  }
  return out;
}

TrajectoryTable trajectory_from_csv(const std::string& text) {
  TrajectoryTable table;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw Error(ErrorKind::ParseError, "missing trajectory header comment");
  std::istringstream meta(line.substr(2));
  std::string kv;
  while (meta >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    try {
      if (key == "seed") table.header.seed = std::stoull(val);
      if (key == "decomposition") table.header.decomposition_hash = val;
      if (key == "eta") table.header.eta = std::stod(val);
      if (key == "mode") table.header.mode = val;
    } catch (const std::exception&) {
      throw Error(ErrorKind::ParseError, "bad header value '" + kv + "'");
    }
  }
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "missing trajectory column header");
  int nx = 0;
  int nu = 0;
  {
    std::istringstream cols(line);
    std::string c;
    while (std::getline(cols, c, ',')) {
      if (c.rfind('x', 0) == 0) ++nx;
      if (c.rfind('u', 0) == 0) ++nu;
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string c;
    std::vector<std::string> cells;
    while (std::getline(row, c, ',')) cells.push_back(c);
    if (cells.size() != static_cast<std::size_t>(nx + nu + 2)) throw Error(ErrorKind::ParseError, "trajectory row has wrong width");
    try {
      table.t.push_back(std::stod(cells[0]));
      Eigen::VectorXd x(nx);
      Eigen::VectorXd u(nu);
      for (int i = 0; i < nx; ++i) x(i) = std::stod(cells[static_cast<std::size_t>(1 + i)]);
      for (int i = 0; i < nu; ++i) u(i) = std::stod(cells[static_cast<std::size_t>(1 + nx + i)]);
      table.x.push_back(x);
      table.u.push_back(u);
      table.cell.push_back(std::stoi(cells.back()));
    } catch (const std::exception&) {
      throw Error(ErrorKind::ParseError, "bad number in trajectory row");
    }
  }
  return table;
}

}  // namespace cellnav::io
