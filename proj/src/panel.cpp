#include "dsbmm/panel.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>

#include <json.hpp>

#include "dsbmm/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dsbmm {

MultiLayerPanel::MultiLayerPanel(int n_nodes, int n_times, std::vector<LayerSpec> specs)
    : n_nodes_(n_nodes), n_times_(n_times) {
  if (n_nodes < 1 || n_times < 1) {
    throw Error(ErrorCode::InvalidParameter, "panel needs at least one node and one time point");
  }
  const std::size_t cells = static_cast<std::size_t>(n_nodes) * n_nodes * n_times;
  layers_.reserve(specs.size());
  for (const auto& s : specs) {
    if (s.n_blocks < 1 || s.covariate_dim < 0) {
      throw Error(ErrorCode::InvalidParameter,
                  "layer " + std::to_string(s.layer_id) + ": n_blocks >= 1 and covariate_dim >= 0 required");
    }
    LayerTensor lt;
    lt.spec = s;
    lt.y.assign(cells, 0.0);
    lt.d.assign(cells, 0);
    lt.x.assign(cells * static_cast<std::size_t>(s.covariate_dim), 0.0);
    layers_.push_back(std::move(lt));
  }
}

std::vector<LayerSpec> MultiLayerPanel::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_) out.push_back(l.spec);
  return out;
}

void MultiLayerPanel::set_edge(int l, int i, int j, int t, double y) {
  auto& lt = layers_[l];
  const auto c = cell(i, j, t);
  lt.d[c] = 1;
  lt.y[c] = lt.spec.weighted ? y : 1.0;
}

void MultiLayerPanel::clear_edge(int l, int i, int j, int t) {
  auto& lt = layers_[l];
  const auto c = cell(i, j, t);
  lt.d[c] = 0;
  lt.y[c] = 0.0;
}

void MultiLayerPanel::set_raw(int l, int i, int j, int t, bool d, double y) {
  auto& lt = layers_[l];
  const auto c = cell(i, j, t);
  lt.d[c] = d ? 1 : 0;
  lt.y[c] = y;
}

bool MultiLayerPanel::operator==(const MultiLayerPanel& o) const {
  if (n_nodes_ != o.n_nodes_ || n_times_ != o.n_times_ || layers_.size() != o.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = o.layers_[l];
    if (!(a.spec == b.spec) || a.d != b.d || a.y != b.y || a.x != b.x) return false;
  }
  return true;
}

MembershipState::MembershipState(int n_nodes, int n_times, std::vector<int> n_blocks)
    : n_nodes_(n_nodes), n_times_(n_times), n_blocks_(std::move(n_blocks)) {
  labels_.assign(static_cast<std::size_t>(n_nodes_) * n_times_ * n_blocks_.size(), 0);
}

std::vector<int> MembershipState::joint(int i, int t) const {
  std::vector<int> z(n_blocks_.size());
  for (std::size_t l = 0; l < n_blocks_.size(); ++l) z[l] = at(i, t, static_cast<int>(l));
  return z;
}

std::vector<int> MembershipState::layer_labels(int l) const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n_nodes_) * n_times_);
  for (int t = 0; t < n_times_; ++t)
    for (int i = 0; i < n_nodes_; ++i) out.push_back(at(i, t, l));
  return out;
}

void MembershipState::check() const {
  for (int t = 0; t < n_times_; ++t)
    for (int i = 0; i < n_nodes_; ++i)
      for (int l = 0; l < n_layers(); ++l) {
        const int q = at(i, t, l);
        if (q < 0 || q >= n_blocks_[l]) {
          throw Error(ErrorCode::StateOutOfRange, "Z[" + std::to_string(i + 1) + "," + std::to_string(t + 1) +
                                                      "," + std::to_string(l + 1) + "]=" + std::to_string(q + 1));
        }
      }
}

namespace {

std::string where(int l, int i, int j, int t) {
  std::ostringstream os;
  os << "(layer=" << l + 1 << ", i=" << i + 1 << ", j=" << j + 1 << ", t=" << t + 1 << ")";
  return os.str();
}

}  // namespace

void validate_panel(const MultiLayerPanel& p) {
  const int n = p.n_nodes();
  for (int l = 0; l < p.n_layers(); ++l) {
    const auto& s = p.spec(l);
    for (int t = 0; t < p.n_times(); ++t) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const bool d = p.d(l, i, j, t);
          const double y = p.y(l, i, j, t);
          if (i == j) {
            if (d || y != 0.0) throw Error(ErrorCode::SelfLoopPresent, where(l, i, j, t));
            continue;
          }
          if (s.weighted) {
            if (d != (y != 0.0)) throw Error(ErrorCode::WeightIndicatorMismatch, where(l, i, j, t));
            if (d && !(y > 0.0)) throw Error(ErrorCode::NonPositiveWeight, where(l, i, j, t));
          } else if (y != (d ? 1.0 : 0.0)) {
            throw Error(ErrorCode::WeightIndicatorMismatch, where(l, i, j, t));
          }
          if (!s.directed && j > i) {
            if (d != p.d(l, j, i, t) || y != p.y(l, j, i, t))
              throw Error(ErrorCode::AsymmetricUndirectedLayer, where(l, i, j, t));
            auto a = p.x(l, i, j, t);
            auto b = p.x(l, j, i, t);
            for (std::size_t k = 0; k < a.size(); ++k)
              if (a[k] != b[k]) throw Error(ErrorCode::AsymmetricUndirectedLayer, where(l, i, j, t));
          }
        }
      }
    }
  }
}

fs::path edge_file_name(int layer_id) { return "layer" + std::to_string(layer_id) + "_edges.csv"; }
fs::path covariate_file_name(int layer_id) { return "layer" + std::to_string(layer_id) + "_covariates.csv"; }

namespace {

struct CsvRow {
  int line = 0;
  std::vector<std::string> fields;
};

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<CsvRow> read_csv(const fs::path& path, const std::vector<std::string>& header_prefix,
                             std::size_t n_columns) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  std::vector<CsvRow> rows;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto f = split(line);
    if (!header_seen) {
      header_seen = true;
      if (f.size() != n_columns) {
        throw Error(ErrorCode::ParseError, path.string() + " line 1: expected " + std::to_string(n_columns) +
                                               " columns in header");
      }
      for (std::size_t k = 0; k < header_prefix.size(); ++k) {
        if (f[k] != header_prefix[k]) {
          throw Error(ErrorCode::ParseError,
                      path.string() + " line 1 column " + std::to_string(k + 1) + ": expected '" + header_prefix[k] + "'");
        }
      }
      continue;
    }
    if (f.size() != n_columns) {
      throw Error(ErrorCode::ParseError, path.string() + " line " + std::to_string(lineno) + ": expected " +
                                             std::to_string(n_columns) + " columns, got " + std::to_string(f.size()));
    }
    rows.push_back({lineno, std::move(f)});
  }
  return rows;
}

long parse_index(const std::string& s, const fs::path& path, int line, int col) {
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno != 0) {
    throw Error(ErrorCode::ParseError,
                path.string() + " line " + std::to_string(line) + " column " + std::to_string(col) + ": bad integer '" + s + "'");
  }
  return v;
}

double parse_real(const std::string& s, const fs::path& path, int line, int col) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    throw Error(ErrorCode::ParseError,
                path.string() + " line " + std::to_string(line) + " column " + std::to_string(col) + ": bad number '" + s + "'");
  }
  return v;
}

LayerSpec spec_from_json(const json& j) {
  LayerSpec s;
  try {
    s.layer_id = j.at("layer_id").get<int>();
    s.directed = j.at("directed").get<bool>();
    s.weighted = j.at("weighted").get<bool>();
    s.n_blocks = j.at("n_blocks").get<int>();
    s.covariate_dim = j.value("covariate_dim", 0);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("layer spec: ") + e.what());
  }
  if (s.n_blocks < 1 || s.covariate_dim < 0) {
    throw Error(ErrorCode::ParseError, "layer " + std::to_string(s.layer_id) + ": invalid n_blocks/covariate_dim");
  }
  return s;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

MultiLayerPanel load_panel(const std::vector<fs::path>& edge_files,
                           const std::vector<std::optional<fs::path>>& covariate_files, const fs::path& spec_file) {
  std::ifstream sin(spec_file);
  if (!sin) throw Error(ErrorCode::IoError, "cannot open " + spec_file.string());
  json spec_json;
  try {
    sin >> spec_json;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, spec_file.string() + ": " + e.what());
  }
  std::vector<LayerSpec> specs;
  std::optional<int> n_nodes;
  std::optional<int> n_times;
  const json* layers_json = &spec_json;
  if (spec_json.is_object()) {
    if (spec_json.contains("n_nodes")) n_nodes = spec_json["n_nodes"].get<int>();
    if (spec_json.contains("n_times")) n_times = spec_json["n_times"].get<int>();
    if (!spec_json.contains("layers")) throw Error(ErrorCode::ParseError, spec_file.string() + ": missing 'layers'");
    layers_json = &spec_json["layers"];
  }
  if (!layers_json->is_array()) throw Error(ErrorCode::ParseError, spec_file.string() + ": layers must be an array");
  for (const auto& j : *layers_json) specs.push_back(spec_from_json(j));

  if (edge_files.size() != specs.size()) {
    throw Error(ErrorCode::ParseError, "expected " + std::to_string(specs.size()) + " edge files, got " +
                                           std::to_string(edge_files.size()));
  }
  if (!covariate_files.empty() && covariate_files.size() != specs.size()) {
    throw Error(ErrorCode::ParseError, "covariate file list must match the layer count");
  }

  struct Parsed {
    std::vector<CsvRow> edges;
    std::vector<CsvRow> covs;
  };
  std::vector<Parsed> parsed(specs.size());
  long max_node = 0;
  long max_time = 0;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    parsed[l].edges = read_csv(edge_files[l], {"i", "j", "t", "y"}, 4);
    for (const auto& r : parsed[l].edges) {
      max_node = std::max({max_node, parse_index(r.fields[0], edge_files[l], r.line, 1),
                           parse_index(r.fields[1], edge_files[l], r.line, 2)});
      max_time = std::max(max_time, parse_index(r.fields[2], edge_files[l], r.line, 3));
    }
    if (!covariate_files.empty() && covariate_files[l]) {
      const auto k = static_cast<std::size_t>(specs[l].covariate_dim);
      parsed[l].covs = read_csv(*covariate_files[l], {"i", "j", "t"}, 3 + k);
      for (const auto& r : parsed[l].covs) {
        max_node = std::max({max_node, parse_index(r.fields[0], *covariate_files[l], r.line, 1),
                             parse_index(r.fields[1], *covariate_files[l], r.line, 2)});
        max_time = std::max(max_time, parse_index(r.fields[2], *covariate_files[l], r.line, 3));
      }
    }
  }
  const int n = n_nodes.value_or(static_cast<int>(std::max(max_node, 1L)));
  const int T = n_times.value_or(static_cast<int>(std::max(max_time, 1L)));
  MultiLayerPanel panel(n, T, specs);

  for (std::size_t l = 0; l < specs.size(); ++l) {
    const int li = static_cast<int>(l);
    const auto& s = specs[l];
    const auto& path = edge_files[l];
    std::unordered_set<long long> seen;
    auto key = [&](long i, long j, long t) { return (t * n + i) * static_cast<long long>(n) + j; };
    for (const auto& r : parsed[l].edges) {
      const long i = parse_index(r.fields[0], path, r.line, 1);
      const long j = parse_index(r.fields[1], path, r.line, 2);
      const long t = parse_index(r.fields[2], path, r.line, 3);
      const double y = parse_real(r.fields[3], path, r.line, 4);
      if (i < 1 || i > n || j < 1 || j > n || t < 1 || t > T) {
        throw Error(ErrorCode::IndexOutOfRange, path.string() + " line " + std::to_string(r.line));
      }
      if (!seen.insert(key(i - 1, j - 1, t - 1)).second) {
        throw Error(ErrorCode::DuplicateDyadTime, path.string() + " line " + std::to_string(r.line));
      }
      const int a = static_cast<int>(i - 1), b = static_cast<int>(j - 1), c = static_cast<int>(t - 1);
      if (a == b) throw Error(ErrorCode::SelfLoopPresent, where(li, a, b, c));
      if (!s.weighted && y != 1.0) throw Error(ErrorCode::WeightIndicatorMismatch, where(li, a, b, c));
      if (s.weighted && y == 0.0) throw Error(ErrorCode::WeightIndicatorMismatch, where(li, a, b, c));
      if (s.weighted && y < 0.0) throw Error(ErrorCode::NonPositiveWeight, where(li, a, b, c));
      if (!s.directed) {
        // one orientation mirrors onto the other; both given must agree
        if (seen.count(key(j - 1, i - 1, t - 1)) && panel.y(li, b, a, c) != y) {
          throw Error(ErrorCode::AsymmetricUndirectedLayer, where(li, a, b, c));
        }
        panel.set_raw(li, b, a, c, true, y);
      }
      panel.set_raw(li, a, b, c, true, y);
    }
    if (!covariate_files.empty() && covariate_files[l]) {
      const auto& cpath = *covariate_files[l];
      std::unordered_set<long long> cseen;
      for (const auto& r : parsed[l].covs) {
        const long i = parse_index(r.fields[0], cpath, r.line, 1);
        const long j = parse_index(r.fields[1], cpath, r.line, 2);
        const long t = parse_index(r.fields[2], cpath, r.line, 3);
        if (i < 1 || i > n || j < 1 || j > n || t < 1 || t > T) {
          throw Error(ErrorCode::IndexOutOfRange, cpath.string() + " line " + std::to_string(r.line));
        }
        if (!cseen.insert(key(i - 1, j - 1, t - 1)).second) {
          throw Error(ErrorCode::DuplicateDyadTime, cpath.string() + " line " + std::to_string(r.line));
        }
        auto xs = panel.x_mut(li, static_cast<int>(i - 1), static_cast<int>(j - 1), static_cast<int>(t - 1));
        for (std::size_t k = 0; k < xs.size(); ++k) {
          xs[k] = parse_real(r.fields[3 + k], cpath, r.line, static_cast<int>(4 + k));
        }
        if (!s.directed && !cseen.count(key(j - 1, i - 1, t - 1))) {
          auto xm = panel.x_mut(li, static_cast<int>(j - 1), static_cast<int>(i - 1), static_cast<int>(t - 1));
          for (std::size_t k = 0; k < xs.size(); ++k) xm[k] = xs[k];
        }
      }
    }
  }
  validate_panel(panel);
  return panel;
}

MultiLayerPanel load_panel_dir(const fs::path& dir) {
  const fs::path spec_file = dir / "spec.json";
  std::ifstream sin(spec_file);
  if (!sin) throw Error(ErrorCode::IoError, "cannot open " + spec_file.string());
  json j;
  try {
    sin >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, spec_file.string() + ": " + e.what());
  }
  const json& layers = j.is_object() ? j.at("layers") : j;
  std::vector<fs::path> edges;
  std::vector<std::optional<fs::path>> covs;
  for (const auto& lj : layers) {
    const auto s = spec_from_json(lj);
    edges.push_back(dir / edge_file_name(s.layer_id));
    const auto cp = dir / covariate_file_name(s.layer_id);
    covs.push_back(fs::exists(cp) ? std::optional<fs::path>(cp) : std::nullopt);
  }
  return load_panel(edges, covs, spec_file);
}

void save_panel(const MultiLayerPanel& p, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  json spec;
  spec["n_nodes"] = p.n_nodes();
  spec["n_times"] = p.n_times();
  spec["layers"] = json::array();
  for (int l = 0; l < p.n_layers(); ++l) {
    const auto& s = p.spec(l);
    spec["layers"].push_back({{"layer_id", s.layer_id},
                              {"directed", s.directed},
                              {"weighted", s.weighted},
                              {"n_blocks", s.n_blocks},
                              {"covariate_dim", s.covariate_dim}});
  }
  {
    std::ofstream out(dir / "spec.json");
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / "spec.json").string());
    out << spec.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + (dir / "spec.json").string());
  }
  for (int l = 0; l < p.n_layers(); ++l) {
    const auto& s = p.spec(l);
    std::ofstream out(dir / edge_file_name(s.layer_id));
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / edge_file_name(s.layer_id)).string());
    out << "i,j,t,y\n";
    for (int t = 0; t < p.n_times(); ++t)
      for (int i = 0; i < p.n_nodes(); ++i)
        for (int j = s.directed ? 0 : i + 1; j < p.n_nodes(); ++j)
          if (p.d(l, i, j, t)) out << i + 1 << ',' << j + 1 << ',' << t + 1 << ',' << fmt17(p.y(l, i, j, t)) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for layer " + std::to_string(s.layer_id));

    if (s.covariate_dim > 0) {
      std::ofstream cout_(dir / covariate_file_name(s.layer_id));
      if (!cout_) throw Error(ErrorCode::IoError, "cannot write covariates for layer " + std::to_string(s.layer_id));
      cout_ << "i,j,t";
      for (int k = 0; k < s.covariate_dim; ++k) cout_ << ",x" << k + 1;
      cout_ << '\n';
      for (int t = 0; t < p.n_times(); ++t)
        for (int i = 0; i < p.n_nodes(); ++i)
          for (int j = s.directed ? 0 : i + 1; j < p.n_nodes(); ++j) {
            if (i == j) continue;
            cout_ << i + 1 << ',' << j + 1 << ',' << t + 1;
            for (double v : p.x(l, i, j, t)) cout_ << ',' << fmt17(v);
            cout_ << '\n';
          }
      if (!cout_) throw Error(ErrorCode::IoError, "write failed for covariates");
    }
  }
}

}  // namespace dsbmm
