#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace dsbmm {

/// Static description of one network layer.
struct LayerSpec {
  int layer_id = 1;  // 1-based, as written to files
  bool directed = true;
  bool weighted = false;
  int n_blocks = 1;
  int covariate_dim = 0;

  bool operator==(const LayerSpec&) const = default;
};

/// Dense storage of one layer over all time points. Index order is
/// (t, i, j) for Y and D, (t, i, j, k) for X.
struct LayerTensor {
  LayerSpec spec;
  std::vector<double> y;
  std::vector<std::uint8_t> d;
  std::vector<double> x;
};

/// Observed dynamic multi-layer network. All indices are 0-based.
class MultiLayerPanel {
 public:
  MultiLayerPanel() = default;
  MultiLayerPanel(int n_nodes, int n_times, std::vector<LayerSpec> specs);

  int n_nodes() const { return n_nodes_; }
  int n_times() const { return n_times_; }
  int n_layers() const { return static_cast<int>(layers_.size()); }
  const LayerSpec& spec(int l) const { return layers_[l].spec; }
  std::vector<LayerSpec> specs() const;

  double y(int l, int i, int j, int t) const { return layers_[l].y[cell(i, j, t)]; }
  bool d(int l, int i, int j, int t) const { return layers_[l].d[cell(i, j, t)] != 0; }
  std::span<const double> x(int l, int i, int j, int t) const {
    const auto k = static_cast<std::size_t>(layers_[l].spec.covariate_dim);
    return {layers_[l].x.data() + cell(i, j, t) * k, k};
  }
  std::span<double> x_mut(int l, int i, int j, int t) {
    const auto k = static_cast<std::size_t>(layers_[l].spec.covariate_dim);
    return {layers_[l].x.data() + cell(i, j, t) * k, k};
  }

  /// Marks (i,j,t) present with weight y (1 on unweighted layers). Does
  /// not mirror; callers handle undirected symmetry.
  void set_edge(int l, int i, int j, int t, double y);
  void clear_edge(int l, int i, int j, int t);
  /// Raw writes that bypass the D/Y coupling, for validation tests and loaders.
  void set_raw(int l, int i, int j, int t, bool d, double y);

  const LayerTensor& layer(int l) const { return layers_[l]; }

  bool operator==(const MultiLayerPanel&) const;

 private:
  std::size_t cell(int i, int j, int t) const {
    return (static_cast<std::size_t>(t) * n_nodes_ + i) * n_nodes_ + j;
  }

  int n_nodes_ = 0;
  int n_times_ = 0;
  std::vector<LayerTensor> layers_;
};

/// Latent block labels Z[i,t,l], stored 0-based.
class MembershipState {
 public:
  MembershipState() = default;
  MembershipState(int n_nodes, int n_times, std::vector<int> n_blocks);

  int n_nodes() const { return n_nodes_; }
  int n_times() const { return n_times_; }
  int n_layers() const { return static_cast<int>(n_blocks_.size()); }
  const std::vector<int>& n_blocks() const { return n_blocks_; }

  int at(int i, int t, int l) const { return labels_[index(i, t, l)]; }
  void set(int i, int t, int l, int q) { labels_[index(i, t, l)] = q; }

  /// Joint state vector of node i at time t across all layers.
  std::vector<int> joint(int i, int t) const;

  /// Pooled (i,t) labels of one layer, ordered t-major.
  std::vector<int> layer_labels(int l) const;

  const std::vector<int>& raw() const { return labels_; }
  bool operator==(const MembershipState&) const = default;

  /// Throws StateOutOfRange if any label leaves its layer's range.
  void check() const;

 private:
  std::size_t index(int i, int t, int l) const {
    return (static_cast<std::size_t>(t) * n_nodes_ + i) * n_blocks_.size() + l;
  }

  int n_nodes_ = 0;
  int n_times_ = 0;
  std::vector<int> n_blocks_;
  std::vector<int> labels_;
};

/// Throws dsbmm::Error naming the first offending (l,i,j,t), 1-based in the
/// message, if any panel invariant is broken.
void validate_panel(const MultiLayerPanel& panel);

/// Loads a panel from per-layer edge CSVs (`i,j,t,y`), optional covariate
/// CSVs (`i,j,t,x1..xk`) and a JSON spec file. The spec may be an array of
/// layer objects, in which case N and T are inferred from the largest index
/// seen, or an object `{n_nodes, n_times, layers: [...]}`.
MultiLayerPanel load_panel(const std::vector<std::filesystem::path>& edge_files,
                           const std::vector<std::optional<std::filesystem::path>>& covariate_files,
                           const std::filesystem::path& spec_file);

/// Loads the layout written by save_panel.
MultiLayerPanel load_panel_dir(const std::filesystem::path& dir);

/// Writes `spec.json`, `layer<l>_edges.csv` and, when covariates exist,
/// `layer<l>_covariates.csv`. Undirected layers are written once per
/// unordered pair (i < j).
void save_panel(const MultiLayerPanel& panel, const std::filesystem::path& dir);

std::filesystem::path edge_file_name(int layer_id);
std::filesystem::path covariate_file_name(int layer_id);

}  // namespace dsbmm
