#include "dsbmm/design.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "dsbmm/errors.hpp"

namespace dsbmm {

bool EffectGroup::contains(int m) const { return std::find(layers.begin(), layers.end(), m) != layers.end(); }

DesignLayout::DesignLayout(std::vector<int> n_blocks) : n_blocks_(std::move(n_blocks)) {
  const int L = n_layers();
  if (L < 1 || L > 16) throw Error(ErrorCode::InvalidParameter, "layer count must be in 1..16");
  for (int q : n_blocks_)
    if (q < 1 || q > 255) throw Error(ErrorCode::InvalidParameter, "block counts must be in 1..255");

  std::vector<std::vector<int>> subsets;
  for (unsigned mask = 1; mask < (1u << L); ++mask) {
    std::vector<int> s;
    for (int m = 0; m < L; ++m)
      if (mask & (1u << m)) s.push_back(m);
    subsets.push_back(std::move(s));
  }
  std::sort(subsets.begin(), subsets.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });

  main_group_.assign(L, -1);
  int offset = 1;
  for (auto& s : subsets) {
    EffectGroup g;
    g.size = 1;
    for (int m : s) g.size *= n_blocks_[m] - 1;
    g.offset = offset;
    offset += g.size;
    g.layers = std::move(s);
    if (g.layers.size() == 1) main_group_[g.layers[0]] = static_cast<int>(groups_.size());
    groups_.push_back(std::move(g));
  }
  row_length_ = offset;

  stride_.assign(L, 1);
  for (int m = L - 2; m >= 0; --m) stride_[m] = stride_[m + 1] * n_blocks_[m + 1];
  n_joint_ = stride_[0] * n_blocks_[0];

  active_offset_.push_back(0);
  for (int s = 0; s < n_joint_; ++s) {
    const auto z = joint_state(s);
    active_.push_back(0);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const auto& grp = groups_[g];
      bool on = true;
      std::vector<int> levels;
      for (int m : grp.layers) {
        if (z[m] == n_blocks_[m] - 1) {
          on = false;
          break;
        }
        levels.push_back(z[m]);
      }
      if (on && grp.size > 0) active_.push_back(column(static_cast<int>(g), levels));
    }
    active_offset_.push_back(static_cast<int>(active_.size()));
  }
}

int DesignLayout::joint_index(std::span<const int> z) const {
  int idx = 0;
  for (int m = 0; m < n_layers(); ++m) idx += z[m] * stride_[m];
  return idx;
}

std::vector<int> DesignLayout::joint_state(int index) const {
  std::vector<int> z(n_blocks_.size());
  for (int m = 0; m < n_layers(); ++m) z[m] = (index / stride_[m]) % n_blocks_[m];
  return z;
}

int DesignLayout::with_layer(int index, int m, int q) const {
  return index + (q - layer_of(index, m)) * stride_[m];
}

int DesignLayout::column(int g, std::span<const int> levels) const {
  const auto& grp = groups_[g];
  int within = 0;
  for (std::size_t k = 0; k < grp.layers.size(); ++k) within = within * (n_blocks_[grp.layers[k]] - 1) + levels[k];
  return grp.offset + within;
}

std::vector<double> DesignLayout::design_row(std::span<const int> z_prev) const {
  if (static_cast<int>(z_prev.size()) != n_layers()) {
    throw Error(ErrorCode::DimensionMismatch, "joint state has the wrong number of layers");
  }
  for (int m = 0; m < n_layers(); ++m) {
    if (z_prev[m] < 0 || z_prev[m] >= n_blocks_[m]) {
      throw Error(ErrorCode::StateOutOfRange, "layer " + std::to_string(m + 1) + " state " + std::to_string(z_prev[m] + 1));
    }
  }
  std::vector<double> row(row_length_, 0.0);
  for (int c : active_columns(joint_index(z_prev))) row[c] = 1.0;
  return row;
}

}  // namespace dsbmm
