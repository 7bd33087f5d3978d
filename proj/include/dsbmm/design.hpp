#pragma once

#include <span>
#include <vector>

namespace dsbmm {

/// One effect group U of the saturated design: a nonempty subset of layers
/// (0-based, ascending) and its contiguous column span in the design row.
struct EffectGroup {
  std::vector<int> layers;
  int offset = 0;  // first column (column 0 is the intercept)
  int size = 0;    // s(U) = prod_{m in U} (Q_m - 1)

  bool contains(int m) const;
};

/// Column layout of the saturated multinomial design shared by every
/// layer's transition model.
///
/// Groups are ordered singletons first (ascending layer), then pairs in
/// lexicographic order, then larger subsets. Inside a group the levels of
/// the participating layers are laid out in mixed radix with the
/// highest-numbered layer varying fastest. The same convention orders joint
/// states: `joint_index` treats layer 0 as the slowest digit.
class DesignLayout {
 public:
  DesignLayout() = default;
  explicit DesignLayout(std::vector<int> n_blocks);

  int n_layers() const { return static_cast<int>(n_blocks_.size()); }
  const std::vector<int>& n_blocks() const { return n_blocks_; }

  /// p + 1, intercept included.
  int row_length() const { return row_length_; }
  /// p, the number of non-intercept effects.
  int n_effects() const { return row_length_ - 1; }
  const std::vector<EffectGroup>& groups() const { return groups_; }
  /// Index into groups() of the singleton {m}.
  int main_group(int m) const { return main_group_[m]; }

  int n_joint_states() const { return n_joint_; }
  int joint_index(std::span<const int> z) const;
  std::vector<int> joint_state(int index) const;
  /// Joint index after replacing layer m's entry of state `index` by q.
  int with_layer(int index, int m, int q) const;
  int layer_of(int index, int m) const { return (index / stride_[m]) % n_blocks_[m]; }

  /// Sorted columns equal to 1 in the design row of a joint state.
  std::span<const int> active_columns(int joint_index) const {
    return {active_.data() + active_offset_[joint_index],
            static_cast<std::size_t>(active_offset_[joint_index + 1] - active_offset_[joint_index])};
  }

  /// Dense design row for a previous joint state. Throws StateOutOfRange.
  std::vector<double> design_row(std::span<const int> z_prev) const;

  /// Column of group g at the given per-layer levels (levels of layers in
  /// the group only, each < Q_m - 1).
  int column(int g, std::span<const int> levels) const;

  bool operator==(const DesignLayout& o) const { return n_blocks_ == o.n_blocks_; }

 private:
  std::vector<int> n_blocks_;
  std::vector<EffectGroup> groups_;
  std::vector<int> main_group_;
  std::vector<int> stride_;
  int row_length_ = 1;
  int n_joint_ = 1;
  std::vector<int> active_;
  std::vector<int> active_offset_;
};

}  // namespace dsbmm
