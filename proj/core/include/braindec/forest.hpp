#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "braindec/signal_features.hpp"

namespace braindec {

// One node of a CART tree. Internal nodes route rows by `value < threshold`
// (left) vs `value >= threshold` (right); leaves hold the class histogram of
// the bootstrap rows that reached them.
struct TreeNode {
  bool is_leaf = true;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<std::uint32_t> histogram;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct RfConfig {
  int n_trees = 100;
  int min_leaf = 3;
  std::uint64_t seed = 0;
};

struct Forest {
  std::vector<DecisionTree> trees;
  int n_classes = 0;
  int feature_subsample = 0;  // candidate features per split
};

void validate(const RfConfig& cfg);

// Fits `cfg.n_trees` CART trees on seeded bootstrap samples of the rows,
// splitting by Gini impurity over ceil(sqrt(K)) random candidate features per
// node. Labels must lie in [0, S) with S inferred as max(labels)+1.
Forest fit_forest(const Eigen::MatrixXd& rows, const std::vector<int>& labels,
                  const RfConfig& cfg);

// Majority vote over the trees' leaf-majority classes; ties toward the lowest
// state index at both levels.
int predict_forest(const Forest& f, const Eigen::Ref<const Eigen::RowVectorXd>& row);

// Per-timepoint prediction over a feature sequence.
LabelTrack predict_rows(const Forest& f, const FeatureSequence& features);

// Stacks per-timepoint feature rows and labels from a subject set into one
// flat training matrix (the forest sees time points, not sequences).
struct FlatDataset {
  Eigen::MatrixXd rows;
  std::vector<int> labels;
};
FlatDataset stack_timepoints(const std::vector<SubjectData>& subjects);

struct RfGrids {
  std::vector<int> n_trees{100, 200, 500, 1000};
  std::vector<int> min_leaf{3, 5, 10};
};

struct RfGridPoint {
  int n_trees = 0;
  int min_leaf = 0;
  double val_accuracy = 0.0;
};

struct RfGridResult {
  RfConfig best_config;
  Forest forest;
  std::vector<RfGridPoint> log;  // one row per grid point, in grid order
};

// Fits one forest per (n_trees, min_leaf) grid point with the given seed and
// keeps the one with the best per-timepoint validation accuracy. Ties go to
// fewer trees, then to larger min_leaf.
RfGridResult grid_search(const FlatDataset& train, const FlatDataset& val, const RfGrids& grids,
                         std::uint64_t seed);

// Versioned binary forest checkpoint (magic RFRST1, little-endian).
void save_forest(const std::filesystem::path& path, const Forest& f);
Forest load_forest(const std::filesystem::path& path);
bool is_forest_checkpoint(const std::filesystem::path& path);

}  // namespace braindec
