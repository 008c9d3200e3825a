#pragma once

#include <Eigen/Dense>
#include <vector>

namespace braindec {

// K x S_vox nonnegative spatial maps, one functional network per row.
struct FunctionalNetworks {
  Eigen::MatrixXd values;
  Eigen::Index network_count() const { return values.rows(); }
  Eigen::Index voxel_count() const { return values.cols(); }
};

// T x S_vox BOLD signal, arbitrary units.
struct VoxelScan {
  Eigen::MatrixXd values;
  Eigen::Index time_points() const { return values.rows(); }
  Eigen::Index voxel_count() const { return values.cols(); }
};

// T x K per-timepoint network signatures.
struct FeatureSequence {
  Eigen::MatrixXd values;
  Eigen::Index time_points() const { return values.rows(); }
  Eigen::Index feature_count() const { return values.cols(); }
};

// Length-T sequence of brain-state ids in [0, S).
struct LabelTrack {
  std::vector<int> states;
  Eigen::Index size() const { return static_cast<Eigen::Index>(states.size()); }
  bool operator==(const LabelTrack&) const = default;
};

// One subject's decodable data: aligned features and ground-truth states.
struct SubjectData {
  int id = 0;
  FeatureSequence features;
  LabelTrack labels;
};

// Divides every row by its sum. Rows with sum <= 0 and non-finite entries are
// rejected with the offending row named.
FunctionalNetworks row_normalize(const FunctionalNetworks& v);

// F = D * Vn'. Requires matching voxel counts and row-normalized Vn.
FeatureSequence extract_features(const VoxelScan& d, const FunctionalNetworks& v_n);

// Moves labels `shift` points later in time to compensate for the delayed
// hemodynamic response; the first `shift` outputs repeat paradigm[0].
LabelTrack shift_labels(const LabelTrack& paradigm, int shift);

// Smallest S such that every label is in [0, S).
int state_count(const LabelTrack& labels);

}  // namespace braindec
