#include "braindec/signal_features.hpp"

#include <string>

#include "braindec/errors.hpp"

namespace braindec {

FunctionalNetworks row_normalize(const FunctionalNetworks& v) {
  const Eigen::Index k = v.values.rows();
  FunctionalNetworks out;
  out.values.resize(k, v.values.cols());
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto row = v.values.row(r);
    if (!row.allFinite()) {
      throw NumericError("row_normalize: non-finite entry in FN row " + std::to_string(r));
    }
    if ((row.array() < 0.0).any()) {
      throw ShapeError("row_normalize: negative loading in FN row " + std::to_string(r));
    }
    const double sum = row.sum();
    if (sum <= 0.0) {
      throw ShapeError("row_normalize: FN row " + std::to_string(r) + " has sum " +
                       std::to_string(sum) + ", cannot normalize");
    }
    out.values.row(r) = row / sum;
  }
  return out;
}

FeatureSequence extract_features(const VoxelScan& d, const FunctionalNetworks& v_n) {
  if (d.voxel_count() != v_n.voxel_count()) {
    throw ShapeError("extract_features: scan is " + std::to_string(d.time_points()) + "x" +
                     std::to_string(d.voxel_count()) + " but FN matrix is " +
                     std::to_string(v_n.network_count()) + "x" +
                     std::to_string(v_n.voxel_count()));
  }
  for (Eigen::Index r = 0; r < v_n.network_count(); ++r) {
    const double sum = v_n.values.row(r).sum();
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ShapeError("extract_features: FN row " + std::to_string(r) +
                       " is not row-normalized (sum " + std::to_string(sum) + ")");
    }
  }
  if (!d.values.allFinite()) {
    throw NumericError("extract_features: non-finite entry in scan");
  }
  FeatureSequence f;
  f.values = d.values * v_n.values.transpose();
  return f;
}

LabelTrack shift_labels(const LabelTrack& paradigm, int shift) {
  const Eigen::Index t = paradigm.size();
  if (shift < 0) {
    throw ShapeError("shift_labels: negative shift " + std::to_string(shift));
  }
  if (static_cast<Eigen::Index>(shift) >= t) {
    throw ShapeError("shift_labels: shift " + std::to_string(shift) +
                     " >= track length " + std::to_string(t));
  }
  LabelTrack out;
  out.states.resize(paradigm.states.size());
  for (Eigen::Index i = 0; i < t; ++i) {
    out.states[i] = i < shift ? paradigm.states[0] : paradigm.states[i - shift];
  }
  return out;
}

int state_count(const LabelTrack& labels) {
  int s = 0;
  for (int v : labels.states) {
    if (v < 0) throw ShapeError("state_count: negative label " + std::to_string(v));
    s = std::max(s, v + 1);
  }
  return s;
}

}  // namespace braindec
