#include "braindec/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/SVD>

#include "braindec/errors.hpp"
#include "braindec/evaluation.hpp"

namespace braindec {

FeatureSequence ablate_fn(const FeatureSequence& f, Eigen::Index k) {
  if (k < 0 || k >= f.feature_count()) {
    throw ShapeError("ablate_fn: FN index " + std::to_string(k) + " out of range [0, " +
                     std::to_string(f.feature_count()) + ")");
  }
  FeatureSequence out = f;
  out.values.col(k).setZero();
  return out;
}

Eigen::MatrixXd change_matrix(const DecoderParams& model,
                              const std::vector<SubjectData>& subjects) {
  if (subjects.empty()) throw ShapeError("change_matrix: no subjects");
  const Eigen::Index k = model.feature_count();
  const Eigen::Index n = static_cast<Eigen::Index>(subjects.size());
  Eigen::MatrixXd changes(k, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const SubjectData& s = subjects[i];
    const double full = timepoint_accuracy(predict(s.features, model), s.labels);
    for (Eigen::Index fn = 0; fn < k; ++fn) {
      const double ablated =
          timepoint_accuracy(predict(ablate_fn(s.features, fn), model), s.labels);
      changes(fn, i) = full - ablated;
    }
  }
  return changes;
}

PcaResult pca(const Eigen::MatrixXd& m) {
  const Eigen::Index k = m.rows();
  const Eigen::Index n = m.cols();
  if (k < 1) throw ShapeError("pca: empty matrix");
  if (n < 2) {
    throw ShapeError("pca: need at least 2 observations, got " + std::to_string(n));
  }
  if (!m.allFinite()) throw NumericError("pca: non-finite entry");

  Eigen::MatrixXd centered = m;
  centered.colwise() -= m.rowwise().mean();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullU);
  PcaResult result;
  result.components = svd.matrixU();
  result.variances = Eigen::VectorXd::Zero(k);
  const Eigen::VectorXd& sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    result.variances(i) = sv(i) * sv(i) / static_cast<double>(n - 1);
  }

  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index peak = 0;
    result.components.col(c).cwiseAbs().maxCoeff(&peak);
    if (result.components(peak, c) < 0.0) result.components.col(c) = -result.components.col(c);
  }
  return result;
}

std::vector<int> top_fns(const PcaResult& p, int n) {
  const int k = static_cast<int>(p.components.rows());
  if (n < 0 || n > k) {
    throw ShapeError("top_fns: count " + std::to_string(n) + " out of range [0, " +
                     std::to_string(k) + "]");
  }
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double ma = std::abs(p.components(a, 0));
    const double mb = std::abs(p.components(b, 0));
    if (ma != mb) return ma > mb;
    return a < b;
  });
  idx.resize(n);
  return idx;
}

}  // namespace braindec
