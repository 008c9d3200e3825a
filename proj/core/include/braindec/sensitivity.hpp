#pragma once

#include <vector>

#include <Eigen/Dense>

#include "braindec/lstm.hpp"
#include "braindec/signal_features.hpp"

namespace braindec {

// Zeroes FN column k; every other column is untouched.
FeatureSequence ablate_fn(const FeatureSequence& f, Eigen::Index k);

// K x N matrix: entry (k, i) is subject i's decoding accuracy with full
// features minus the accuracy with FN k ablated. The model is never retrained.
Eigen::MatrixXd change_matrix(const DecoderParams& model, const std::vector<SubjectData>& subjects);

struct PcaResult {
  Eigen::MatrixXd components;  // K x K, columns orthonormal, FN-space loadings
  Eigen::VectorXd variances;   // length K, nonincreasing
};

// Centers each FN row across subjects and takes the SVD of the centered
// matrix. variances = squared singular values / (N - 1), zero-padded to K.
// Sign convention: each component's largest-|loading| entry is positive.
PcaResult pca(const Eigen::MatrixXd& m);

// Indices of the n largest |loading| entries of the first component,
// descending by magnitude, ties toward the lower index.
std::vector<int> top_fns(const PcaResult& p, int n);

}  // namespace braindec
