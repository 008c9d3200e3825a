#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

#include "braindec/signal_features.hpp"

namespace braindec {

inline constexpr int kDefaultHiddenSize = 256;

// One LSTM layer. Gate weights act on the concatenation [h_{t-1}, x_t] with
// the hidden part first; that column order is part of the checkpoint format.
struct LstmLayerParams {
  Eigen::MatrixXd w_f, w_i, w_c, w_o;  // H x (H+I)
  Eigen::VectorXd b_f, b_i, b_c, b_o;  // H
  Eigen::Index hidden_size() const { return w_f.rows(); }
  Eigen::Index input_size() const { return w_f.cols() - w_f.rows(); }
};

// Full decoder: two stacked LSTM layers plus the softmax output layer.
struct DecoderParams {
  LstmLayerParams layer1;  // I = feature count
  LstmLayerParams layer2;  // I = layer1 hidden size
  Eigen::MatrixXd w_s;     // S x H2
  Eigen::VectorXd b_s;     // S
  Eigen::Index feature_count() const { return layer1.input_size(); }
  Eigen::Index state_count() const { return w_s.rows(); }
};

// Gradients are one shape-matched array per parameter array.
using GradientSet = DecoderParams;

struct LstmState {
  Eigen::VectorXd h, c;
};

// T x S rows of state probabilities; every row sums to 1.
using ProbSequence = Eigen::MatrixXd;

// Per-step activations kept for the backward pass. Row t holds time point t.
struct LayerTrace {
  Eigen::MatrixXd f, i, cand, o, c, tanh_c, h;  // each T x H
};

struct ForwardCache {
  LayerTrace layer1, layer2;
  Eigen::MatrixXd logits;  // T x S
  ProbSequence probs;      // T x S
  LstmState init1, init2;
};

// Enumerates every parameter tensor of one or more DecoderParams-shaped packs
// in the fixed checkpoint order:
//   layer1.{w_f,w_i,w_c,w_o,b_f,b_i,b_c,b_o}, layer2.{same}, w_s, b_s.
// fn is called as fn(name, tensor&...); matrices and vectors both appear.
template <class Fn, class... Packs>
void visit_tensors(Fn&& fn, Packs&... ps) {
  fn("layer1.w_f", ps.layer1.w_f...);
  fn("layer1.w_i", ps.layer1.w_i...);
  fn("layer1.w_c", ps.layer1.w_c...);
  fn("layer1.w_o", ps.layer1.w_o...);
  fn("layer1.b_f", ps.layer1.b_f...);
  fn("layer1.b_i", ps.layer1.b_i...);
  fn("layer1.b_c", ps.layer1.b_c...);
  fn("layer1.b_o", ps.layer1.b_o...);
  fn("layer2.w_f", ps.layer2.w_f...);
  fn("layer2.w_i", ps.layer2.w_i...);
  fn("layer2.w_c", ps.layer2.w_c...);
  fn("layer2.w_o", ps.layer2.w_o...);
  fn("layer2.b_f", ps.layer2.b_f...);
  fn("layer2.b_i", ps.layer2.b_i...);
  fn("layer2.b_c", ps.layer2.b_c...);
  fn("layer2.b_o", ps.layer2.b_o...);
  fn("w_s", ps.w_s...);
  fn("b_s", ps.b_s...);
}

// One cell update: f,i,o through the logistic sigmoid, candidate through tanh,
// C_t = f * C_{t-1} + i * cand, h_t = o * tanh(C_t).
LstmState cell_step(const Eigen::VectorXd& x, const LstmState& prev, const LstmLayerParams& p);

// Runs layer 1 over the whole sequence, feeds its hidden states to layer 2,
// then applies softmax(w_s * h2 + b_s) per time point. States default to zero.
ForwardCache forward(const FeatureSequence& f, const DecoderParams& p);
ForwardCache forward(const FeatureSequence& f, const DecoderParams& p,
                     const LstmState& init1, const LstmState& init2);

// Mean cross-entropy -1/T sum_t log probs[t, labels[t]].
double loss(const ProbSequence& probs, const LabelTrack& labels);

// Same objective evaluated from logits with log-sum-exp stabilization; this is
// the path training uses, immune to overflow for large logits.
double loss_from_logits(const Eigen::MatrixXd& logits, const LabelTrack& labels);

// Exact backpropagation through time. Returns the loss and the gradient of
// the mean cross-entropy with respect to every parameter array.
std::pair<double, GradientSet> backward(const FeatureSequence& f, const LabelTrack& labels,
                                        const DecoderParams& p, const ForwardCache& cache);

// Per-timepoint argmax of the forward probabilities; ties break to the lowest
// state index. Full-length sequences are fine, nothing is clipped.
LabelTrack predict(const FeatureSequence& f, const DecoderParams& p);

// Glorot-uniform weights, zero biases except forget-gate biases at 1.
DecoderParams init_params(Eigen::Index input, Eigen::Index hidden, Eigen::Index states,
                          std::uint64_t seed);

GradientSet zeros_like(const DecoderParams& p);

}  // namespace braindec
