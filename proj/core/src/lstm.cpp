#include "braindec/lstm.hpp"

#include <cmath>
#include <string>

#include "braindec/errors.hpp"
#include "braindec/rng.hpp"

namespace braindec {

namespace {

// Branch form keeps exp() arguments nonpositive.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_layer(const LstmLayerParams& p, const char* where) {
  const Eigen::Index h = p.w_f.rows();
  const Eigen::Index w = p.w_f.cols();
  auto bad = [&](bool cond) {
    if (cond) throw ShapeError(std::string(where) + ": inconsistent layer parameter shapes");
  };
  bad(w <= h);
  bad(p.w_i.rows() != h || p.w_i.cols() != w);
  bad(p.w_c.rows() != h || p.w_c.cols() != w);
  bad(p.w_o.rows() != h || p.w_o.cols() != w);
  bad(p.b_f.size() != h || p.b_i.size() != h || p.b_c.size() != h || p.b_o.size() != h);
}

void check_decoder(const DecoderParams& p, const char* where) {
  check_layer(p.layer1, where);
  check_layer(p.layer2, where);
  if (p.layer2.input_size() != p.layer1.hidden_size()) {
    throw ShapeError(std::string(where) + ": layer2 input size " +
                     std::to_string(p.layer2.input_size()) + " != layer1 hidden size " +
                     std::to_string(p.layer1.hidden_size()));
  }
  if (p.w_s.cols() != p.layer2.hidden_size() || p.b_s.size() != p.w_s.rows()) {
    throw ShapeError(std::string(where) + ": output layer shape mismatch");
  }
}

struct StepOut {
  Eigen::VectorXd f, i, cand, o, c, tanh_c, h;
};

StepOut raw_step(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                 const Eigen::VectorXd& c_prev, const LstmLayerParams& p) {
  const Eigen::Index h_size = p.hidden_size();
  Eigen::VectorXd concat(h_size + x.size());
  concat << h_prev, x;
  StepOut s;
  s.f = (p.w_f * concat + p.b_f).unaryExpr([](double v) { return sigmoid(v); });
  s.i = (p.w_i * concat + p.b_i).unaryExpr([](double v) { return sigmoid(v); });
  s.cand = (p.w_c * concat + p.b_c).array().tanh();
  s.o = (p.w_o * concat + p.b_o).unaryExpr([](double v) { return sigmoid(v); });
  s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.cand);
  s.tanh_c = s.c.array().tanh();
  s.h = s.o.cwiseProduct(s.tanh_c);
  return s;
}

LayerTrace run_layer(const Eigen::MatrixXd& x, const LstmLayerParams& p, const LstmState& init) {
  const Eigen::Index t_len = x.rows();
  const Eigen::Index h_size = p.hidden_size();
  LayerTrace tr;
  for (Eigen::MatrixXd* m : {&tr.f, &tr.i, &tr.cand, &tr.o, &tr.c, &tr.tanh_c, &tr.h}) {
    m->resize(t_len, h_size);
  }
  Eigen::VectorXd h_prev = init.h;
  Eigen::VectorXd c_prev = init.c;
  for (Eigen::Index t = 0; t < t_len; ++t) {
    StepOut s = raw_step(x.row(t).transpose(), h_prev, c_prev, p);
    if (!s.c.allFinite() || !s.h.allFinite()) {
      throw NumericError("forward: non-finite activation at time point " + std::to_string(t));
    }
    tr.f.row(t) = s.f.transpose();
    tr.i.row(t) = s.i.transpose();
    tr.cand.row(t) = s.cand.transpose();
    tr.o.row(t) = s.o.transpose();
    tr.c.row(t) = s.c.transpose();
    tr.tanh_c.row(t) = s.tanh_c.transpose();
    tr.h.row(t) = s.h.transpose();
    h_prev = s.h;
    c_prev = s.c;
  }
  return tr;
}

void check_labels(const LabelTrack& labels, Eigen::Index t_len, Eigen::Index n_states,
                  const char* where) {
  if (labels.size() != t_len) {
    throw ShapeError(std::string(where) + ": " + std::to_string(t_len) + " time points but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (Eigen::Index t = 0; t < labels.size(); ++t) {
    const int v = labels.states[t];
    if (v < 0 || v >= n_states) {
      throw ShapeError(std::string(where) + ": label " + std::to_string(v) + " at time point " +
                       std::to_string(t) + " outside [0, " + std::to_string(n_states) + ")");
    }
  }
}

// BPTT through one layer. dh_ext is the loss gradient arriving at each h_t
// from above (upper layer or output head); dx receives the gradient with
// respect to this layer's inputs.
void layer_backward(const LstmLayerParams& p, const LayerTrace& tr, const Eigen::MatrixXd& x,
                    const LstmState& init, const Eigen::MatrixXd& dh_ext, LstmLayerParams& g,
                    Eigen::MatrixXd& dx) {
  const Eigen::Index t_len = x.rows();
  const Eigen::Index h_size = p.hidden_size();
  const Eigen::Index i_size = p.input_size();

  Eigen::MatrixXd dzf(t_len, h_size), dzi(t_len, h_size), dzc(t_len, h_size), dzo(t_len, h_size);
  dx.resize(t_len, i_size);

  Eigen::VectorXd dh_rec = Eigen::VectorXd::Zero(h_size);
  Eigen::VectorXd dc_rec = Eigen::VectorXd::Zero(h_size);
  for (Eigen::Index t = t_len - 1; t >= 0; --t) {
    const auto f = tr.f.row(t).transpose().array();
    const auto i = tr.i.row(t).transpose().array();
    const auto cand = tr.cand.row(t).transpose().array();
    const auto o = tr.o.row(t).transpose().array();
    const auto tanh_c = tr.tanh_c.row(t).transpose().array();
    const Eigen::VectorXd c_prev = t == 0 ? init.c : Eigen::VectorXd(tr.c.row(t - 1).transpose());

    const Eigen::ArrayXd dh = (dh_ext.row(t).transpose() + dh_rec).array();
    const Eigen::ArrayXd dc = dc_rec.array() + dh * o * (1.0 - tanh_c.square());
    const Eigen::ArrayXd do_ = dh * tanh_c;

    dzo.row(t) = (do_ * o * (1.0 - o)).matrix().transpose();
    dzf.row(t) = (dc * c_prev.array() * f * (1.0 - f)).matrix().transpose();
    dzi.row(t) = (dc * cand * i * (1.0 - i)).matrix().transpose();
    dzc.row(t) = (dc * i * (1.0 - cand.square())).matrix().transpose();

    Eigen::VectorXd dconcat = p.w_f.transpose() * dzf.row(t).transpose();
    dconcat.noalias() += p.w_i.transpose() * dzi.row(t).transpose();
    dconcat.noalias() += p.w_c.transpose() * dzc.row(t).transpose();
    dconcat.noalias() += p.w_o.transpose() * dzo.row(t).transpose();

    dh_rec = dconcat.head(h_size);
    dx.row(t) = dconcat.tail(i_size).transpose();
    dc_rec = (dc * f).matrix();
  }

  // Weight gradients in two GEMMs per gate over the stacked concat rows.
  Eigen::MatrixXd concat(t_len, h_size + i_size);
  concat.row(0) << init.h.transpose(), x.row(0);
  for (Eigen::Index t = 1; t < t_len; ++t) concat.row(t) << tr.h.row(t - 1), x.row(t);

  g.w_f.noalias() = dzf.transpose() * concat;
  g.w_i.noalias() = dzi.transpose() * concat;
  g.w_c.noalias() = dzc.transpose() * concat;
  g.w_o.noalias() = dzo.transpose() * concat;
  g.b_f = dzf.colwise().sum().transpose();
  g.b_i = dzi.colwise().sum().transpose();
  g.b_c = dzc.colwise().sum().transpose();
  g.b_o = dzo.colwise().sum().transpose();
}

}  // namespace

LstmState cell_step(const Eigen::VectorXd& x, const LstmState& prev, const LstmLayerParams& p) {
  check_layer(p, "cell_step");
  if (x.size() != p.input_size() || prev.h.size() != p.hidden_size() ||
      prev.c.size() != p.hidden_size()) {
    throw ShapeError("cell_step: input/state sizes do not match layer parameters");
  }
  StepOut s = raw_step(x, prev.h, prev.c, p);
  return {s.h, s.c};
}

ForwardCache forward(const FeatureSequence& f, const DecoderParams& p) {
  const Eigen::Index h1 = p.layer1.hidden_size();
  const Eigen::Index h2 = p.layer2.hidden_size();
  LstmState z1{Eigen::VectorXd::Zero(h1), Eigen::VectorXd::Zero(h1)};
  LstmState z2{Eigen::VectorXd::Zero(h2), Eigen::VectorXd::Zero(h2)};
  return forward(f, p, z1, z2);
}

ForwardCache forward(const FeatureSequence& f, const DecoderParams& p, const LstmState& init1,
                     const LstmState& init2) {
  check_decoder(p, "forward");
  if (f.feature_count() != p.feature_count()) {
    throw ShapeError("forward: sequence has " + std::to_string(f.feature_count()) +
                     " features but layer1 expects " + std::to_string(p.feature_count()));
  }
  if (!f.values.allFinite()) throw NumericError("forward: non-finite entry in feature sequence");
  const Eigen::Index t_len = f.time_points();
  const Eigen::Index n_states = p.state_count();

  ForwardCache cache;
  cache.init1 = init1;
  cache.init2 = init2;
  cache.layer1 = run_layer(f.values, p.layer1, init1);
  cache.layer2 = run_layer(cache.layer1.h, p.layer2, init2);

  cache.logits.resize(t_len, n_states);
  cache.logits.noalias() = cache.layer2.h * p.w_s.transpose();
  cache.logits.rowwise() += p.b_s.transpose();
  if (!cache.logits.allFinite()) throw NumericError("forward: non-finite logits");

  cache.probs.resize(t_len, n_states);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const double m = cache.logits.row(t).maxCoeff();
    Eigen::ArrayXd e = (cache.logits.row(t).transpose().array() - m).exp();
    cache.probs.row(t) = (e / e.sum()).matrix().transpose();
  }
  return cache;
}

double loss(const ProbSequence& probs, const LabelTrack& labels) {
  check_labels(labels, probs.rows(), probs.cols(), "loss");
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    if (std::abs(probs.row(t).sum() - 1.0) > 1e-9) {
      throw ShapeError("loss: probability row " + std::to_string(t) + " does not sum to 1");
    }
  }
  double acc = 0.0;
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    acc -= std::log(probs(t, labels.states[t]));
  }
  return acc / static_cast<double>(probs.rows());
}

double loss_from_logits(const Eigen::MatrixXd& logits, const LabelTrack& labels) {
  check_labels(labels, logits.rows(), logits.cols(), "loss");
  double acc = 0.0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double m = logits.row(t).maxCoeff();
    const double lse = m + std::log((logits.row(t).array() - m).exp().sum());
    acc += lse - logits(t, labels.states[t]);
  }
  return acc / static_cast<double>(logits.rows());
}

std::pair<double, GradientSet> backward(const FeatureSequence& f, const LabelTrack& labels,
                                        const DecoderParams& p, const ForwardCache& cache) {
  check_decoder(p, "backward");
  const Eigen::Index t_len = f.time_points();
  const Eigen::Index n_states = p.state_count();
  if (cache.probs.rows() != t_len || cache.probs.cols() != n_states ||
      cache.layer1.h.rows() != t_len || cache.layer1.h.cols() != p.layer1.hidden_size() ||
      cache.layer2.h.rows() != t_len || cache.layer2.h.cols() != p.layer2.hidden_size()) {
    throw ShapeError("backward: cache does not match the given sequence and parameters");
  }
  check_labels(labels, t_len, n_states, "backward");

  const double loss_val = loss_from_logits(cache.logits, labels);

  // d(mean CE)/d(logits) = (softmax - onehot) / T
  Eigen::MatrixXd dlogits = cache.probs;
  for (Eigen::Index t = 0; t < t_len; ++t) dlogits(t, labels.states[t]) -= 1.0;
  dlogits /= static_cast<double>(t_len);

  GradientSet g = zeros_like(p);
  g.w_s.noalias() = dlogits.transpose() * cache.layer2.h;
  g.b_s = dlogits.colwise().sum().transpose();

  Eigen::MatrixXd dh2 = dlogits * p.w_s;  // T x H2
  Eigen::MatrixXd dx2;
  layer_backward(p.layer2, cache.layer2, cache.layer1.h, cache.init2, dh2, g.layer2, dx2);
  Eigen::MatrixXd dx1;
  layer_backward(p.layer1, cache.layer1, f.values, cache.init1, dx2, g.layer1, dx1);

  return {loss_val, std::move(g)};
}

LabelTrack predict(const FeatureSequence& f, const DecoderParams& p) {
  const ForwardCache cache = forward(f, p);
  LabelTrack out;
  out.states.resize(static_cast<std::size_t>(f.time_points()));
  for (Eigen::Index t = 0; t < f.time_points(); ++t) {
    int best = 0;
    for (Eigen::Index s = 1; s < cache.probs.cols(); ++s) {
      if (cache.probs(t, s) > cache.probs(t, best)) best = static_cast<int>(s);
    }
    out.states[t] = best;
  }
  return out;
}

DecoderParams init_params(Eigen::Index input, Eigen::Index hidden, Eigen::Index states,
                          std::uint64_t seed) {
  if (input < 1 || hidden < 1 || states < 1) {
    throw ShapeError("init_params: sizes must be positive");
  }
  Rng rng(mix_seed(seed, 0x1c57));
  auto layer = [&](Eigen::Index in) {
    LstmLayerParams p;
    const Eigen::Index cols = hidden + in;
    const double limit = std::sqrt(6.0 / static_cast<double>(cols + hidden));
    for (Eigen::MatrixXd* w : {&p.w_f, &p.w_i, &p.w_c, &p.w_o}) {
      w->resize(hidden, cols);
      for (Eigen::Index r = 0; r < hidden; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) (*w)(r, c) = rng.uniform(-limit, limit);
    }
    p.b_f = Eigen::VectorXd::Ones(hidden);  // open forget gates at start
    p.b_i = Eigen::VectorXd::Zero(hidden);
    p.b_c = Eigen::VectorXd::Zero(hidden);
    p.b_o = Eigen::VectorXd::Zero(hidden);
    return p;
  };
  DecoderParams p;
  p.layer1 = layer(input);
  p.layer2 = layer(hidden);
  const double limit = std::sqrt(6.0 / static_cast<double>(hidden + states));
  p.w_s.resize(states, hidden);
  for (Eigen::Index r = 0; r < states; ++r)
    for (Eigen::Index c = 0; c < hidden; ++c) p.w_s(r, c) = rng.uniform(-limit, limit);
  p.b_s = Eigen::VectorXd::Zero(states);
  return p;
}

GradientSet zeros_like(const DecoderParams& p) {
  GradientSet g = p;
  visit_tensors([](const char*, auto& t) { t.setZero(); }, g);
  return g;
}

}  // namespace braindec
