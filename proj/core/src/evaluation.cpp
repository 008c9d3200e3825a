#include "braindec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>

#include "braindec/errors.hpp"
#include "braindec/io.hpp"

namespace braindec {

ConfusionMatrix confusion(const LabelTrack& pred, const LabelTrack& truth, int s) {
  if (pred.size() != truth.size()) {
    throw ShapeError("confusion: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(truth.size()) + " truth labels");
  }
  if (s < 1) throw ShapeError("confusion: state count must be >= 1");
  ConfusionMatrix cm;
  cm.values = Eigen::MatrixXd::Zero(s, s);
  cm.row_supported.assign(s, 0);
  for (Eigen::Index t = 0; t < truth.size(); ++t) {
    const int i = truth.states[t];
    const int j = pred.states[t];
    if (i < 0 || i >= s || j < 0 || j >= s) {
      throw ShapeError("confusion: label out of range at time " + std::to_string(t));
    }
    cm.values(i, j) += 1.0;
    cm.row_supported[i] = 1;
  }
  return cm;
}

ConfusionMatrix normalize_rows(const ConfusionMatrix& raw) {
  ConfusionMatrix cm = raw;
  if (cm.normalized) return cm;
  for (Eigen::Index i = 0; i < cm.values.rows(); ++i) {
    const double sum = cm.values.row(i).sum();
    if (sum > 0.0) cm.values.row(i) /= sum;
  }
  cm.normalized = true;
  return cm;
}

double timepoint_accuracy(const LabelTrack& pred, const LabelTrack& truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("timepoint_accuracy: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(truth.size()) + " truth labels");
  }
  if (truth.size() == 0) throw ShapeError("timepoint_accuracy: empty tracks");
  Eigen::Index correct = 0;
  for (Eigen::Index t = 0; t < truth.size(); ++t) {
    if (pred.states[t] == truth.states[t]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

AccuracySummary overall_accuracy(const std::vector<LabelTrack>& preds,
                                 const std::vector<LabelTrack>& truths, int s) {
  if (preds.empty()) throw ShapeError("overall_accuracy: no subjects");
  if (preds.size() != truths.size()) {
    throw ShapeError("overall_accuracy: " + std::to_string(preds.size()) +
                     " prediction tracks vs " + std::to_string(truths.size()) + " truth tracks");
  }
  AccuracySummary summary;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const ConfusionMatrix cm = normalize_rows(confusion(preds[i], truths[i], s));
    for (int state = 0; state < s; ++state) {
      if (cm.row_supported[state]) summary.pooled.push_back(cm.values(state, state));
    }
  }
  const double n = static_cast<double>(summary.pooled.size());
  summary.mean = std::accumulate(summary.pooled.begin(), summary.pooled.end(), 0.0) / n;
  double var = 0.0;
  for (double v : summary.pooled) var += (v - summary.mean) * (v - summary.mean);
  summary.stddev = std::sqrt(var / n);
  return summary;
}

namespace {

// Upper-tail probability of the standard normal.
double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty()) throw ShapeError("wilcoxon_signed_rank: empty input");
  if (a.size() != b.size()) {
    throw ShapeError("wilcoxon_signed_rank: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + " paired values");
  }
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (!std::isfinite(d)) throw NumericError("wilcoxon_signed_rank: non-finite difference");
    if (d != 0.0) diffs.push_back(d);
  }

  WilcoxonResult r;
  r.m = static_cast<int>(diffs.size());
  if (r.m == 0) {
    r.degenerate = true;
    r.w = 0.0;
    r.p = 1.0;
    r.exact = true;
    return r;
  }

  // Average ranks over tied |d|. Ranks are multiples of 1/2, so the doubled
  // ranks are exact integers; the exact enumeration compares in integers.
  std::vector<std::size_t> order(diffs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(diffs[x]) < std::abs(diffs[y]);
  });
  std::vector<std::int64_t> rank2(diffs.size());  // 2 * rank
  std::vector<std::int64_t> tie_sizes;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && std::abs(diffs[order[j]]) == std::abs(diffs[order[i]])) ++j;
    const std::int64_t avg2 = static_cast<std::int64_t>(i + 1) + static_cast<std::int64_t>(j);
    for (std::size_t t = i; t < j; ++t) rank2[order[t]] = avg2;  // 2*(i+1 + j)/2
    tie_sizes.push_back(static_cast<std::int64_t>(j - i));
    i = j;
  }

  std::int64_t w2 = 0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] > 0.0) w2 += rank2[i];
  }
  r.w = static_cast<double>(w2) / 2.0;

  if (r.m <= 20) {
    r.exact = true;
    const std::uint64_t n_masks = 1ULL << r.m;
    std::uint64_t count_le = 0;
    std::uint64_t count_ge = 0;
    for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
      std::int64_t s2 = 0;
      for (int i = 0; i < r.m; ++i) {
        if (mask & (1ULL << i)) s2 += rank2[i];
      }
      if (s2 <= w2) ++count_le;
      if (s2 >= w2) ++count_ge;
    }
    const double tail = static_cast<double>(std::min(count_le, count_ge));
    r.p = std::min(1.0, 2.0 * tail / static_cast<double>(n_masks));
  } else {
    r.exact = false;
    const double m = static_cast<double>(r.m);
    const double mu = m * (m + 1.0) / 4.0;
    double tie_term = 0.0;
    for (std::int64_t t : tie_sizes) {
      const double td = static_cast<double>(t);
      tie_term += td * td * td - td;
    }
    const double sigma2 = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0 - tie_term / 48.0;
    if (!(sigma2 > 0.0)) throw NumericError("wilcoxon_signed_rank: zero variance");
    const double delta = r.w - mu;
    const double cc = delta > 0.0 ? -0.5 : (delta < 0.0 ? 0.5 : 0.0);  // toward the mean
    const double z = (delta + cc) / std::sqrt(sigma2);
    r.p = std::min(1.0, 2.0 * normal_upper_tail(std::abs(z)));
  }
  return r;
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  write_matrix_csv(path, cm.values);
}

void write_state_order(const std::filesystem::path& path, int s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  for (int i = 0; i < s; ++i) os << "state_" << i << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

void write_wilcoxon_csv(const std::filesystem::path& path, const std::string& model_a,
                        const std::string& model_b, std::size_t n, const WilcoxonResult& r) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << "model_a,model_b,n,w,p_two_sided,degenerate\n";
  os << model_a << ',' << model_b << ',' << n << ',' << format_double(r.w) << ','
     << format_double(r.p) << ',' << (r.degenerate ? 1 : 0) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace braindec
