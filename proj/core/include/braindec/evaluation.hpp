#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "braindec/signal_features.hpp"

namespace braindec {

// Row = true state, column = predicted state. `row_supported[i]` marks rows
// with at least one true-state occurrence; normalization leaves unsupported
// rows at zero.
struct ConfusionMatrix {
  Eigen::MatrixXd values;
  bool normalized = false;
  std::vector<std::uint8_t> row_supported;
};

ConfusionMatrix confusion(const LabelTrack& pred, const LabelTrack& truth, int s);

// Divides each supported row by its count sum; idempotent on normalized input.
ConfusionMatrix normalize_rows(const ConfusionMatrix& raw);

// Fraction of time points where pred == truth.
double timepoint_accuracy(const LabelTrack& pred, const LabelTrack& truth);

// Per subject and per supported state, the recall (diagonal of that subject's
// normalized confusion); all values pooled into one distribution.
struct AccuracySummary {
  double mean = 0.0;
  double stddev = 0.0;         // population standard deviation of the pool
  std::vector<double> pooled;  // per-subject-per-state recalls, subject-major
};

AccuracySummary overall_accuracy(const std::vector<LabelTrack>& preds,
                                 const std::vector<LabelTrack>& truths, int s);

struct WilcoxonResult {
  double w = 0.0;          // sum of ranks of positive differences
  double p = 1.0;          // two-sided
  int m = 0;               // nonzero differences
  bool exact = false;      // enumeration (m <= 20) vs normal approximation
  bool degenerate = false; // all differences were zero
};

// Paired signed-rank test over per-subject accuracies of two models. Zero
// differences are dropped; tied |differences| take average ranks.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

// S rows x S columns, no header, plus a sidecar listing the state order.
void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm);
void write_state_order(const std::filesystem::path& path, int s);

// One data row: model_a,model_b,n,w,p_two_sided,degenerate.
void write_wilcoxon_csv(const std::filesystem::path& path, const std::string& model_a,
                        const std::string& model_b, std::size_t n, const WilcoxonResult& r);

}  // namespace braindec
