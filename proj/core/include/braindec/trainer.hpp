#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "braindec/io.hpp"
#include "braindec/lstm.hpp"
#include "braindec/signal_features.hpp"

namespace braindec {

// One training sample: a fixed-length window of a subject's sequence.
struct Clip {
  Eigen::MatrixXd features;  // L x K
  std::vector<int> labels;   // length L
  int subject_id = -1;
  Eigen::Index start = 0;
};

struct TrainConfig {
  int clip_len = 40;
  int overlap = 20;
  double base_lr = 0.001;
  double lr_decay = 0.1;
  long decay_every = 50000;
  long max_steps = 200000;
  int batch_size = 32;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  long eval_every = 1000;
  int patience = 20;       // evaluations without improvement before stopping
  double grad_clip = 0.0;  // global-norm cap; 0 disables
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

// key=value config with keys named exactly like the fields; unknown keys are
// errors, missing keys keep their defaults.
TrainConfig parse_train_config(const KvPairs& kv);
TrainConfig load_train_config(const std::filesystem::path& path);
KvPairs train_config_kv(const TrainConfig& cfg);

struct AdamMoments {
  DecoderParams m, v;
  long t = 0;
};

AdamMoments init_moments(const DecoderParams& params);

// Windows of length clip_len starting at 0 with stride clip_len - overlap;
// when the last stride-aligned window ends before T, one extra window anchored
// at T - clip_len covers the tail. Ascending start order.
std::vector<Clip> make_clips(const FeatureSequence& f, const LabelTrack& labels, int clip_len,
                             int overlap, int subject_id = -1);

// base_lr * lr_decay^floor(step / decay_every), step counted from 0.
double lr_at(long step, const TrainConfig& cfg);

// Standard bias-corrected update at lr_at(moments.t); increments moments.t
// first. Rejects non-finite gradients naming the tensor.
void adam_step(DecoderParams& params, const GradientSet& grads, AdamMoments& moments,
               const TrainConfig& cfg);

struct TrainLogRow {
  long step;
  double lr;
  double train_loss;  // mean batch loss since the previous evaluation
  double val_metric;  // mean per-timepoint accuracy over validation subjects
};

struct TrainResult {
  DecoderParams best_params;
  double best_metric = 0.0;
  long best_step = 0;
  std::vector<TrainLogRow> log;
  bool early_stopped = false;
  long steps_run = 0;
};

// Mean over subjects of the fraction of correctly predicted time points on
// their full-length sequences.
double mean_sequence_accuracy(const DecoderParams& params, const std::vector<SubjectData>& subjects);

// Mini-batch ADAM over the pooled clip set, sampled uniformly with
// replacement. Evaluates on the validation subjects every eval_every steps,
// keeps the best checkpoint and stops early once `patience` evaluations pass
// without improvement. n_states = 0 infers S from the labels.
TrainResult train(const std::vector<SubjectData>& train_subjects,
                  const std::vector<SubjectData>& val_subjects, const TrainConfig& cfg,
                  Eigen::Index hidden = kDefaultHiddenSize, Eigen::Index n_states = 0);

void write_train_log_csv(const std::filesystem::path& path, const std::vector<TrainLogRow>& log);

}  // namespace braindec
