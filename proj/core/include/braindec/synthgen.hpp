#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "braindec/io.hpp"
#include "braindec/signal_features.hpp"

namespace braindec {

struct SynthConfig {
  int n_subjects = 35;
  int t = 200;            // time points per scan
  int k = 8;              // FN count
  int s_vox = 64;         // voxel count
  int n_states = 4;
  int block_min = 10;     // block length range, inclusive
  int block_max = 20;
  double noise_sigma = 0.1;
  int hemodynamic_shift = 8;
  bool temporal_ambiguity = false;
  std::uint64_t seed = 0;
};

void validate(const SynthConfig& cfg);
SynthConfig parse_synth_config(const KvPairs& kv);
KvPairs synth_config_kv(const SynthConfig& cfg);

struct SynthSubject {
  FunctionalNetworks networks;  // K x s_vox, disjoint nonnegative bumps
  VoxelScan scan;               // t x s_vox
  LabelTrack paradigm;          // pre-shift ground truth, length t
  Eigen::MatrixXd loadings;     // n_states x K, shared across subjects
};

// Deterministic generation: one loading matrix shared by all subjects, then
// per-subject FN jitter, block-design paradigm, and scan noise, each subject
// from its own derived seed. In temporal-ambiguity mode states n_states-2 and
// n_states-1 share one loading row but are always preceded by state 0 and
// state 1 respectively, so only history separates them (needs n_states >= 4).
std::vector<SynthSubject> generate(const SynthConfig& cfg);

// The state the scan row at time t was generated from: the paradigm delayed
// by the hemodynamic shift, with the prefix held at state 0.
int scan_state_at(const SynthSubject& subject, int t, const SynthConfig& cfg);

// Best per-timepoint accuracy of any memoryless decoder on the generated set,
// tabulated by brute force: timepoints are grouped by loading-row identity and
// each group contributes its majority label. Requires temporal_ambiguity.
double ambiguity_bayes_bound(const SynthConfig& cfg);
double ambiguity_bayes_bound(const std::vector<SynthSubject>& subjects, const SynthConfig& cfg);

}  // namespace braindec
