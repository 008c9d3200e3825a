#include "braindec/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "braindec/errors.hpp"
#include "braindec/rng.hpp"

namespace braindec {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Loading rows are redrawn until they keep this distance from every earlier
// row, so nearest-loading decoding stays robust under the default noise.
constexpr double kMinRowDistance = 0.5;

Eigen::MatrixXd draw_loadings(const SynthConfig& cfg) {
  Rng rng(mix_seed(cfg.seed, 0x10adu));
  Eigen::MatrixXd loadings(cfg.n_states, cfg.k);
  for (int s = 0; s < cfg.n_states; ++s) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (int j = 0; j < cfg.k; ++j) loadings(s, j) = rng.uniform(0.2, 1.0);
      double min_dist = kMinRowDistance;
      for (int prev = 0; prev < s; ++prev) {
        min_dist = std::min(min_dist, (loadings.row(s) - loadings.row(prev)).norm());
      }
      if (min_dist >= kMinRowDistance) break;
    }
  }
  if (cfg.temporal_ambiguity) {
    // The designated pair shares one row; context is the only difference.
    loadings.row(cfg.n_states - 1) = loadings.row(cfg.n_states - 2);
  }
  return loadings;
}

// K disjoint cells of voxel indices, one cos^2 bump per cell with a jittered
// center. Rows are rescaled so sum(V^2) == sum(V): with disjoint supports that
// makes extract_features return the loadings themselves at zero noise.
FunctionalNetworks make_networks(const SynthConfig& cfg, Rng& rng) {
  FunctionalNetworks fn;
  fn.values = Eigen::MatrixXd::Zero(cfg.k, cfg.s_vox);
  const double spacing = static_cast<double>(cfg.s_vox) / static_cast<double>(cfg.k);
  for (int j = 0; j < cfg.k; ++j) {
    const int lo = static_cast<int>(std::floor(j * spacing));
    const int hi = static_cast<int>(std::floor((j + 1) * spacing));
    const double cell_len = static_cast<double>(hi - lo);
    const double center =
        (static_cast<double>(lo + hi - 1)) / 2.0 + rng.uniform(-0.15 * spacing, 0.15 * spacing);
    const double radius = 0.6 * cell_len;
    for (int v = lo; v < hi; ++v) {
      const double x = std::min(1.0, std::abs(static_cast<double>(v) - center) / radius);
      fn.values(j, v) = std::cos(0.5 * kPi * x) * std::cos(0.5 * kPi * x);
    }
    const double sum = fn.values.row(j).sum();
    const double sumsq = fn.values.row(j).squaredNorm();
    if (!(sumsq > 0.0)) throw NumericError("synthgen: degenerate FN bump");
    fn.values.row(j) *= sum / sumsq;  // now sum(V^2) == sum(V)
  }
  return fn;
}

// Appends `state` repeated `len` times, truncating at cfg.t.
void append_block(std::vector<int>& labels, int state, int len, int t_max) {
  for (int i = 0; i < len && static_cast<int>(labels.size()) < t_max; ++i) {
    labels.push_back(state);
  }
}

LabelTrack make_paradigm(const SynthConfig& cfg, Rng& rng) {
  // Units are the state sequences a round is shuffled over. Normal mode:
  // singleton units, one per state. Ambiguity mode: [0, S-2] and [1, S-1]
  // pairs fix the predecessors of the two ambiguous states; any states in
  // between stay singletons.
  std::vector<std::vector<int>> units;
  if (cfg.temporal_ambiguity) {
    units.push_back({0, cfg.n_states - 2});
    units.push_back({1, cfg.n_states - 1});
    for (int s = 2; s < cfg.n_states - 2; ++s) units.push_back({s});
  } else {
    for (int s = 0; s < cfg.n_states; ++s) units.push_back({s});
  }

  std::vector<int> labels;
  labels.reserve(cfg.t);
  bool first_round = true;
  int prev_last = -1;
  while (static_cast<int>(labels.size()) < cfg.t) {
    std::vector<std::size_t> order(units.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    if (first_round) {
      // The paradigm must open with the fixation state 0: rotate the unit
      // starting with state 0 to the front.
      const auto it = std::find_if(order.begin(), order.end(),
                                   [&](std::size_t u) { return units[u].front() == 0; });
      std::rotate(order.begin(), it, it + 1);
      first_round = false;
    } else if (units[order.front()].front() == prev_last && order.size() > 1) {
      std::swap(order[0], order[1]);
    }
    for (std::size_t u : order) {
      for (int state : units[u]) {
        const int len = static_cast<int>(rng.uniform_int(cfg.block_min, cfg.block_max));
        append_block(labels, state, len, cfg.t);
        if (static_cast<int>(labels.size()) >= cfg.t) break;
      }
      if (static_cast<int>(labels.size()) >= cfg.t) break;
    }
    prev_last = labels.back();
  }
  LabelTrack track;
  track.states = std::move(labels);
  return track;
}

}  // namespace

void validate(const SynthConfig& cfg) {
  auto bad = [](const std::string& msg) { throw ShapeError("SynthConfig: " + msg); };
  if (cfg.n_subjects < 1) bad("n_subjects must be >= 1");
  if (cfg.t < 1) bad("t must be >= 1");
  if (cfg.k < 1) bad("k must be >= 1");
  if (cfg.k > cfg.s_vox) bad("k must not exceed s_vox");
  if (cfg.n_states < 2) bad("n_states must be >= 2");
  if (cfg.block_min < 1 || cfg.block_max < cfg.block_min) {
    bad("need 1 <= block_min <= block_max");
  }
  if (!(cfg.noise_sigma >= 0.0)) bad("noise_sigma must be >= 0");
  if (cfg.hemodynamic_shift < 0 || cfg.hemodynamic_shift >= cfg.t) {
    bad("need 0 <= hemodynamic_shift < t");
  }
  if (cfg.temporal_ambiguity && cfg.n_states < 4) {
    bad("temporal_ambiguity needs n_states >= 4");
  }
}

SynthConfig parse_synth_config(const KvPairs& kv) {
  SynthConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "n_subjects") cfg.n_subjects = static_cast<int>(parse_long(value, key));
    else if (key == "t") cfg.t = static_cast<int>(parse_long(value, key));
    else if (key == "k") cfg.k = static_cast<int>(parse_long(value, key));
    else if (key == "s_vox") cfg.s_vox = static_cast<int>(parse_long(value, key));
    else if (key == "n_states") cfg.n_states = static_cast<int>(parse_long(value, key));
    else if (key == "block_min") cfg.block_min = static_cast<int>(parse_long(value, key));
    else if (key == "block_max") cfg.block_max = static_cast<int>(parse_long(value, key));
    else if (key == "noise_sigma") cfg.noise_sigma = parse_double(value, key);
    else if (key == "hemodynamic_shift")
      cfg.hemodynamic_shift = static_cast<int>(parse_long(value, key));
    else if (key == "temporal_ambiguity")
      cfg.temporal_ambiguity = parse_long(value, key) != 0;
    else if (key == "seed") cfg.seed = parse_u64(value, key);
    else throw ParseError("unknown synth config key '" + key + "'");
  }
  validate(cfg);
  return cfg;
}

KvPairs synth_config_kv(const SynthConfig& cfg) {
  return {
      {"n_subjects", std::to_string(cfg.n_subjects)},
      {"t", std::to_string(cfg.t)},
      {"k", std::to_string(cfg.k)},
      {"s_vox", std::to_string(cfg.s_vox)},
      {"n_states", std::to_string(cfg.n_states)},
      {"block_min", std::to_string(cfg.block_min)},
      {"block_max", std::to_string(cfg.block_max)},
      {"noise_sigma", format_double(cfg.noise_sigma)},
      {"hemodynamic_shift", std::to_string(cfg.hemodynamic_shift)},
      {"temporal_ambiguity", cfg.temporal_ambiguity ? "1" : "0"},
      {"seed", std::to_string(cfg.seed)},
  };
}

std::vector<SynthSubject> generate(const SynthConfig& cfg) {
  validate(cfg);
  const Eigen::MatrixXd loadings = draw_loadings(cfg);
  std::vector<SynthSubject> subjects(cfg.n_subjects);
  for (int i = 0; i < cfg.n_subjects; ++i) {
    Rng rng(mix_seed(cfg.seed, 0x50b0000u + static_cast<std::uint64_t>(i)));
    SynthSubject& subj = subjects[i];
    subj.loadings = loadings;
    subj.networks = make_networks(cfg, rng);
    subj.paradigm = make_paradigm(cfg, rng);
    subj.scan.values.resize(cfg.t, cfg.s_vox);
    for (int t = 0; t < cfg.t; ++t) {
      const int state = scan_state_at(subj, t, cfg);
      subj.scan.values.row(t) = loadings.row(state) * subj.networks.values;
      for (int v = 0; v < cfg.s_vox; ++v) {
        subj.scan.values(t, v) += rng.normal(0.0, cfg.noise_sigma);
      }
    }
  }
  return subjects;
}

int scan_state_at(const SynthSubject& subject, int t, const SynthConfig& cfg) {
  if (t < cfg.hemodynamic_shift) return 0;
  return subject.paradigm.states[t - cfg.hemodynamic_shift];
}

double ambiguity_bayes_bound(const std::vector<SynthSubject>& subjects, const SynthConfig& cfg) {
  if (!cfg.temporal_ambiguity) {
    throw ShapeError("ambiguity_bayes_bound: temporal_ambiguity is disabled");
  }
  if (subjects.empty()) throw ShapeError("ambiguity_bayes_bound: no subjects");

  // Two states are indistinguishable to a memoryless decoder exactly when
  // their loading rows are identical. Map each state to its identity class.
  const Eigen::MatrixXd& loadings = subjects.front().loadings;
  std::vector<int> state_class(cfg.n_states);
  for (int s = 0; s < cfg.n_states; ++s) {
    state_class[s] = s;
    for (int prev = 0; prev < s; ++prev) {
      if (loadings.row(s) == loadings.row(prev)) {
        state_class[s] = state_class[prev];
        break;
      }
    }
  }

  // counts[class][label]: how often the decoder sees `class` while the target
  // label is `label`. The best memoryless decoder answers each class with its
  // majority label.
  std::vector<std::vector<long>> counts(cfg.n_states, std::vector<long>(cfg.n_states, 0));
  long total = 0;
  for (const SynthSubject& subj : subjects) {
    for (int t = 0; t < cfg.t; ++t) {
      const int label = scan_state_at(subj, t, cfg);
      ++counts[state_class[label]][label];
      ++total;
    }
  }
  long best = 0;
  for (const std::vector<long>& row : counts) {
    best += *std::max_element(row.begin(), row.end());
  }
  return static_cast<double>(best) / static_cast<double>(total);
}

double ambiguity_bayes_bound(const SynthConfig& cfg) {
  return ambiguity_bayes_bound(generate(cfg), cfg);
}

}  // namespace braindec
