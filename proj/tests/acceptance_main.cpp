// Acceptance gate. Each numbered criterion runs in its own process
// (argv[1] selects it; criterion 9 also takes the CLI binary path as argv[2])
// and prints exactly one line:
//
//   [PASS] criterion N: <measured values against the pinned tolerance>
//   [FAIL] criterion N: <what was measured instead>
//
// Tolerances are pinned in the line itself so a log is self-describing.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "braindec/evaluation.hpp"
#include "braindec/forest.hpp"
#include "braindec/lstm.hpp"
#include "braindec/rng.hpp"
#include "braindec/sensitivity.hpp"
#include "braindec/signal_features.hpp"
#include "braindec/synthgen.hpp"
#include "braindec/trainer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace braindec;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

FeatureSequence random_features(Rng& rng, Eigen::Index t, Eigen::Index k) {
  FeatureSequence f;
  f.values.resize(t, k);
  for (Eigen::Index a = 0; a < t; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) f.values(a, b) = rng.normal();
  }
  return f;
}

LabelTrack random_labels(Rng& rng, Eigen::Index t, int s) {
  LabelTrack l;
  for (Eigen::Index i = 0; i < t; ++i) {
    l.states.push_back(static_cast<int>(rng.index(static_cast<std::uint64_t>(s))));
  }
  return l;
}

// ---- criterion 1: analytic gradients vs central finite differences --------

Outcome criterion_1() {
  const auto start = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  const int instances = 20;
  for (int i = 0; i < instances; ++i) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.index(8));  // <= 8
    const Eigen::Index h = 1 + static_cast<Eigen::Index>(rng.index(8));
    const int s = 2 + static_cast<int>(rng.index(7));                    // 2..8
    const Eigen::Index t = 1 + static_cast<Eigen::Index>(rng.index(8));
    const DecoderParams p = init_params(k, h, s, 1000 + static_cast<std::uint64_t>(i));
    const FeatureSequence f = random_features(rng, t, k);
    const LabelTrack labels = random_labels(rng, t, s);

    const ForwardCache cache = forward(f, p);
    const auto [loss_value, grads] = backward(f, labels, p, cache);
    static_cast<void>(loss_value);
    const GradientSet fd = oracle::fd_gradients(f, labels, p, 1e-5);
    worst = std::max(worst, oracle::max_rel_err(grads, fd, 1e-4));
  }
  const double elapsed = seconds_since(start);

  Outcome o;
  o.pass = worst < 1e-5 && elapsed < 30.0;
  std::ostringstream os;
  os << instances << " random decoders (K,H,S,T <= 8): max relative gradient error " << worst
     << " vs tolerance 1e-5 (central differences, h=1e-5, denominator floor 1e-4); " << elapsed
     << "s of 30s budget";
  o.detail = os.str();
  return o;
}

// ---- criterion 2: vectorized forward vs scalar-loop oracle ----------------

Outcome criterion_2() {
  Rng rng(202);
  double worst = 0.0;
  const int instances = 10;
  for (int i = 0; i < instances; ++i) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.index(10));
    const Eigen::Index h = 1 + static_cast<Eigen::Index>(rng.index(10));
    const int s = 2 + static_cast<int>(rng.index(9));
    const Eigen::Index t = 1 + static_cast<Eigen::Index>(rng.index(10));
    const DecoderParams p = init_params(k, h, s, 2000 + static_cast<std::uint64_t>(i));
    const FeatureSequence f = random_features(rng, t, k);

    const ForwardCache cache = forward(f, p);
    const std::vector<std::vector<double>> ref = oracle::scalar_forward(f, p);
    for (Eigen::Index a = 0; a < t; ++a) {
      for (int b = 0; b < s; ++b) {
        worst = std::max(worst,
                         std::abs(cache.probs(a, b) - ref[static_cast<std::size_t>(a)]
                                                         [static_cast<std::size_t>(b)]));
      }
    }
  }
  Outcome o;
  o.pass = worst < 1e-12;
  std::ostringstream os;
  os << instances << " random decoders: max |probability difference| " << worst
     << " vs tolerance 1e-12 against the scalar-loop oracle";
  o.detail = os.str();
  return o;
}

// ---- criterion 3: one clip memorized under the step budget ----------------

Outcome criterion_3() {
  const auto start = Clock::now();
  SynthConfig scfg;
  scfg.n_subjects = 1;
  scfg.t = 40;
  scfg.k = 8;
  scfg.s_vox = 64;
  scfg.n_states = 4;
  scfg.noise_sigma = 0.1;
  scfg.hemodynamic_shift = 0;
  scfg.seed = 11;
  const std::vector<SynthSubject> subjects = generate(scfg);
  SubjectData subject;
  subject.id = 0;
  subject.features = extract_features(subjects[0].scan, row_normalize(subjects[0].networks));
  subject.labels = shift_labels(subjects[0].paradigm, 0);

  TrainConfig cfg;
  cfg.max_steps = 2000;
  cfg.eval_every = 100;
  cfg.patience = 1000;
  cfg.batch_size = 1;
  cfg.seed = 11;
  const TrainResult r = train({subject}, {subject}, cfg, 8, 4);

  double min_loss = std::numeric_limits<double>::infinity();
  for (const TrainLogRow& row : r.log) min_loss = std::min(min_loss, row.train_loss);
  const double elapsed = seconds_since(start);

  Outcome o;
  o.pass = min_loss < 0.01 && elapsed < 60.0;
  std::ostringstream os;
  os << "single 40-point clip, hidden size 8: best 100-step-window training loss " << min_loss
     << " vs tolerance 0.01 within " << r.steps_run << " of 2000 steps; " << elapsed
     << "s of 60s budget";
  o.detail = os.str();
  return o;
}

// ---- criterion 4: sequence model beats the memoryless bound ---------------

std::vector<SubjectData> featurize_range(const std::vector<SynthSubject>& subjects,
                                         const SynthConfig& cfg, int lo, int hi) {
  std::vector<SubjectData> out;
  for (int i = lo; i < hi; ++i) {
    SubjectData s;
    s.id = i;
    s.features = extract_features(subjects[static_cast<std::size_t>(i)].scan,
                                  row_normalize(subjects[static_cast<std::size_t>(i)].networks));
    s.labels =
        shift_labels(subjects[static_cast<std::size_t>(i)].paradigm, cfg.hemodynamic_shift);
    out.push_back(std::move(s));
  }
  return out;
}

Outcome criterion_4() {
  const auto start = Clock::now();
  SynthConfig scfg;  // defaults: 35 subjects, t=200, k=8, s_vox=64, 4 states,
                     // blocks 10..20, sigma 0.1, shift 8
  scfg.temporal_ambiguity = true;
  scfg.seed = 42;
  const std::vector<SynthSubject> subjects = generate(scfg);
  const double bound = ambiguity_bayes_bound(subjects, scfg);

  const std::vector<SubjectData> train_set = featurize_range(subjects, scfg, 0, 20);
  const std::vector<SubjectData> val_set = featurize_range(subjects, scfg, 20, 25);
  const std::vector<SubjectData> test_set = featurize_range(subjects, scfg, 25, 35);

  TrainConfig cfg;
  cfg.max_steps = 2000;
  cfg.eval_every = 250;
  cfg.patience = 1000;
  cfg.seed = 42;
  const TrainResult trained = train(train_set, val_set, cfg, 32, 4);

  std::vector<double> lstm_accs, rf_accs;
  for (const SubjectData& s : test_set) {
    lstm_accs.push_back(timepoint_accuracy(predict(s.features, trained.best_params), s.labels));
  }
  double lstm_mean = 0.0;
  for (double a : lstm_accs) lstm_mean += a;
  lstm_mean /= static_cast<double>(lstm_accs.size());

  const RfGridResult rf =
      grid_search(stack_timepoints(train_set), stack_timepoints(val_set), RfGrids{}, 42);
  for (const SubjectData& s : test_set) {
    rf_accs.push_back(timepoint_accuracy(predict_rows(rf.forest, s.features), s.labels));
  }
  double rf_mean = 0.0;
  for (double a : rf_accs) rf_mean += a;
  rf_mean /= static_cast<double>(rf_accs.size());

  const WilcoxonResult w = wilcoxon_signed_rank(lstm_accs, rf_accs);
  const double elapsed = seconds_since(start);

  Outcome o;
  o.pass = rf_mean <= bound + 0.03 && lstm_mean >= bound + 0.10 && w.p < 0.05 &&
           elapsed < 900.0;
  std::ostringstream os;
  os << "ambiguous cohort (10 test subjects): memoryless bound " << bound
     << "; forest mean accuracy " << rf_mean << " (must be <= bound+0.03 = " << bound + 0.03
     << "); LSTM mean accuracy " << lstm_mean << " (must be >= bound+0.10 = " << bound + 0.10
     << "); Wilcoxon W=" << w.w << ", p=" << w.p << " (must be < 0.05); " << elapsed
     << "s of 900s budget";
  o.detail = os.str();
  return o;
}

// ---- criterion 5: clip windowing against enumeration ----------------------

Outcome criterion_5() {
  const auto clips_for = [](long t) {
    FeatureSequence f;
    f.values = Eigen::MatrixXd::Zero(t, 2);
    LabelTrack labels;
    labels.states.assign(static_cast<std::size_t>(t), 0);
    return make_clips(f, labels, 40, 20);
  };

  bool ok = true;
  std::ostringstream os;

  const auto check_against_oracle = [&](long t) {
    const auto clips = clips_for(t);
    const std::vector<long> expect = oracle::clip_starts(t, 40, 20);
    if (clips.size() != expect.size()) {
      ok = false;
      return clips.size();
    }
    for (std::size_t i = 0; i < clips.size(); ++i) {
      if (clips[i].start != expect[i]) ok = false;
    }
    return clips.size();
  };

  const std::size_t n405 = check_against_oracle(405);
  const std::size_t n100 = check_against_oracle(100);
  if (n405 != 20) ok = false;
  if (n100 != 4) ok = false;

  // The documented 405-point layout: starts 0,20,...,360 plus the tail at 365.
  const auto clips405 = clips_for(405);
  for (std::size_t i = 0; i + 1 < clips405.size(); ++i) {
    if (clips405[i].start != static_cast<long>(20 * i)) ok = false;
  }
  if (clips405.back().start != 365) ok = false;

  Rng rng(505);
  for (int rep = 0; rep < 50; ++rep) {
    check_against_oracle(40 + static_cast<long>(rng.index(400)));
  }

  Outcome o;
  o.pass = ok;
  os << "405 time points -> " << n405 << " clips (expected 20, tail start "
     << clips405.back().start << "), 100 -> " << n100
     << " (expected 4); 50 random lengths match the enumeration oracle exactly";
  o.detail = os.str();
  return o;
}

// ---- criterion 6: exact signed-rank p-values vs brute force ---------------

Outcome criterion_6() {
  Rng rng(606);
  bool ok = true;
  int cases = 0;
  for (int m = 1; m <= 12; ++m) {
    for (int rep = 0; rep < 6; ++rep) {
      std::vector<double> a, b;
      for (int i = 0; i < m; ++i) {
        if (rep < 3) {
          a.push_back(rng.normal());
          b.push_back(rng.normal());
        } else {
          // Quantized draws force tied magnitudes and zero differences.
          a.push_back(std::round(rng.normal() * 2.0) / 2.0);
          b.push_back(std::round(rng.normal() * 2.0) / 2.0);
        }
      }
      const WilcoxonResult got = wilcoxon_signed_rank(a, b);
      const oracle::WilcoxonBrute expect = oracle::wilcoxon_enumerate(a, b);
      ++cases;
      if (got.m != expect.m) ok = false;
      if (expect.m == 0) continue;
      if (got.w != expect.w || got.p != expect.p) ok = false;  // bitwise
    }
  }

  // Pinned example: five positive differences, W = 15, p = 2/32 = 0.0625.
  const WilcoxonResult pinned =
      wilcoxon_signed_rank({1.0, 2.0, 3.0, 4.0, 5.0}, {0.9, 1.8, 2.7, 3.6, 4.5});
  const bool pinned_ok = pinned.w == 15.0 && pinned.p == 0.0625 && pinned.exact;
  if (!pinned_ok) ok = false;

  Outcome o;
  o.pass = ok;
  std::ostringstream os;
  os << cases << " samples across m=1..12 match the 2^m enumeration bit for bit; "
     << "pinned all-positive n=5 case gives W=" << pinned.w << ", p=" << pinned.p
     << " (expected 15, 0.0625 exactly)";
  o.detail = os.str();
  return o;
}

// ---- criterion 7: PCA spectrum and component structure --------------------

Outcome criterion_7() {
  Rng rng(707);
  double worst_ortho = 0.0;
  double worst_var = 0.0;
  bool informative_ok = true;
  const int instances = 20;
  for (int i = 0; i < instances; ++i) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.index(11));  // <= 12
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.index(11));
    Eigen::MatrixXd m(k, n);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) m(a, b) = rng.normal();
    }
    const PcaResult p = pca(m);

    const Eigen::MatrixXd gram = p.components.transpose() * p.components;
    worst_ortho = std::max(
        worst_ortho, (gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff());

    Eigen::MatrixXd centered = m;
    for (Eigen::Index a = 0; a < k; ++a) centered.row(a).array() -= m.row(a).mean();
    const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(n - 1);
    const oracle::EigenSym es = oracle::jacobi_eigen_sym(cov);
    for (Eigen::Index a = 0; a < k; ++a) {
      worst_var = std::max(worst_var, std::abs(p.variances(a) - es.values(a)));
    }

    // Planted informative FN: one row alternates +-5 so its centered variance
    // is ~25 for any N >= 2, while every other row stays at noise level.
    const Eigen::Index star = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(k)));
    Eigen::MatrixXd planted(k, n);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) {
        planted(a, b) = a == star ? (b % 2 == 0 ? 5.0 : -5.0) + 0.1 * rng.normal()
                                  : 0.05 * rng.normal();
      }
    }
    const std::vector<int> top = top_fns(pca(planted), 1);
    if (top.empty() || top[0] != static_cast<int>(star)) informative_ok = false;
  }

  Outcome o;
  o.pass = worst_ortho < 1e-10 && worst_var < 1e-10 && informative_ok;
  std::ostringstream os;
  os << instances << " random K,N <= 12 matrices: worst orthonormality defect " << worst_ortho
     << " and worst variance gap vs the Jacobi eigensolver " << worst_var
     << " (tolerance 1e-10 each); planted informative FN ranked first in "
     << (informative_ok ? "all" : "NOT all") << " instances";
  o.detail = os.str();
  return o;
}

// ---- criterion 8: learning-rate schedule literals -------------------------

Outcome criterion_8() {
  TrainConfig cfg;
  const std::vector<std::pair<long, double>> expect = {
      {0, 0.001},      {49999, 0.001},   {50000, 0.0001},
      {100000, 0.00001}, {150000, 0.000001}, {199999, 0.000001},
  };
  bool ok = true;
  std::ostringstream os;
  os << "step decay literals:";
  for (const auto& [step, lr] : expect) {
    const double got = lr_at(step, cfg);
    if (got != lr) ok = false;
    os << " lr(" << step << ")=" << got;
  }
  os << " (each must equal its decimal literal exactly)";
  Outcome o;
  o.pass = ok;
  o.detail = os.str();
  return o;
}

// ---- criterion 9: the demo pipeline is bit-reproducible -------------------

int run_in(const fs::path& cwd, const std::string& cli, const std::string& args) {
  const std::string cmd =
      "cd '" + cwd.string() + "' && '" + cli + "' " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

bool run_demo_pipeline(const fs::path& root, const std::string& cli) {
  fs::create_directories(root);
  const std::vector<std::string> steps = {
      "synth --out synth --seed 9 --n-train 3 --n-val 1 --n-test 2"
      " --t 60 --k 3 --s-vox 12 --n-states 3 --block-min 5 --block-max 9"
      " --noise-sigma 0.05 --hemodynamic-shift 4",
      "featurize --data synth --out feat --shift 4",
      "train --data feat --out model --hidden 4 --states 3 --max-steps 40"
      " --eval-every 20 --patience 100 --batch-size 4 --seed 3",
      "predict --model model/checkpoint.bin --data feat --split test --out pred",
      "baseline --data feat --out rf --trees 10,20 --min-leaf 2,4 --seed 7",
      "eval --pred pred --pred-b rf/predictions --truth feat/test --out eval",
      "sensitivity --model model/checkpoint.bin --data feat --split test --top 2 --out sens",
  };
  for (const std::string& step : steps) {
    if (run_in(root, cli, step) != 0) return false;
  }
  return true;
}

Outcome criterion_9(const std::string& cli_arg) {
  const std::string cli = fs::absolute(cli_arg).string();
  const fs::path base = fs::temp_directory_path() / "braindec_acceptance_c9";
  fs::remove_all(base);
  const fs::path a = base / "a";
  const fs::path b = base / "b";

  Outcome o;
  if (!run_demo_pipeline(a, cli) || !run_demo_pipeline(b, cli)) {
    o.detail = "demo pipeline (synth/featurize/train/predict/baseline/eval/sensitivity) "
               "did not complete cleanly in both roots";
    return o;
  }

  // Collect relative-path -> bytes for both trees and compare everything.
  const auto collect = [](const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (!entry.is_regular_file()) continue;
      std::ifstream is(entry.path(), std::ios::binary);
      files[fs::relative(entry.path(), root).string()] =
          std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    }
    return files;
  };
  const auto files_a = collect(a);
  const auto files_b = collect(b);

  std::size_t mismatched = 0;
  std::string first_mismatch;
  if (files_a.size() != files_b.size()) {
    mismatched = files_a.size() > files_b.size() ? files_a.size() - files_b.size()
                                                 : files_b.size() - files_a.size();
    first_mismatch = "file sets differ";
  } else {
    for (const auto& [rel, bytes] : files_a) {
      const auto it = files_b.find(rel);
      if (it == files_b.end() || it->second != bytes) {
        ++mismatched;
        if (first_mismatch.empty()) first_mismatch = rel;
      }
    }
  }

  o.pass = mismatched == 0 && !files_a.empty();
  std::ostringstream os;
  if (o.pass) {
    os << "two identical pipeline runs produced " << files_a.size()
       << " files each, every one byte-identical across runs";
    fs::remove_all(base);
  } else {
    os << mismatched << " of " << files_a.size() << " files differ between runs (first: "
       << first_mismatch << "); artifacts kept in " << base.string();
  }
  o.detail = os.str();
  return o;
}

// ---- criterion 10: the worked projection example and normalization --------

Outcome criterion_10() {
  Eigen::MatrixXd scan(2, 3);
  scan << 1, 2, 3, 4, 5, 6;
  Eigen::MatrixXd networks(2, 3);
  networks << 0.5, 0.5, 0.0, 0.0, 0.0, 1.0;
  const FeatureSequence f =
      extract_features(VoxelScan{scan}, FunctionalNetworks{networks});
  const bool example_ok = f.values(0, 0) == 1.5 && f.values(0, 1) == 3.0 &&
                          f.values(1, 0) == 4.5 && f.values(1, 1) == 6.0;

  Rng rng(1010);
  double worst = 0.0;
  const int instances = 100;
  for (int i = 0; i < instances; ++i) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.index(6));
    const Eigen::Index v = k + static_cast<Eigen::Index>(rng.index(10));
    Eigen::MatrixXd w(k, v);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < v; ++b) w(a, b) = rng.uniform(0.1, 2.0);
    }
    const FunctionalNetworks once = row_normalize(FunctionalNetworks{w});
    const FunctionalNetworks twice = row_normalize(once);
    worst = std::max(worst, (once.values - twice.values).cwiseAbs().maxCoeff());
  }

  Outcome o;
  o.pass = example_ok && worst < 1e-12;
  std::ostringstream os;
  os << "worked projection example gives [[" << f.values(0, 0) << "," << f.values(0, 1) << "],["
     << f.values(1, 0) << "," << f.values(1, 1)
     << "]] (expected [[1.5,3],[4.5,6]] exactly); row_normalize idempotence defect " << worst
     << " vs tolerance 1e-12 over " << instances << " random matrices";
  o.detail = os.str();
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <criterion 1..10> [cli-path (criterion 9)]\n";
    return 2;
  }
  const int criterion = std::atoi(argv[1]);
  Outcome o;
  switch (criterion) {
    case 1: o = criterion_1(); break;
    case 2: o = criterion_2(); break;
    case 3: o = criterion_3(); break;
    case 4: o = criterion_4(); break;
    case 5: o = criterion_5(); break;
    case 6: o = criterion_6(); break;
    case 7: o = criterion_7(); break;
    case 8: o = criterion_8(); break;
    case 9:
      if (argc < 3) {
        std::cerr << "criterion 9 needs the CLI binary path as argv[2]\n";
        return 2;
      }
      o = criterion_9(argv[2]);
      break;
    case 10: o = criterion_10(); break;
    default:
      std::cerr << "unknown criterion " << argv[1] << "\n";
      return 2;
  }
  std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << o.detail
            << "\n";
  return o.pass ? 0 : 1;
}
