// braindec: command line front end for the brain-state decoding pipeline.
//
// Subcommands: synth, featurize, train, predict, eval, baseline, sensitivity.
// Every run writes exactly one manifest.txt next to its outputs; with equal
// inputs, flags and seed the whole output tree is byte-identical across runs.
// Exit codes: 0 ok, 2 usage, 3 parse/shape error, 4 numeric failure, 5 I/O.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "braindec/checkpoint.hpp"
#include "braindec/errors.hpp"
#include "braindec/evaluation.hpp"
#include "braindec/forest.hpp"
#include "braindec/io.hpp"
#include "braindec/lstm.hpp"
#include "braindec/sensitivity.hpp"
#include "braindec/signal_features.hpp"
#include "braindec/synthgen.hpp"
#include "braindec/trainer.hpp"
#include "braindec/version.hpp"

namespace fs = std::filesystem;
using namespace braindec;

namespace {

// Bad flag combinations the CLI grammar cannot express; mapped to exit 2.
struct UsageError {
  std::string msg;
};

void set_kv(KvPairs& kv, const std::string& key, const std::string& value) {
  for (auto& [k, v] : kv) {
    if (k == key) {
      v = value;
      return;
    }
  }
  kv.emplace_back(key, value);
}

const std::string* find_kv(const KvPairs& kv, const std::string& key) {
  for (const auto& [k, v] : kv) {
    if (k == key) return &v;
  }
  return nullptr;
}

KvPairs take_keys(KvPairs& kv, const std::vector<std::string>& keys) {
  KvPairs taken;
  KvPairs rest;
  for (auto& pair : kv) {
    if (std::find(keys.begin(), keys.end(), pair.first) != keys.end()) {
      taken.push_back(std::move(pair));
    } else {
      rest.push_back(std::move(pair));
    }
  }
  kv = std::move(rest);
  return taken;
}

// One mirrored config key: CLI value (as text) applied over the file value.
struct KeyOverride {
  std::string key;
  std::string value;
  CLI::Option* opt = nullptr;
};

class KeyOverrides {
 public:
  void add(CLI::App* cmd, const std::string& flag, const std::string& key,
           const std::string& help) {
    entries_.push_back(std::make_unique<KeyOverride>());
    KeyOverride& e = *entries_.back();
    e.key = key;
    e.opt = cmd->add_option(flag, e.value, help);
  }

  void apply(KvPairs& kv) const {
    for (const auto& e : entries_) {
      if (e->opt->count() > 0) set_kv(kv, e->key, e->value);
    }
  }

 private:
  std::vector<std::unique_ptr<KeyOverride>> entries_;
};

struct CommonArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* config_opt = nullptr;

  void attach(CLI::App* cmd) {
    config_opt = cmd->add_option("--config", config, "key=value config file");
    cmd->add_option("--out", out, "output directory")->required();
    seed_opt = cmd->add_option("--seed", seed, "seed override");
  }

  KvPairs load_config_kv() const {
    if (config_opt->count() == 0) return {};
    return read_kv_file(config);
  }

  // --seed beats the config file which beats the default.
  void apply_seed(KvPairs& kv) const {
    if (seed_opt->count() > 0) set_kv(kv, "seed", std::to_string(seed));
  }

  fs::path out_dir() const {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
  }
};

void write_manifest(const fs::path& out_dir, const std::string& command, const KvPairs& entries) {
  KvPairs kv;
  kv.emplace_back("command", command);
  kv.emplace_back("version", kVersion);
  for (const auto& e : entries) kv.push_back(e);
  write_kv_file(out_dir / "manifest.txt", kv);
}

std::string subject_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "subj_%03d", index);
  return buf;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string part =
        s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    out.push_back(static_cast<int>(parse_long(part, what)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// Sorted (name, path) pairs of the subject subdirectories of `dir`.
std::vector<std::pair<std::string, fs::path>> subject_dirs(const fs::path& dir) {
  std::vector<std::pair<std::string, fs::path>> out;
  for (const fs::path& p : list_subdirs_sorted(dir)) {
    out.emplace_back(p.filename().string(), p);
  }
  return out;
}

const std::vector<std::string> kSplits = {"train", "val", "test"};

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
  CommonArgs common;
  KeyOverrides keys;
};

void setup_synth(CLI::App& app, SynthArgs& args) {
  CLI::App* cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  args.common.attach(cmd);
  args.keys.add(cmd, "--n-train", "n_train", "training subjects (default 20)");
  args.keys.add(cmd, "--n-val", "n_val", "validation subjects (default 5)");
  args.keys.add(cmd, "--n-test", "n_test", "test subjects (default 10)");
  args.keys.add(cmd, "--n-subjects", "n_subjects", "total subjects (overrides the split sum)");
  args.keys.add(cmd, "--t", "t", "time points per scan");
  args.keys.add(cmd, "--k", "k", "functional network count");
  args.keys.add(cmd, "--s-vox", "s_vox", "voxel count");
  args.keys.add(cmd, "--n-states", "n_states", "brain state count");
  args.keys.add(cmd, "--block-min", "block_min", "minimum block length");
  args.keys.add(cmd, "--block-max", "block_max", "maximum block length");
  args.keys.add(cmd, "--noise-sigma", "noise_sigma", "scan noise sigma");
  args.keys.add(cmd, "--hemodynamic-shift", "hemodynamic_shift", "BOLD delay in time points");
  args.keys.add(cmd, "--temporal-ambiguity", "temporal_ambiguity",
                "1 enables the ambiguous-state mode");
  cmd->callback([&args] {
    KvPairs kv = args.common.load_config_kv();
    args.keys.apply(kv);
    args.common.apply_seed(kv);

    KvPairs split_kv = take_keys(kv, {"n_train", "n_val", "n_test"});
    int n_train = 20, n_val = 5, n_test = 10;
    if (const std::string* v = find_kv(split_kv, "n_train"))
      n_train = static_cast<int>(parse_long(*v, "n_train"));
    if (const std::string* v = find_kv(split_kv, "n_val"))
      n_val = static_cast<int>(parse_long(*v, "n_val"));
    if (const std::string* v = find_kv(split_kv, "n_test"))
      n_test = static_cast<int>(parse_long(*v, "n_test"));
    if (n_train < 1 || n_val < 0 || n_test < 0) {
      throw ShapeError("synth: need n_train >= 1 and nonnegative n_val, n_test");
    }

    if (const std::string* v = find_kv(kv, "n_subjects")) {
      // Explicit total: fill train first, then val, then test; any surplus
      // beyond the configured split widens the test set.
      const int total = static_cast<int>(parse_long(*v, "n_subjects"));
      n_train = std::min(total, n_train);
      n_val = std::min(total - n_train, n_val);
      n_test = total - n_train - n_val;
    } else {
      set_kv(kv, "n_subjects", std::to_string(n_train + n_val + n_test));
    }

    const SynthConfig cfg = parse_synth_config(kv);
    const std::vector<SynthSubject> subjects = generate(cfg);

    const fs::path out = args.common.out_dir();
    write_matrix_csv(out / "loadings.csv", subjects.front().loadings);
    int index = 0;
    for (const std::string& split : kSplits) {
      const int count = split == "train" ? n_train : (split == "val" ? n_val : n_test);
      if (count == 0) {
        std::cerr << "warning: " << split << " split is empty\n";
        continue;
      }
      const fs::path split_dir = out / split;
      fs::create_directories(split_dir);
      for (int i = 0; i < count; ++i, ++index) {
        const fs::path subj_dir = split_dir / subject_dir_name(index);
        fs::create_directories(subj_dir);
        const SynthSubject& s = subjects[index];
        write_matrix_csv(subj_dir / "scan.csv", s.scan.values);
        write_matrix_csv(subj_dir / "networks.csv", s.networks.values);
        write_labels_csv(subj_dir / "paradigm.csv", s.paradigm);
      }
    }

    KvPairs manifest = synth_config_kv(cfg);
    set_kv(manifest, "n_train", std::to_string(n_train));
    set_kv(manifest, "n_val", std::to_string(n_val));
    set_kv(manifest, "n_test", std::to_string(n_test));
    set_kv(manifest, "out", args.common.out);
    write_manifest(out, "synth", manifest);
  });
}

// ------------------------------------------------------------ featurize ----

struct FeaturizeArgs {
  CommonArgs common;
  std::string data, scan, networks, paradigm;
  int shift = 8;
  CLI::Option* data_opt = nullptr;
  CLI::Option* scan_opt = nullptr;
};

void featurize_one(const fs::path& scan_path, const fs::path& networks_path,
                   const fs::path& paradigm_path, int shift, const fs::path& out_dir) {
  VoxelScan scan{read_matrix_csv(scan_path)};
  FunctionalNetworks networks{read_matrix_csv(networks_path)};
  const LabelTrack paradigm = read_labels_csv(paradigm_path);
  const FeatureSequence features = extract_features(scan, row_normalize(networks));
  if (paradigm.size() != features.time_points()) {
    throw ShapeError(paradigm_path.string() + ": " + std::to_string(paradigm.size()) +
                     " labels for " + std::to_string(features.time_points()) + " time points");
  }
  fs::create_directories(out_dir);
  write_feature_csv(out_dir / "features.csv", features);
  write_labels_csv(out_dir / "labels.csv", shift_labels(paradigm, shift));
}

void setup_featurize(CLI::App& app, FeaturizeArgs& args) {
  CLI::App* cmd = app.add_subcommand("featurize",
                                     "project scans onto networks, shift labels");
  args.common.attach(cmd);
  args.data_opt = cmd->add_option("--data", args.data, "synth output tree to featurize");
  args.scan_opt = cmd->add_option("--scan", args.scan, "single scan CSV");
  cmd->add_option("--networks", args.networks, "FN matrix CSV");
  cmd->add_option("--paradigm", args.paradigm, "paradigm labels CSV");
  cmd->add_option("--shift", args.shift, "label shift in time points (default 8)");
  cmd->callback([&args] {
    if (args.shift < 0) throw ShapeError("featurize: shift must be >= 0");
    const fs::path out = args.common.out_dir();
    KvPairs manifest;
    if (args.data_opt->count() > 0) {
      if (args.scan_opt->count() > 0) {
        throw UsageError{"featurize takes --data or --scan/--networks/--paradigm, not both"};
      }
      bool any = false;
      for (const std::string& split : kSplits) {
        const fs::path split_dir = fs::path(args.data) / split;
        if (!fs::is_directory(split_dir)) continue;
        for (const auto& [name, dir] : subject_dirs(split_dir)) {
          featurize_one(dir / "scan.csv", dir / "networks.csv", dir / "paradigm.csv", args.shift,
                        out / split / name);
          any = true;
        }
      }
      if (!any) {
        throw ShapeError("featurize: no train/val/test subjects under " + args.data);
      }
      set_kv(manifest, "data", args.data);
    } else {
      if (args.scan.empty() || args.networks.empty() || args.paradigm.empty()) {
        throw UsageError{"featurize needs --data or all of --scan/--networks/--paradigm"};
      }
      featurize_one(args.scan, args.networks, args.paradigm, args.shift, out);
      set_kv(manifest, "scan", args.scan);
      set_kv(manifest, "networks", args.networks);
      set_kv(manifest, "paradigm", args.paradigm);
    }
    set_kv(manifest, "shift", std::to_string(args.shift));
    set_kv(manifest, "out", args.common.out);
    write_manifest(out, "featurize", manifest);
  });
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
  CommonArgs common;
  KeyOverrides keys;
  std::string data;
  int hidden = kDefaultHiddenSize;
  int states = 0;
};

void setup_train(CLI::App& app, TrainArgs& args) {
  CLI::App* cmd = app.add_subcommand("train", "train the LSTM decoder");
  args.common.attach(cmd);
  cmd->add_option("--data", args.data, "featurized tree with train/ and val/")->required();
  cmd->add_option("--hidden", args.hidden, "hidden size per LSTM layer (default 256)");
  cmd->add_option("--states", args.states, "state count (default: inferred from labels)");
  args.keys.add(cmd, "--clip-len", "clip_len", "training clip length");
  args.keys.add(cmd, "--overlap", "overlap", "clip overlap");
  args.keys.add(cmd, "--base-lr", "base_lr", "initial learning rate");
  args.keys.add(cmd, "--lr-decay", "lr_decay", "learning rate decay factor");
  args.keys.add(cmd, "--decay-every", "decay_every", "steps between decays");
  args.keys.add(cmd, "--max-steps", "max_steps", "maximum training steps");
  args.keys.add(cmd, "--batch-size", "batch_size", "clips per batch");
  args.keys.add(cmd, "--adam-beta1", "adam_beta1", "ADAM beta1");
  args.keys.add(cmd, "--adam-beta2", "adam_beta2", "ADAM beta2");
  args.keys.add(cmd, "--adam-eps", "adam_eps", "ADAM epsilon");
  args.keys.add(cmd, "--eval-every", "eval_every", "steps between validations");
  args.keys.add(cmd, "--patience", "patience", "evaluations without improvement before stopping");
  args.keys.add(cmd, "--grad-clip", "grad_clip", "global gradient norm cap, 0 disables");
  cmd->callback([&args] {
    KvPairs kv = args.common.load_config_kv();
    args.keys.apply(kv);
    args.common.apply_seed(kv);
    const TrainConfig cfg = parse_train_config(kv);
    if (args.hidden < 1) throw ShapeError("train: hidden size must be >= 1");
    if (args.states < 0) throw ShapeError("train: state count must be >= 0");

    const std::vector<SubjectData> train_subjects =
        load_subject_dir(fs::path(args.data) / "train");
    const std::vector<SubjectData> val_subjects = load_subject_dir(fs::path(args.data) / "val");
    const TrainResult result = train(train_subjects, val_subjects, cfg, args.hidden, args.states);

    const fs::path out = args.common.out_dir();
    save_checkpoint(out / "checkpoint.bin", result.best_params);
    write_train_log_csv(out / "train_log.csv", result.log);
    write_kv_file(out / "summary.txt",
                  {{"best_step", std::to_string(result.best_step)},
                   {"best_val_metric", format_double(result.best_metric)},
                   {"steps_run", std::to_string(result.steps_run)},
                   {"early_stopped", result.early_stopped ? "1" : "0"}});

    KvPairs manifest = train_config_kv(cfg);
    set_kv(manifest, "hidden", std::to_string(args.hidden));
    set_kv(manifest, "states", std::to_string(args.states));
    set_kv(manifest, "data", args.data);
    set_kv(manifest, "out", args.common.out);
    write_manifest(out, "train", manifest);
  });
}

// -------------------------------------------------------------- predict ----

struct PredictArgs {
  CommonArgs common;
  std::string model, features, data, split = "test";
  CLI::Option* features_opt = nullptr;
  CLI::Option* data_opt = nullptr;
};

void setup_predict(CLI::App& app, PredictArgs& args) {
  CLI::App* cmd = app.add_subcommand("predict", "decode brain states with a trained model");
  args.common.attach(cmd);
  cmd->add_option("--model", args.model, "LSTM or forest checkpoint")->required();
  args.features_opt = cmd->add_option("--features", args.features, "single feature CSV");
  args.data_opt = cmd->add_option("--data", args.data, "featurized tree");
  cmd->add_option("--split", args.split, "split to decode in --data mode (default test)");
  cmd->callback([&args] {
    const bool single = args.features_opt->count() > 0;
    const bool tree = args.data_opt->count() > 0;
    if (single == tree) {
      throw UsageError{"predict takes exactly one of --features or --data"};
    }

    // The model kind is sniffed from the file magic.
    std::optional<DecoderParams> lstm;
    std::optional<Forest> forest;
    if (is_decoder_checkpoint(args.model)) {
      lstm = load_checkpoint(args.model);
    } else if (is_forest_checkpoint(args.model)) {
      forest = load_forest(args.model);
    } else {
      throw ParseError(args.model + ": not a recognized model checkpoint");
    }
    auto decode = [&](const FeatureSequence& f) {
      return lstm ? predict(f, *lstm) : predict_rows(*forest, f);
    };

    const fs::path out = args.common.out_dir();
    KvPairs manifest;
    set_kv(manifest, "model", args.model);
    if (single) {
      write_labels_csv(out / "predictions.csv", decode(read_feature_csv(args.features)));
      set_kv(manifest, "features", args.features);
    } else {
      const fs::path split_dir = fs::path(args.data) / args.split;
      const auto dirs = subject_dirs(split_dir);
      if (dirs.empty()) throw ShapeError("predict: no subjects under " + split_dir.string());
      for (const auto& [name, dir] : dirs) {
        const fs::path subj_out = out / name;
        fs::create_directories(subj_out);
        write_labels_csv(subj_out / "predictions.csv",
                         decode(read_feature_csv(dir / "features.csv")));
      }
      set_kv(manifest, "data", args.data);
      set_kv(manifest, "split", args.split);
    }
    set_kv(manifest, "out", args.common.out);
    write_manifest(out, "predict", manifest);
  });
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
  CommonArgs common;
  std::string pred, truth, pred_b;
  int states = 0;
  CLI::Option* pred_b_opt = nullptr;
};

int infer_states(const std::vector<LabelTrack>& tracks, int configured) {
  if (configured > 0) return configured;
  int s = 0;
  for (const LabelTrack& t : tracks) s = std::max(s, state_count(t));
  if (s == 0) throw ShapeError("eval: cannot infer state count from empty tracks");
  return s;
}

// Mean of the per-subject row-normalized confusions; each row averages over
// the subjects that support it.
ConfusionMatrix mean_confusion(const std::vector<LabelTrack>& preds,
                               const std::vector<LabelTrack>& truths, int s) {
  ConfusionMatrix mean;
  mean.values = Eigen::MatrixXd::Zero(s, s);
  mean.normalized = true;
  mean.row_supported.assign(s, 0);
  Eigen::VectorXd support = Eigen::VectorXd::Zero(s);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const ConfusionMatrix cm = normalize_rows(confusion(preds[i], truths[i], s));
    for (int row = 0; row < s; ++row) {
      if (cm.row_supported[row]) {
        mean.values.row(row) += cm.values.row(row);
        support(row) += 1.0;
      }
    }
  }
  for (int row = 0; row < s; ++row) {
    if (support(row) > 0.0) {
      mean.values.row(row) /= support(row);
      mean.row_supported[row] = 1;
    }
  }
  return mean;
}

void setup_eval(CLI::App& app, EvalArgs& args) {
  CLI::App* cmd = app.add_subcommand("eval", "confusion matrices, accuracy and model comparison");
  args.common.attach(cmd);
  cmd->add_option("--pred", args.pred, "prediction CSV, or tree of subj_*/predictions.csv")
      ->required();
  cmd->add_option("--truth", args.truth, "truth CSV, or tree of subj_*/labels.csv")->required();
  args.pred_b_opt =
      cmd->add_option("--pred-b", args.pred_b, "second prediction tree for the paired test");
  cmd->add_option("--states", args.states, "state count (default: inferred)");
  cmd->callback([&args] {
    const fs::path out = args.common.out_dir();
    KvPairs manifest;
    set_kv(manifest, "pred", args.pred);
    set_kv(manifest, "truth", args.truth);

    std::vector<LabelTrack> preds, truths, preds_b;
    std::vector<std::string> names;
    const bool tree = fs::is_directory(args.pred);
    if (tree) {
      if (!fs::is_directory(args.truth)) {
        throw ShapeError("eval: --pred is a directory but --truth is not");
      }
      const auto pred_dirs = subject_dirs(args.pred);
      const auto truth_dirs = subject_dirs(args.truth);
      if (pred_dirs.empty()) throw ShapeError("eval: no subjects under " + args.pred);
      if (pred_dirs.size() != truth_dirs.size()) {
        throw ShapeError("eval: " + std::to_string(pred_dirs.size()) + " prediction subjects vs " +
                         std::to_string(truth_dirs.size()) + " truth subjects");
      }
      for (std::size_t i = 0; i < pred_dirs.size(); ++i) {
        if (pred_dirs[i].first != truth_dirs[i].first) {
          throw ShapeError("eval: subject name mismatch: " + pred_dirs[i].first + " vs " +
                           truth_dirs[i].first);
        }
        names.push_back(pred_dirs[i].first);
        preds.push_back(read_labels_csv(pred_dirs[i].second / "predictions.csv"));
        truths.push_back(read_labels_csv(truth_dirs[i].second / "labels.csv"));
      }
      if (args.pred_b_opt->count() > 0) {
        const auto b_dirs = subject_dirs(args.pred_b);
        if (b_dirs.size() != pred_dirs.size()) {
          throw ShapeError("eval: --pred-b subject count differs from --pred");
        }
        for (std::size_t i = 0; i < b_dirs.size(); ++i) {
          if (b_dirs[i].first != pred_dirs[i].first) {
            throw ShapeError("eval: subject name mismatch in --pred-b: " + b_dirs[i].first);
          }
          preds_b.push_back(read_labels_csv(b_dirs[i].second / "predictions.csv"));
        }
        set_kv(manifest, "pred_b", args.pred_b);
      }
    } else {
      if (args.pred_b_opt->count() > 0) {
        throw UsageError{"eval --pred-b needs directory inputs"};
      }
      names.push_back("subject");
      preds.push_back(read_labels_csv(args.pred));
      truths.push_back(read_labels_csv(args.truth));
    }

    std::vector<LabelTrack> all = preds;
    all.insert(all.end(), truths.begin(), truths.end());
    all.insert(all.end(), preds_b.begin(), preds_b.end());
    const int s = infer_states(all, args.states);
    set_kv(manifest, "states", std::to_string(s));

    const AccuracySummary summary = overall_accuracy(preds, truths, s);
    const ConfusionMatrix mean_cm = mean_confusion(preds, truths, s);
    write_confusion_csv(out / "confusion_mean.csv", mean_cm);
    write_state_order(out / "states.txt", s);

    {
      std::ofstream os(out / "per_subject.csv", std::ios::binary);
      if (!os) throw IoError("cannot open for writing: " + (out / "per_subject.csv").string());
      os << (preds_b.empty() ? "subject,accuracy" : "subject,accuracy,accuracy_b") << '\n';
      for (std::size_t i = 0; i < names.size(); ++i) {
        os << names[i] << ',' << format_double(timepoint_accuracy(preds[i], truths[i]));
        if (!preds_b.empty()) {
          os << ',' << format_double(timepoint_accuracy(preds_b[i], truths[i]));
        }
        os << '\n';
      }
      if (!os) throw IoError("write failed: " + (out / "per_subject.csv").string());
    }

    double mean_acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      mean_acc += timepoint_accuracy(preds[i], truths[i]);
    }
    mean_acc /= static_cast<double>(preds.size());
    {
      std::ofstream os(out / "summary.csv", std::ios::binary);
      if (!os) throw IoError("cannot open for writing: " + (out / "summary.csv").string());
      os << "metric,value\n";
      os << "mean_timepoint_accuracy," << format_double(mean_acc) << '\n';
      os << "overall_mean," << format_double(summary.mean) << '\n';
      os << "overall_std," << format_double(summary.stddev) << '\n';
      os << "pooled_values," << summary.pooled.size() << '\n';
      if (!os) throw IoError("write failed: " + (out / "summary.csv").string());
    }

    if (!preds_b.empty()) {
      std::vector<double> acc_a, acc_b;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        acc_a.push_back(timepoint_accuracy(preds[i], truths[i]));
        acc_b.push_back(timepoint_accuracy(preds_b[i], truths[i]));
      }
      const WilcoxonResult w = wilcoxon_signed_rank(acc_a, acc_b);
      write_wilcoxon_csv(out / "wilcoxon.csv", "pred", "pred_b", acc_a.size(), w);
    }

    set_kv(manifest, "out", args.common.out);
    write_manifest(out, "eval", manifest);
  });
}

// ------------------------------------------------------------- baseline ----

struct BaselineArgs {
  CommonArgs common;
  std::string data;
  std::string trees = "100,200,500,1000";
  std::string min_leaf = "3,5,10";
};

void setup_baseline(CLI::App& app, BaselineArgs& args) {
  CLI::App* cmd = app.add_subcommand("baseline", "random-forest per-timepoint baseline");
  args.common.attach(cmd);
  cmd->add_option("--data", args.data, "featurized tree with train/, val/ and test/")
      ->required();
  cmd->add_option("--trees", args.trees, "tree-count grid (default 100,200,500,1000)");
  cmd->add_option("--min-leaf", args.min_leaf, "min-leaf grid (default 3,5,10)");
  cmd->callback([&args] {
    RfGrids grids;
    grids.n_trees = parse_int_list(args.trees, "trees");
    grids.min_leaf = parse_int_list(args.min_leaf, "min_leaf");
    const std::uint64_t seed = args.common.seed_opt->count() > 0 ? args.common.seed : 0;

    const FlatDataset train_set =
        stack_timepoints(load_subject_dir(fs::path(args.data) / "train"));
    const FlatDataset val_set = stack_timepoints(load_subject_dir(fs::path(args.data) / "val"));
    const RfGridResult result = grid_search(train_set, val_set, grids, seed);

    const fs::path out = args.common.out_dir();
    save_forest(out / "forest.bin", result.forest);
    {
      std::ofstream os(out / "grid_log.csv", std::ios::binary);
      if (!os) throw IoError("cannot open for writing: " + (out / "grid_log.csv").string());
      os << "n_trees,min_leaf,val_accuracy\n";
      for (const RfGridPoint& p : result.log) {
        os << p.n_trees << ',' << p.min_leaf << ',' << format_double(p.val_accuracy) << '\n';
      }
      if (!os) throw IoError("write failed: " + (out / "grid_log.csv").string());
    }

    const fs::path test_dir = fs::path(args.data) / "test";
    if (fs::is_directory(test_dir)) {
      for (const auto& [name, dir] : subject_dirs(test_dir)) {
        const fs::path subj_out = out / "predictions" / name;
        fs::create_directories(subj_out);
        write_labels_csv(subj_out / "predictions.csv",
                         predict_rows(result.forest, read_feature_csv(dir / "features.csv")));
      }
    }

    KvPairs manifest;
    set_kv(manifest, "data", args.data);
    set_kv(manifest, "trees", args.trees);
    set_kv(manifest, "min_leaf", args.min_leaf);
    set_kv(manifest, "seed", std::to_string(seed));
    set_kv(manifest, "best_n_trees", std::to_string(result.best_config.n_trees));
    set_kv(manifest, "best_min_leaf", std::to_string(result.best_config.min_leaf));
    set_kv(manifest, "out", args.common.out);
    write_manifest(out, "baseline", manifest);
  });
}

// ---------------------------------------------------------- sensitivity ----

struct SensitivityArgs {
  CommonArgs common;
  std::string model, data, split = "test";
  int top = 5;
};

void setup_sensitivity(CLI::App& app, SensitivityArgs& args) {
  CLI::App* cmd = app.add_subcommand("sensitivity", "FN ablation study with PCA");
  args.common.attach(cmd);
  cmd->add_option("--model", args.model, "trained LSTM checkpoint")->required();
  cmd->add_option("--data", args.data, "featurized tree")->required();
  cmd->add_option("--split", args.split, "split to analyze (default test)");
  cmd->add_option("--top", args.top, "FNs to report from the first PC (default 5)");
  cmd->callback([&args] {
    if (!is_decoder_checkpoint(args.model)) {
      throw ParseError(args.model + ": sensitivity needs an LSTM checkpoint");
    }
    const DecoderParams model = load_checkpoint(args.model);
    const fs::path split_dir = fs::path(args.data) / args.split;
    const std::vector<SubjectData> subjects = load_subject_dir(split_dir);
    std::vector<std::string> names;
    for (const auto& [name, dir] : subject_dirs(split_dir)) names.push_back(name);

    const Eigen::MatrixXd changes = change_matrix(model, subjects);
    const PcaResult pc = pca(changes);
    const std::vector<int> top =
        top_fns(pc, std::min<int>(args.top, static_cast<int>(changes.rows())));

    const fs::path out = args.common.out_dir();
    write_matrix_csv(out / "change_matrix.csv", changes, names);
    {
      std::vector<std::string> header;
      for (Eigen::Index c = 0; c < pc.components.cols(); ++c) {
        header.push_back("pc_" + std::to_string(c));
      }
      write_matrix_csv(out / "pca_components.csv", pc.components, header);
    }
    write_matrix_csv(out / "pca_variances.csv", pc.variances, {"variance"});
    {
      std::ofstream os(out / "top_fns.csv", std::ios::binary);
      if (!os) throw IoError("cannot open for writing: " + (out / "top_fns.csv").string());
      os << "rank,fn_index\n";
      for (std::size_t i = 0; i < top.size(); ++i) os << i << ',' << top[i] << '\n';
      if (!os) throw IoError("write failed: " + (out / "top_fns.csv").string());
    }

    KvPairs manifest;
    set_kv(manifest, "model", args.model);
    set_kv(manifest, "data", args.data);
    set_kv(manifest, "split", args.split);
    set_kv(manifest, "top", std::to_string(args.top));
    set_kv(manifest, "out", args.common.out);
    write_manifest(out, "sensitivity", manifest);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"brain-state decoding pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SynthArgs synth_args;
  FeaturizeArgs featurize_args;
  TrainArgs train_args;
  PredictArgs predict_args;
  EvalArgs eval_args;
  BaselineArgs baseline_args;
  SensitivityArgs sensitivity_args;
  setup_synth(app, synth_args);
  setup_featurize(app, featurize_args);
  setup_train(app, train_args);
  setup_predict(app, predict_args);
  setup_eval(app, eval_args);
  setup_baseline(app, baseline_args);
  setup_sensitivity(app, sensitivity_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.msg << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 5;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 5;
  }
  return 0;
}
