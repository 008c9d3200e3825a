#include "braindec/trainer.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "braindec/errors.hpp"
#include "braindec/rng.hpp"

namespace braindec {

void validate(const TrainConfig& cfg) {
  auto bad = [](const std::string& msg) { throw ShapeError("TrainConfig: " + msg); };
  if (cfg.clip_len < 1) bad("clip_len must be >= 1");
  if (cfg.overlap <= 0 || cfg.overlap >= cfg.clip_len) bad("need 0 < overlap < clip_len");
  if (!(cfg.base_lr > 0.0)) bad("base_lr must be > 0");
  if (!(cfg.lr_decay > 0.0) || cfg.lr_decay > 1.0) bad("need 0 < lr_decay <= 1");
  if (cfg.decay_every < 1) bad("decay_every must be >= 1");
  if (cfg.max_steps < 0) bad("max_steps must be >= 0");
  if (cfg.batch_size < 1) bad("batch_size must be >= 1");
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0)) bad("adam_beta1 must be in [0, 1)");
  if (!(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0)) bad("adam_beta2 must be in [0, 1)");
  if (!(cfg.adam_eps > 0.0)) bad("adam_eps must be > 0");
  if (cfg.eval_every < 1) bad("eval_every must be >= 1");
  if (cfg.patience < 0) bad("patience must be >= 0");
  if (cfg.grad_clip < 0.0) bad("grad_clip must be >= 0");
}

TrainConfig parse_train_config(const KvPairs& kv) {
  TrainConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "clip_len") cfg.clip_len = static_cast<int>(parse_long(value, key));
    else if (key == "overlap") cfg.overlap = static_cast<int>(parse_long(value, key));
    else if (key == "base_lr") cfg.base_lr = parse_double(value, key);
    else if (key == "lr_decay") cfg.lr_decay = parse_double(value, key);
    else if (key == "decay_every") cfg.decay_every = parse_long(value, key);
    else if (key == "max_steps") cfg.max_steps = parse_long(value, key);
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_long(value, key));
    else if (key == "adam_beta1") cfg.adam_beta1 = parse_double(value, key);
    else if (key == "adam_beta2") cfg.adam_beta2 = parse_double(value, key);
    else if (key == "adam_eps") cfg.adam_eps = parse_double(value, key);
    else if (key == "eval_every") cfg.eval_every = parse_long(value, key);
    else if (key == "patience") cfg.patience = static_cast<int>(parse_long(value, key));
    else if (key == "grad_clip") cfg.grad_clip = parse_double(value, key);
    else if (key == "seed") cfg.seed = parse_u64(value, key);
    else throw ParseError("unknown train config key '" + key + "'");
  }
  validate(cfg);
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return parse_train_config(read_kv_file(path));
}

KvPairs train_config_kv(const TrainConfig& cfg) {
  return {
      {"clip_len", std::to_string(cfg.clip_len)},
      {"overlap", std::to_string(cfg.overlap)},
      {"base_lr", format_double(cfg.base_lr)},
      {"lr_decay", format_double(cfg.lr_decay)},
      {"decay_every", std::to_string(cfg.decay_every)},
      {"max_steps", std::to_string(cfg.max_steps)},
      {"batch_size", std::to_string(cfg.batch_size)},
      {"adam_beta1", format_double(cfg.adam_beta1)},
      {"adam_beta2", format_double(cfg.adam_beta2)},
      {"adam_eps", format_double(cfg.adam_eps)},
      {"eval_every", std::to_string(cfg.eval_every)},
      {"patience", std::to_string(cfg.patience)},
      {"grad_clip", format_double(cfg.grad_clip)},
      {"seed", std::to_string(cfg.seed)},
  };
}

AdamMoments init_moments(const DecoderParams& params) {
  AdamMoments mo;
  mo.m = zeros_like(params);
  mo.v = zeros_like(params);
  mo.t = 0;
  return mo;
}

std::vector<Clip> make_clips(const FeatureSequence& f, const LabelTrack& labels, int clip_len,
                             int overlap, int subject_id) {
  const Eigen::Index t_len = f.time_points();
  if (clip_len < 1) throw ShapeError("make_clips: clip_len must be >= 1");
  if (overlap <= 0 || overlap >= clip_len) throw ShapeError("make_clips: need 0 < overlap < clip_len");
  if (t_len < clip_len) {
    throw ShapeError("make_clips: sequence length " + std::to_string(t_len) +
                     " shorter than clip length " + std::to_string(clip_len));
  }
  if (labels.size() != t_len) {
    throw ShapeError("make_clips: " + std::to_string(t_len) + " feature rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  const Eigen::Index stride = clip_len - overlap;
  std::vector<Clip> clips;
  Eigen::Index last_end = 0;
  for (Eigen::Index start = 0; start + clip_len <= t_len; start += stride) {
    Clip c;
    c.features = f.values.middleRows(start, clip_len);
    c.labels.assign(labels.states.begin() + start, labels.states.begin() + start + clip_len);
    c.subject_id = subject_id;
    c.start = start;
    last_end = start + clip_len;
    clips.push_back(std::move(c));
  }
  if (last_end < t_len) {  // anchor one extra clip so the tail is covered
    const Eigen::Index start = t_len - clip_len;
    Clip c;
    c.features = f.values.middleRows(start, clip_len);
    c.labels.assign(labels.states.begin() + start, labels.states.begin() + start + clip_len);
    c.subject_id = subject_id;
    c.start = start;
    clips.push_back(std::move(c));
  }
  return clips;
}

double lr_at(long step, const TrainConfig& cfg) {
  if (step < 0) throw ShapeError("lr_at: negative step");
  const double k = static_cast<double>(step / cfg.decay_every);
  // Divide by the reciprocal power so decimal decay factors (0.1 and friends)
  // land on their decimal-nearest doubles.
  return cfg.base_lr / std::pow(1.0 / cfg.lr_decay, k);
}

void adam_step(DecoderParams& params, const GradientSet& grads, AdamMoments& moments,
               const TrainConfig& cfg) {
  ++moments.t;
  const double lr = lr_at(moments.t - 1, cfg);
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(moments.t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(moments.t));
  visit_tensors(
      [&](const char* name, auto& theta, const auto& g, auto& m, auto& v) {
        if (!g.allFinite()) {
          throw NumericError(std::string("adam_step: non-finite gradient in ") + name);
        }
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
        v.array() = cfg.adam_beta2 * v.array() + (1.0 - cfg.adam_beta2) * g.array().square();
        theta.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.adam_eps);
        if (!theta.allFinite()) {
          throw NumericError(std::string("adam_step: non-finite parameter in ") + name);
        }
      },
      params, grads, moments.m, moments.v);
}

double mean_sequence_accuracy(const DecoderParams& params,
                              const std::vector<SubjectData>& subjects) {
  if (subjects.empty()) throw ShapeError("mean_sequence_accuracy: no subjects");
  double acc = 0.0;
  for (const SubjectData& s : subjects) {
    const LabelTrack pred = predict(s.features, params);
    Eigen::Index correct = 0;
    for (Eigen::Index t = 0; t < s.labels.size(); ++t) {
      if (pred.states[t] == s.labels.states[t]) ++correct;
    }
    acc += static_cast<double>(correct) / static_cast<double>(s.labels.size());
  }
  return acc / static_cast<double>(subjects.size());
}

namespace {

double global_grad_norm(const GradientSet& g) {
  double sq = 0.0;
  visit_tensors([&sq](const char*, const auto& t) { sq += t.squaredNorm(); }, g);
  return std::sqrt(sq);
}

void scale_grads(GradientSet& g, double factor) {
  visit_tensors([factor](const char*, auto& t) { t *= factor; }, g);
}

void add_grads(GradientSet& acc, const GradientSet& g) {
  visit_tensors([](const char*, auto& a, const auto& b) { a += b; }, acc, g);
}

}  // namespace

TrainResult train(const std::vector<SubjectData>& train_subjects,
                  const std::vector<SubjectData>& val_subjects, const TrainConfig& cfg,
                  Eigen::Index hidden, Eigen::Index n_states) {
  validate(cfg);
  if (train_subjects.empty()) throw ShapeError("train: no training subjects");
  if (val_subjects.empty()) throw ShapeError("train: validation set is empty");

  const Eigen::Index k = train_subjects.front().features.feature_count();
  std::vector<Clip> pool;
  for (const SubjectData& s : train_subjects) {
    if (s.features.feature_count() != k) {
      throw ShapeError("train: subject " + std::to_string(s.id) + " has " +
                       std::to_string(s.features.feature_count()) + " features, expected " +
                       std::to_string(k));
    }
    std::vector<Clip> clips = make_clips(s.features, s.labels, cfg.clip_len, cfg.overlap, s.id);
    pool.insert(pool.end(), std::make_move_iterator(clips.begin()),
                std::make_move_iterator(clips.end()));
  }
  if (pool.empty()) throw ShapeError("train: empty clip set");

  if (n_states == 0) {
    for (const auto* subjects : {&train_subjects, &val_subjects}) {
      for (const SubjectData& s : *subjects) {
        n_states = std::max(n_states, static_cast<Eigen::Index>(state_count(s.labels)));
      }
    }
  }

  DecoderParams params = init_params(k, hidden, n_states, cfg.seed);
  AdamMoments moments = init_moments(params);
  Rng sampler(mix_seed(cfg.seed, 0xba7c4));

  TrainResult result;
  result.best_params = params;
  result.best_metric = -1.0;

  double window_loss = 0.0;
  long window_count = 0;
  int stall = 0;

  for (long step = 0; step < cfg.max_steps; ++step) {
    GradientSet grads = zeros_like(params);
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Clip& clip = pool[sampler.index(pool.size())];
      FeatureSequence f{clip.features};
      LabelTrack y{clip.labels};
      ForwardCache cache = forward(f, params);
      auto [clip_loss, clip_grads] = backward(f, y, params, cache);
      batch_loss += clip_loss;
      add_grads(grads, clip_grads);
    }
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
    batch_loss *= inv_batch;
    scale_grads(grads, inv_batch);
    if (cfg.grad_clip > 0.0) {
      const double norm = global_grad_norm(grads);
      if (norm > cfg.grad_clip) scale_grads(grads, cfg.grad_clip / norm);
    }
    adam_step(params, grads, moments, cfg);
    window_loss += batch_loss;
    ++window_count;
    result.steps_run = step + 1;

    const bool at_eval = (step + 1) % cfg.eval_every == 0 || step + 1 == cfg.max_steps;
    if (!at_eval) continue;

    const double metric = mean_sequence_accuracy(params, val_subjects);
    result.log.push_back({step + 1, lr_at(step, cfg), window_loss / static_cast<double>(window_count),
                          metric});
    window_loss = 0.0;
    window_count = 0;

    if (metric > result.best_metric) {
      result.best_metric = metric;
      result.best_params = params;
      result.best_step = step + 1;
      stall = 0;
    } else {
      ++stall;
    }
    if (stall >= cfg.patience) {
      result.early_stopped = step + 1 < cfg.max_steps;
      break;
    }
  }

  if (result.log.empty()) {  // max_steps == 0: report the initial parameters
    const double metric = mean_sequence_accuracy(params, val_subjects);
    result.log.push_back({0, lr_at(0, cfg), 0.0, metric});
    result.best_metric = metric;
    result.best_params = params;
    result.best_step = 0;
  }
  return result;
}

void write_train_log_csv(const std::filesystem::path& path, const std::vector<TrainLogRow>& log) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << "step,lr,train_loss,val_metric\n";
  for (const TrainLogRow& row : log) {
    os << row.step << ',' << format_double(row.lr) << ',' << format_double(row.train_loss) << ','
       << format_double(row.val_metric) << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace braindec
