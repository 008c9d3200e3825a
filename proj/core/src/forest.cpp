#include "braindec/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "braindec/errors.hpp"
#include "braindec/io.hpp"
#include "braindec/rng.hpp"

namespace braindec {

namespace {

constexpr char kForestMagic[6] = {'R', 'F', 'R', 'S', 'T', '1'};
constexpr std::uint8_t kForestVersion = 1;
constexpr double kMinImpurityDecrease = 1e-12;

int argmax_low_tie(const std::vector<std::uint32_t>& counts) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(counts.size()); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return best;
}

// Gini impurity times the sample count: n - sum(count^2)/n. Working with the
// scaled form keeps the split comparison in one division per candidate.
double scaled_gini(const std::vector<std::uint32_t>& counts, double n) {
  double sumsq = 0.0;
  for (std::uint32_t c : counts) sumsq += static_cast<double>(c) * static_cast<double>(c);
  return n - sumsq / n;
}

struct TreeBuilder {
  const Eigen::MatrixXd& rows;
  const std::vector<int>& labels;
  int n_classes;
  int min_leaf;
  int n_candidates;
  Rng& rng;
  DecisionTree& tree;
  std::vector<int> feature_pool;  // scratch for candidate sampling

  int build(std::vector<int>& samples) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    std::vector<std::uint32_t> hist(n_classes, 0);
    for (int s : samples) ++hist[labels[s]];
    const int n = static_cast<int>(samples.size());

    const bool pure = *std::max_element(hist.begin(), hist.end()) == static_cast<std::uint32_t>(n);
    if (pure || n < 2 * min_leaf) return make_leaf(node_id, std::move(hist));

    // Candidate features: a partial Fisher-Yates draw without replacement.
    const int k = static_cast<int>(rows.cols());
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
    for (int i = 0; i < n_candidates; ++i) {
      const std::size_t j = i + rng.index(static_cast<std::size_t>(k - i));
      std::swap(feature_pool[i], feature_pool[j]);
    }

    const double parent = scaled_gini(hist, n);
    double best_decrease = kMinImpurityDecrease;
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<int> order(samples);
    std::vector<std::uint32_t> left_hist(n_classes);
    for (int ci = 0; ci < n_candidates; ++ci) {
      const int f = feature_pool[ci];
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (rows(a, f) != rows(b, f)) return rows(a, f) < rows(b, f);
        return a < b;  // value ties in sample order, for determinism
      });
      std::fill(left_hist.begin(), left_hist.end(), 0);
      for (int i = 0; i + 1 < n; ++i) {
        ++left_hist[labels[order[i]]];
        const double lo = rows(order[i], f);
        const double hi = rows(order[i + 1], f);
        if (lo == hi) continue;  // threshold must separate distinct values
        const int left_n = i + 1;
        const int right_n = n - left_n;
        if (left_n < min_leaf || right_n < min_leaf) continue;
        const double mid = lo + 0.5 * (hi - lo);
        if (!(mid > lo)) continue;  // midpoint rounded onto lo: not separating
        std::vector<std::uint32_t> right_hist(hist);
        for (int c = 0; c < n_classes; ++c) right_hist[c] -= left_hist[c];
        const double decrease =
            parent - scaled_gini(left_hist, left_n) - scaled_gini(right_hist, right_n);
        if (decrease > best_decrease) {
          best_decrease = decrease;
          best_feature = f;
          best_threshold = mid;
        }
      }
    }

    if (best_feature < 0) return make_leaf(node_id, std::move(hist));

    std::vector<int> left_samples, right_samples;
    left_samples.reserve(n);
    right_samples.reserve(n);
    for (int s : samples) {
      (rows(s, best_feature) < best_threshold ? left_samples : right_samples).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();

    tree.nodes[node_id].is_leaf = false;
    tree.nodes[node_id].feature = best_feature;
    tree.nodes[node_id].threshold = best_threshold;
    const int left_id = build(left_samples);
    tree.nodes[node_id].left = left_id;
    const int right_id = build(right_samples);
    tree.nodes[node_id].right = right_id;
    return node_id;
  }

  int make_leaf(int node_id, std::vector<std::uint32_t>&& hist) {
    tree.nodes[node_id].is_leaf = true;
    tree.nodes[node_id].histogram = std::move(hist);
    return node_id;
  }
};

}  // namespace

int DecisionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int node = 0;
  while (!nodes[node].is_leaf) {
    const TreeNode& nd = nodes[node];
    node = row(nd.feature) < nd.threshold ? nd.left : nd.right;
  }
  return argmax_low_tie(nodes[node].histogram);
}

void validate(const RfConfig& cfg) {
  if (cfg.n_trees < 1) throw ShapeError("RfConfig: n_trees must be >= 1");
  if (cfg.min_leaf < 1) throw ShapeError("RfConfig: min_leaf must be >= 1");
}

Forest fit_forest(const Eigen::MatrixXd& rows, const std::vector<int>& labels,
                  const RfConfig& cfg) {
  validate(cfg);
  const int n = static_cast<int>(rows.rows());
  const int k = static_cast<int>(rows.cols());
  if (n == 0 || k == 0) throw ShapeError("fit_forest: empty training matrix");
  if (static_cast<int>(labels.size()) != n) {
    throw ShapeError("fit_forest: " + std::to_string(n) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  if (n < cfg.min_leaf) {
    throw ShapeError("fit_forest: " + std::to_string(n) + " rows cannot satisfy min_leaf " +
                     std::to_string(cfg.min_leaf));
  }
  if (!rows.allFinite()) throw NumericError("fit_forest: non-finite feature value");
  int n_classes = 0;
  for (int y : labels) {
    if (y < 0) throw ShapeError("fit_forest: negative label");
    n_classes = std::max(n_classes, y + 1);
  }

  Forest forest;
  forest.n_classes = n_classes;
  forest.feature_subsample = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
  forest.feature_subsample = std::min(forest.feature_subsample, k);
  forest.trees.resize(cfg.n_trees);

  for (int t = 0; t < cfg.n_trees; ++t) {
    Rng rng(mix_seed(cfg.seed, 0xf03e5700u + static_cast<std::uint64_t>(t)));
    std::vector<int> samples(n);
    for (int i = 0; i < n; ++i) samples[i] = static_cast<int>(rng.index(n));
    TreeBuilder builder{rows,
                        labels,
                        n_classes,
                        cfg.min_leaf,
                        forest.feature_subsample,
                        rng,
                        forest.trees[t],
                        std::vector<int>(static_cast<std::size_t>(k))};
    builder.build(samples);
  }
  return forest;
}

int predict_forest(const Forest& f, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (f.trees.empty()) throw ShapeError("predict_forest: empty forest");
  std::vector<std::uint32_t> votes(f.n_classes, 0);
  for (const DecisionTree& t : f.trees) ++votes[t.predict(row)];
  return argmax_low_tie(votes);
}

LabelTrack predict_rows(const Forest& f, const FeatureSequence& features) {
  LabelTrack out;
  out.states.resize(features.time_points());
  for (Eigen::Index t = 0; t < features.time_points(); ++t) {
    out.states[t] = predict_forest(f, features.values.row(t));
  }
  return out;
}

FlatDataset stack_timepoints(const std::vector<SubjectData>& subjects) {
  if (subjects.empty()) throw ShapeError("stack_timepoints: no subjects");
  Eigen::Index total = 0;
  const Eigen::Index k = subjects.front().features.feature_count();
  for (const SubjectData& s : subjects) {
    if (s.features.feature_count() != k) {
      throw ShapeError("stack_timepoints: inconsistent feature counts");
    }
    total += s.features.time_points();
  }
  FlatDataset out;
  out.rows.resize(total, k);
  out.labels.reserve(total);
  Eigen::Index at = 0;
  for (const SubjectData& s : subjects) {
    out.rows.middleRows(at, s.features.time_points()) = s.features.values;
    out.labels.insert(out.labels.end(), s.labels.states.begin(), s.labels.states.end());
    at += s.features.time_points();
  }
  return out;
}

RfGridResult grid_search(const FlatDataset& train, const FlatDataset& val, const RfGrids& grids,
                         std::uint64_t seed) {
  if (grids.n_trees.empty() || grids.min_leaf.empty()) throw ShapeError("grid_search: empty grid");
  if (val.rows.rows() == 0) throw ShapeError("grid_search: empty validation set");
  if (val.rows.cols() != train.rows.cols()) {
    throw ShapeError("grid_search: train/val feature-count mismatch");
  }

  RfGridResult result;
  bool have_best = false;
  double best_acc = -1.0;
  for (int n_trees : grids.n_trees) {
    for (int min_leaf : grids.min_leaf) {
      RfConfig cfg{n_trees, min_leaf, seed};
      Forest f = fit_forest(train.rows, train.labels, cfg);
      Eigen::Index correct = 0;
      for (Eigen::Index i = 0; i < val.rows.rows(); ++i) {
        if (predict_forest(f, val.rows.row(i)) == val.labels[i]) ++correct;
      }
      const double acc = static_cast<double>(correct) / static_cast<double>(val.rows.rows());
      result.log.push_back({n_trees, min_leaf, acc});
      bool wins = false;
      if (!have_best || acc > best_acc) {
        wins = true;
      } else if (acc == best_acc) {  // ties: fewer trees, then larger min_leaf
        if (cfg.n_trees != result.best_config.n_trees) {
          wins = cfg.n_trees < result.best_config.n_trees;
        } else {
          wins = cfg.min_leaf > result.best_config.min_leaf;
        }
      }
      if (wins) {
        result.best_config = cfg;
        result.forest = std::move(f);
        best_acc = acc;
        have_best = true;
      }
    }
  }
  return result;
}

void save_forest(const std::filesystem::path& path, const Forest& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kForestMagic, sizeof(kForestMagic));
  bin::write_u8(os, kForestVersion);
  bin::write_u32(os, static_cast<std::uint32_t>(f.n_classes));
  bin::write_u32(os, static_cast<std::uint32_t>(f.feature_subsample));
  bin::write_u32(os, static_cast<std::uint32_t>(f.trees.size()));
  for (const DecisionTree& t : f.trees) {
    bin::write_u32(os, static_cast<std::uint32_t>(t.nodes.size()));
    for (const TreeNode& nd : t.nodes) {
      bin::write_u8(os, nd.is_leaf ? 1 : 0);
      if (nd.is_leaf) {
        for (int c = 0; c < f.n_classes; ++c) bin::write_u32(os, nd.histogram[c]);
      } else {
        bin::write_u32(os, static_cast<std::uint32_t>(nd.feature));
        bin::write_f64(os, nd.threshold);
        bin::write_u32(os, static_cast<std::uint32_t>(nd.left));
        bin::write_u32(os, static_cast<std::uint32_t>(nd.right));
      }
    }
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Forest load_forest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  char magic[sizeof(kForestMagic)];
  is.read(magic, sizeof(magic));
  if (!is || !std::equal(magic, magic + sizeof(magic), kForestMagic)) {
    throw ParseError(path.string() + ": bad forest magic");
  }
  Forest f;
  try {
    const std::uint8_t version = bin::read_u8(is);
    if (version != kForestVersion) {
      throw ParseError("unsupported forest version " + std::to_string(version));
    }
    f.n_classes = static_cast<int>(bin::read_u32(is));
    f.feature_subsample = static_cast<int>(bin::read_u32(is));
    if (f.n_classes < 1) throw ParseError("invalid class count");
    const std::uint32_t n_trees = bin::read_u32(is);
    f.trees.resize(n_trees);
    for (std::uint32_t t = 0; t < n_trees; ++t) {
      const std::uint32_t n_nodes = bin::read_u32(is);
      if (n_nodes == 0) throw ParseError("empty tree");
      f.trees[t].nodes.resize(n_nodes);
      for (std::uint32_t i = 0; i < n_nodes; ++i) {
        TreeNode& nd = f.trees[t].nodes[i];
        nd.is_leaf = bin::read_u8(is) != 0;
        if (nd.is_leaf) {
          nd.histogram.resize(f.n_classes);
          for (int c = 0; c < f.n_classes; ++c) nd.histogram[c] = bin::read_u32(is);
        } else {
          nd.feature = static_cast<int>(bin::read_u32(is));
          nd.threshold = bin::read_f64(is);
          nd.left = static_cast<int>(bin::read_u32(is));
          nd.right = static_cast<int>(bin::read_u32(is));
          if (nd.left <= 0 || nd.right <= 0 || nd.left >= static_cast<int>(n_nodes) ||
              nd.right >= static_cast<int>(n_nodes)) {
            throw ParseError("child index out of range");
          }
        }
      }
    }
    is.peek();
    if (!is.eof()) throw ParseError("trailing bytes after forest data");
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return f;
}

bool is_forest_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  char magic[sizeof(kForestMagic)];
  return is.read(magic, sizeof(magic)) &&
         std::equal(magic, magic + sizeof(magic), kForestMagic);
}

}  // namespace braindec
