#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"

#include "braindec/errors.hpp"
#include "braindec/forest.hpp"
#include "braindec/rng.hpp"
#include "oracles.hpp"

using namespace braindec;
namespace fs = std::filesystem;

namespace {

struct Flat {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Flat clusters_dataset(int per_class, std::uint64_t seed) {
  // Three well-separated Gaussian blobs in 2-D; trivially separable.
  Rng rng(seed);
  Flat d;
  d.x.resize(3 * per_class, 2);
  const double cx[3] = {0.0, 10.0, 0.0};
  const double cy[3] = {0.0, 0.0, 10.0};
  Eigen::Index row = 0;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < per_class; ++i, ++row) {
      d.x(row, 0) = cx[c] + 0.3 * rng.normal();
      d.x(row, 1) = cy[c] + 0.3 * rng.normal();
      d.y.push_back(c);
    }
  }
  return d;
}

Flat xor_dataset(int reps) {
  Flat d;
  d.x.resize(4 * reps, 2);
  Eigen::Index row = 0;
  for (int r = 0; r < reps; ++r) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b, ++row) {
        d.x(row, 0) = a;
        d.x(row, 1) = b;
        d.y.push_back(a ^ b);
      }
    }
  }
  return d;
}

double train_accuracy(const Forest& f, const Flat& d) {
  int hits = 0;
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    if (predict_forest(f, d.x.row(i)) == d.y[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(d.x.rows());
}

std::string file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

DecisionTree leaf_tree(int cls, int n_classes) {
  DecisionTree t;
  TreeNode n;
  n.is_leaf = true;
  n.histogram.assign(static_cast<std::size_t>(n_classes), 0);
  n.histogram[static_cast<std::size_t>(cls)] = 1;
  t.nodes.push_back(n);
  return t;
}

}  // namespace

TEST_CASE("RfConfig validation") {
  RfConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  RfConfig bad = cfg;
  bad.n_trees = 0;
  CHECK_THROWS_AS(validate(bad), ShapeError);
  bad = cfg;
  bad.min_leaf = 0;
  CHECK_THROWS_AS(validate(bad), ShapeError);
}

TEST_CASE("a pure dataset yields single-leaf trees") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(8, 3);
  const std::vector<int> y(8, 1);
  RfConfig cfg;
  cfg.n_trees = 5;
  cfg.min_leaf = 1;
  cfg.seed = 1;
  const Forest f = fit_forest(x, y, cfg);
  CHECK(f.n_classes == 2);
  REQUIRE(f.trees.size() == 5);
  for (const DecisionTree& t : f.trees) {
    REQUIRE(t.nodes.size() == 1);
    CHECK(t.nodes[0].is_leaf);
    const long total =
        std::accumulate(t.nodes[0].histogram.begin(), t.nodes[0].histogram.end(), 0L);
    CHECK(total == 8);  // bootstrap draws N rows
    CHECK(t.nodes[0].histogram[1] == 8);
  }
  for (double v : {-3.0, 0.0, 5.0}) {
    Eigen::RowVectorXd q(3);
    q << v, v, v;
    CHECK(f.trees[0].predict(q) == 1);
    CHECK(predict_forest(f, q) == 1);
  }
}

TEST_CASE("the forest memorizes XOR through bootstrap diversity") {
  const Flat d = xor_dataset(10);
  RfConfig cfg;
  cfg.n_trees = 100;
  cfg.min_leaf = 3;
  cfg.seed = 0;
  const Forest f = fit_forest(d.x, d.y, cfg);
  CHECK(train_accuracy(f, d) == 1.0);
}

TEST_CASE("forest voting follows the majority with ties to the lowest class") {
  Forest f;
  f.n_classes = 3;
  f.feature_subsample = 1;
  Eigen::RowVectorXd q(1);
  q << 0.0;

  f.trees = {leaf_tree(1, 3), leaf_tree(1, 3), leaf_tree(2, 3)};
  CHECK(predict_forest(f, q) == 1);
  f.trees = {leaf_tree(2, 3), leaf_tree(0, 3)};
  CHECK(predict_forest(f, q) == 0);  // tie between 0 and 2 -> lowest class
  f.trees = {leaf_tree(2, 3)};
  CHECK(predict_forest(f, q) == 2);

  // Leaf histogram ties also resolve to the lowest class.
  DecisionTree tied;
  TreeNode n;
  n.is_leaf = true;
  n.histogram = {2, 2, 1};
  tied.nodes.push_back(n);
  CHECK(tied.predict(q) == 0);
}

TEST_CASE("leaf histograms partition the bootstrap sample and satisfy min_leaf") {
  const Flat d = clusters_dataset(12, 21);
  RfConfig cfg;
  cfg.n_trees = 7;
  cfg.min_leaf = 3;
  cfg.seed = 2;
  const Forest f = fit_forest(d.x, d.y, cfg);
  for (const DecisionTree& t : f.trees) {
    long total = 0;
    for (const TreeNode& n : t.nodes) {
      if (!n.is_leaf) continue;
      const long count = std::accumulate(n.histogram.begin(), n.histogram.end(), 0L);
      CHECK(count >= 3);
      total += count;
    }
    CHECK(total == d.x.rows());  // bootstrap draws N rows
  }
}

TEST_CASE("production predictions match the exhaustive single-tree oracle on cluster cores") {
  // The oracle grows one greedy Gini tree with no bootstrap and no candidate
  // subsampling, so it is fully determined by the data. Points deep inside
  // each cluster must classify identically; only the empty space between
  // clusters is allowed to differ.
  const Flat d = clusters_dataset(15, 33);
  Eigen::MatrixXd queries(3, 2);
  queries << 0.0, 0.0, 10.0, 0.0, 0.0, 10.0;
  const std::vector<int> from_oracle = oracle::exhaustive_tree_predict(d.x, d.y, 3, 1, queries);
  REQUIRE(from_oracle.size() == 3);
  for (int c = 0; c < 3; ++c) CHECK(from_oracle[static_cast<std::size_t>(c)] == c);

  RfConfig cfg;
  cfg.n_trees = 25;
  cfg.min_leaf = 1;
  cfg.seed = 4;
  const Forest f = fit_forest(d.x, d.y, cfg);
  for (int c = 0; c < 3; ++c) {
    CHECK(predict_forest(f, queries.row(c)) == c);
  }
}

TEST_CASE("splits are invariant to monotone feature transforms") {
  // Gini split selection depends only on feature order, so cubing a positive
  // feature must leave every training point's prediction unchanged. (Midpoint
  // thresholds do move under the transform, so only on-sample queries — which
  // are never strictly between two adjacent sorted values — are invariant.)
  Rng rng(55);
  Flat d;
  d.x.resize(30, 1);
  for (int i = 0; i < 30; ++i) {
    const int label = i < 15 ? 0 : 1;
    d.x(i, 0) = (label == 0 ? 1.0 : 3.0) + 0.4 * rng.uniform();
    d.y.push_back(label);
  }
  Flat cubed = d;
  cubed.x = d.x.array().cube();

  RfConfig cfg;
  cfg.n_trees = 9;
  cfg.min_leaf = 2;
  cfg.seed = 6;
  const Forest fa = fit_forest(d.x, d.y, cfg);
  const Forest fb = fit_forest(cubed.x, cubed.y, cfg);
  for (int i = 0; i < 30; ++i) {
    CHECK(predict_forest(fa, d.x.row(i)) == predict_forest(fb, cubed.x.row(i)));
  }
}

TEST_CASE("fit_forest is deterministic for a fixed seed") {
  const Flat d = clusters_dataset(10, 77);
  RfConfig cfg;
  cfg.n_trees = 6;
  cfg.min_leaf = 2;
  cfg.seed = 123;
  const Forest a = fit_forest(d.x, d.y, cfg);
  const Forest b = fit_forest(d.x, d.y, cfg);
  cfg.seed = 124;
  const Forest c = fit_forest(d.x, d.y, cfg);

  const fs::path dir = fs::temp_directory_path() / "braindec_forest_det";
  fs::create_directories(dir);
  save_forest(dir / "a.bin", a);
  save_forest(dir / "b.bin", b);
  save_forest(dir / "c.bin", c);
  CHECK(file_bytes(dir / "a.bin") == file_bytes(dir / "b.bin"));
  CHECK(file_bytes(dir / "a.bin") != file_bytes(dir / "c.bin"));
  fs::remove_all(dir);
}

TEST_CASE("forest checkpoints round trip and reject corruption") {
  const Flat d = clusters_dataset(8, 91);
  RfConfig cfg;
  cfg.n_trees = 4;
  cfg.min_leaf = 2;
  cfg.seed = 9;
  const Forest f = fit_forest(d.x, d.y, cfg);

  const fs::path dir = fs::temp_directory_path() / "braindec_forest_ckpt";
  fs::create_directories(dir);
  const fs::path path = dir / "forest.bin";
  save_forest(path, f);
  const std::string blob = file_bytes(path);

  const Forest back = load_forest(path);
  CHECK(back.n_classes == f.n_classes);
  CHECK(back.feature_subsample == f.feature_subsample);
  REQUIRE(back.trees.size() == f.trees.size());
  save_forest(dir / "again.bin", back);
  CHECK(file_bytes(dir / "again.bin") == blob);

  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::RowVectorXd q(2);
    q << 12.0 * rng.uniform() - 1.0, 12.0 * rng.uniform() - 1.0;
    CHECK(predict_forest(back, q) == predict_forest(f, q));
  }

  CHECK(is_forest_checkpoint(path));

  std::string bad = blob;
  bad[0] = 'X';
  {
    std::ofstream os(dir / "bad.bin", std::ios::binary);
    os.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_AS(static_cast<void>(load_forest(dir / "bad.bin")), ParseError);
  CHECK_FALSE(is_forest_checkpoint(dir / "bad.bin"));

  {
    std::ofstream os(dir / "short.bin", std::ios::binary);
    os.write(blob.data(), static_cast<std::streamsize>(blob.size() / 2));
  }
  CHECK_THROWS_AS(static_cast<void>(load_forest(dir / "short.bin")), ParseError);

  CHECK_THROWS_AS(static_cast<void>(load_forest(dir / "missing.bin")), IoError);
  fs::remove_all(dir);
}

TEST_CASE("stack_timepoints concatenates subjects row-major in order") {
  SubjectData a;
  a.id = 0;
  a.features.values.resize(2, 3);
  a.features.values << 1, 2, 3, 4, 5, 6;
  a.labels.states = {0, 1};
  SubjectData b;
  b.id = 1;
  b.features.values.resize(1, 3);
  b.features.values << 7, 8, 9;
  b.labels.states = {2};

  const FlatDataset d = stack_timepoints({a, b});
  REQUIRE(d.rows.rows() == 3);
  CHECK(d.rows(0, 0) == 1);
  CHECK(d.rows(1, 2) == 6);
  CHECK(d.rows(2, 2) == 9);
  CHECK(d.labels == std::vector<int>{0, 1, 2});

  SubjectData mismatched = b;
  mismatched.features.values.resize(1, 2);
  mismatched.features.values << 1, 2;
  CHECK_THROWS_AS(static_cast<void>(stack_timepoints({a, mismatched})), ShapeError);
  CHECK_THROWS_AS(static_cast<void>(stack_timepoints({})), ShapeError);
}

TEST_CASE("grid_search evaluates every point in order and applies the tie rules") {
  const Flat tr = clusters_dataset(10, 11);
  const Flat va = clusters_dataset(5, 12);
  FlatDataset train{tr.x, tr.y};
  FlatDataset val{va.x, va.y};

  RfGrids grids;
  grids.n_trees = {10, 20};
  grids.min_leaf = {2, 4};
  const RfGridResult r = grid_search(train, val, grids, 31);

  REQUIRE(r.log.size() == 4);
  CHECK(r.log[0].n_trees == 10);
  CHECK(r.log[0].min_leaf == 2);
  CHECK(r.log[1].n_trees == 10);
  CHECK(r.log[1].min_leaf == 4);
  CHECK(r.log[2].n_trees == 20);
  CHECK(r.log[2].min_leaf == 2);
  CHECK(r.log[3].min_leaf == 4);

  // Recompute the winner from the log with the documented tie rules:
  // higher accuracy first, then fewer trees, then larger min_leaf.
  RfGridPoint best = r.log[0];
  for (const RfGridPoint& p : r.log) {
    const bool better =
        p.val_accuracy > best.val_accuracy ||
        (p.val_accuracy == best.val_accuracy &&
         (p.n_trees < best.n_trees ||
          (p.n_trees == best.n_trees && p.min_leaf > best.min_leaf)));
    if (better) best = p;
  }
  CHECK(r.best_config.n_trees == best.n_trees);
  CHECK(r.best_config.min_leaf == best.min_leaf);
  CHECK(r.best_config.seed == 31);

  // The returned forest is exactly the winning configuration's fit.
  const Forest refit = fit_forest(train.rows, train.labels, r.best_config);
  const fs::path dir = fs::temp_directory_path() / "braindec_grid_refit";
  fs::create_directories(dir);
  save_forest(dir / "won.bin", r.forest);
  save_forest(dir / "refit.bin", refit);
  CHECK(file_bytes(dir / "won.bin") == file_bytes(dir / "refit.bin"));
  fs::remove_all(dir);
}

TEST_CASE("the default grids match the study design") {
  const RfGrids grids;
  CHECK(grids.n_trees == std::vector<int>{100, 200, 500, 1000});
  CHECK(grids.min_leaf == std::vector<int>{3, 5, 10});
}

TEST_CASE("deep trees memorize what shallow leaves smooth over") {
  // Alternating 3-blocks of labels along one feature: min_leaf 3 can isolate
  // each block; min_leaf 10 cannot, so its training accuracy is lower.
  Flat d;
  d.x.resize(30, 1);
  for (int i = 0; i < 30; ++i) {
    d.x(i, 0) = i;
    d.y.push_back((i / 3) % 2);
  }
  RfConfig fine;
  fine.n_trees = 30;
  fine.min_leaf = 3;
  fine.seed = 3;
  RfConfig coarse = fine;
  coarse.min_leaf = 10;
  const double fine_acc = train_accuracy(fit_forest(d.x, d.y, fine), d);
  const double coarse_acc = train_accuracy(fit_forest(d.x, d.y, coarse), d);
  CHECK(fine_acc > coarse_acc);
  CHECK(fine_acc >= 0.9);
}

TEST_CASE("grid_search rejects empty grids and empty validation sets") {
  const Flat tr = clusters_dataset(5, 1);
  const Flat va = clusters_dataset(2, 2);
  const FlatDataset train{tr.x, tr.y};
  const FlatDataset val{va.x, va.y};

  RfGrids empty_grid;
  empty_grid.n_trees = {};
  CHECK_THROWS_AS(static_cast<void>(grid_search(train, val, empty_grid, 0)), ShapeError);

  FlatDataset no_val;
  no_val.rows.resize(0, 2);
  RfGrids grids;
  grids.n_trees = {5};
  grids.min_leaf = {2};
  CHECK_THROWS_AS(static_cast<void>(grid_search(train, no_val, grids, 0)), ShapeError);
}
