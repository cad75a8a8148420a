#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "prospect/data/dataset.hpp"
#include "prospect/error.hpp"
#include "prospect/io.hpp"
#include "prospect/nn/tensor.hpp"
#include "prospect/random.hpp"

namespace prospect {

/// 1 - sum_c (n_c / n)^2.
inline double gini(std::span<const std::size_t> counts) {
  std::size_t n = 0;
  for (const auto c : counts) n += c;
  if (n == 0) throw DataError("gini: all counts are zero");
  double s = 0.0;
  for (const auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    s += p * p;
  }
  return 1.0 - s;
}

inline double gini(std::initializer_list<std::size_t> counts) {
  return gini(std::span<const std::size_t>(counts.begin(), counts.size()));
}

struct RfConfig {
  std::size_t n_trees = 300;
  std::size_t max_depth = 12;
  double min_samples = 5.0;  // >= 1: row count; in (0,1): fraction of the training size
  std::size_t features_per_split = 0;  // 0 = ceil(sqrt(d))
  bool bootstrap = true;
  bool weighted_gini = false;  // inverse-frequency class weights inside the impurity
  std::size_t threads = 0;     // 0 = hardware concurrency
  std::uint64_t seed = 1;

  void validate() const {
    if (n_trees == 0) throw ConfigError("n_trees must be >= 1");
    if (max_depth == 0) throw ConfigError("max_depth must be >= 1");
    if (!(min_samples > 0.0) || !std::isfinite(min_samples) || (min_samples > 1.0 && min_samples != std::floor(min_samples))) {
      throw ConfigError("min_samples must be a positive count or a fraction in (0,1)");
    }
  }

  /// Minimum rows a node needs before a split is attempted.
  std::size_t resolved_min_samples(std::size_t train_rows) const {
    if (min_samples >= 1.0) return static_cast<std::size_t>(min_samples);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(min_samples * static_cast<double>(train_rows))));
  }

  std::size_t resolved_features(std::size_t d) const {
    if (features_per_split == 0) return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
    return std::min(features_per_split, d);
  }
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // rows with x[feature] <= threshold go left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double probability = 0.0;   // class-1 fraction of the node's training rows
  std::uint32_t rows = 0;

  bool leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// CART tree; node 0 is the root.
class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) { validate(); }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  double predict_row(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].leaf()) {
      const auto& n = nodes_[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes_[i].probability;
  }

  /// Edges on the longest root-to-leaf path.
  std::size_t depth() const { return depth_from(0); }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.leaf(); }));
  }

  void validate(std::size_t input_width = 0) const {
    if (nodes_.empty()) throw FormatError("tree has no nodes");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (!(n.probability >= 0.0 && n.probability <= 1.0)) throw FormatError("leaf probability outside [0,1]");
      if (n.leaf()) continue;
      const auto count = static_cast<std::int32_t>(nodes_.size());
      // children always follow their parent, which also rules out cycles
      if (n.left <= static_cast<std::int32_t>(i) || n.right <= static_cast<std::int32_t>(i) || n.left >= count ||
          n.right >= count) {
        throw FormatError("tree child index out of range");
      }
      if (input_width != 0 && static_cast<std::size_t>(n.feature) >= input_width) {
        throw FormatError("tree split feature out of range");
      }
    }
  }

  bool operator==(const DecisionTree&) const = default;

 private:
  std::size_t depth_from(std::size_t i) const {
    const auto& n = nodes_[i];
    if (n.leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)), depth_from(static_cast<std::size_t>(n.right)));
  }

  std::vector<TreeNode> nodes_;
};

namespace detail {

/// Split score to maximize: sum over children of (sum_c n_c^2) / n_child,
/// equivalent to minimizing the size-weighted child Gini. Unweighted scores
/// are compared exactly as fractions of integers.
struct SplitScore {
  __int128 num = 0;
  __int128 den = 1;
  double weighted = 0.0;
  bool exact = true;

  static SplitScore counts(std::uint64_t l0, std::uint64_t l1, std::uint64_t r0, std::uint64_t r1) {
    const __int128 nl = l0 + l1;
    const __int128 nr = r0 + r1;
    const __int128 a = static_cast<__int128>(l0) * l0 + static_cast<__int128>(l1) * l1;
    const __int128 b = static_cast<__int128>(r0) * r0 + static_cast<__int128>(r1) * r1;
    return {a * nr + b * nl, nl * nr, 0.0, true};
  }

  static SplitScore weights(double l0, double l1, double r0, double r1) {
    return {0, 1, (l0 * l0 + l1 * l1) / (l0 + l1) + (r0 * r0 + r1 * r1) / (r0 + r1), false};
  }

  bool better_than(const SplitScore& o) const {
    if (exact) return num * o.den > o.num * den;
    return weighted > o.weighted;
  }
};

struct TreeBuilder {
  const Tensor2D& x;
  std::span<const int> y;
  std::size_t max_depth;
  std::size_t min_samples;
  std::size_t features_per_split;
  bool weighted;
  double w0 = 1.0;
  double w1 = 1.0;
  Rng& rng;
  std::vector<TreeNode> nodes;
  std::vector<std::pair<double, int>> scratch;
  std::vector<std::size_t> feature_order;

  struct Best {
    bool found = false;
    SplitScore score;
    std::size_t feature = 0;
    double threshold = 0.0;
  };

  bool constant(std::span<const std::size_t> rows, std::size_t f) const {
    const double first = x(rows.front(), f);
    for (const auto r : rows) {
      if (x(r, f) != first) return false;
    }
    return true;
  }

  // Updates `best` with the best threshold on feature f.
  void scan_feature(std::span<const std::size_t> rows, std::size_t f, Best& best) {
    scratch.clear();
    for (const auto r : rows) scratch.emplace_back(x(r, f), y[r]);
    std::sort(scratch.begin(), scratch.end());
    std::uint64_t t0 = 0, t1 = 0;
    for (const auto& [v, label] : scratch) (label ? t1 : t0) += 1;
    std::uint64_t l0 = 0, l1 = 0;
    for (std::size_t i = 0; i + 1 < scratch.size(); ++i) {
      (scratch[i].second ? l1 : l0) += 1;
      if (scratch[i].first == scratch[i + 1].first) continue;
      const SplitScore s = weighted ? SplitScore::weights(w0 * l0, w1 * l1, w0 * (t0 - l0), w1 * (t1 - l1))
                                    : SplitScore::counts(l0, l1, t0 - l0, t1 - l1);
      if (!best.found || s.better_than(best.score)) {
        const double lo = scratch[i].first;
        const double hi = scratch[i + 1].first;
        double mid = lo + (hi - lo) / 2.0;
        if (!(mid < hi)) mid = lo;  // adjacent doubles
        best = {true, s, f, mid};
      }
    }
  }

  std::int32_t grow(std::vector<std::size_t>& rows, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    std::size_t ones = 0;
    for (const auto r : rows) ones += static_cast<std::size_t>(y[r]);
    {
      auto& node = nodes.back();
      node.rows = static_cast<std::uint32_t>(rows.size());
      node.probability = static_cast<double>(ones) / static_cast<double>(rows.size());
    }
    if (depth >= max_depth || rows.size() < min_samples || ones == 0 || ones == rows.size()) return id;

    // Visit features in random order until enough non-constant ones have
    // been scanned; among those, the strictly best score wins with ties going
    // to the lowest feature index, then the lowest threshold.
    std::shuffle(feature_order.begin(), feature_order.end(), rng);
    std::vector<std::size_t> chosen;
    for (const auto f : feature_order) {
      if (chosen.size() == features_per_split) break;
      if (!constant(rows, f)) chosen.push_back(f);
    }
    if (chosen.empty()) return id;
    std::sort(chosen.begin(), chosen.end());
    Best best;
    for (const auto f : chosen) scan_feature(rows, f, best);

    std::vector<std::size_t> left, right;
    for (const auto r : rows) (x(r, best.feature) <= best.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    nodes[static_cast<std::size_t>(id)].feature = static_cast<std::int32_t>(best.feature);
    nodes[static_cast<std::size_t>(id)].threshold = best.threshold;
    const auto l = grow(left, depth + 1);
    const auto r = grow(right, depth + 1);
    nodes[static_cast<std::size_t>(id)].left = l;
    nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }
};

inline void check_training_data(const Tensor2D& x, std::span<const int> y) {
  if (x.rows() == 0) throw DataError("fit_forest: empty training data");
  if (x.rows() != y.size()) throw ShapeError("fit_forest: feature and label counts differ");
  for (const int v : y) {
    if (v != 0 && v != 1) throw DataError("fit_forest: label must be 0 or 1");
  }
  require_finite(x, "forest input");
}

}  // namespace detail

/// Grows one tree on the given rows (duplicates allowed, as in a bootstrap
/// sample).
inline DecisionTree fit_tree(const Tensor2D& x, std::span<const int> y, std::vector<std::size_t> rows,
                             const RfConfig& cfg, Rng& rng) {
  cfg.validate();
  detail::check_training_data(x, y);
  if (rows.empty()) throw DataError("fit_tree: no rows");
  detail::TreeBuilder b{x, y, cfg.max_depth, cfg.resolved_min_samples(x.rows()), cfg.resolved_features(x.cols()),
                        cfg.weighted_gini, 1.0, 1.0, rng, {}, {}, {}};
  if (cfg.weighted_gini) {
    const auto ones = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    const double n = static_cast<double>(y.size());
    b.w0 = ones == y.size() ? 1.0 : n / static_cast<double>(y.size() - ones);
    b.w1 = ones == 0 ? 1.0 : n / static_cast<double>(ones);
  }
  b.feature_order.resize(x.cols());
  std::iota(b.feature_order.begin(), b.feature_order.end(), std::size_t{0});
  b.grow(rows, 0);
  return DecisionTree(std::move(b.nodes));
}

class RandomForest {
 public:
  RandomForest() = default;
  RandomForest(std::size_t input_width, std::vector<DecisionTree> trees)
      : input_width_(input_width), trees_(std::move(trees)) {
    for (const auto& t : trees_) t.validate(input_width_);
  }

  std::size_t input_width() const noexcept { return input_width_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  bool operator==(const RandomForest&) const = default;

 private:
  std::size_t input_width_ = 0;
  std::vector<DecisionTree> trees_;
};

/// Trees are grown from per-tree seeds derived from cfg.seed, so the result
/// does not depend on the thread count.
inline RandomForest fit_forest(const Tensor2D& x, std::span<const int> y, const RfConfig& cfg) {
  cfg.validate();
  detail::check_training_data(x, y);
  const std::uint64_t base = derive_seed(cfg.seed, streams::forest);
  std::vector<DecisionTree> trees(cfg.n_trees);
  auto fit_one = [&](std::size_t t) {
    Rng rng(derive_seed(base, t));
    std::vector<std::size_t> rows(x.rows());
    if (cfg.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, x.rows() - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    trees[t] = fit_tree(x, y, std::move(rows), cfg, rng);
  };

  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, cfg.n_trees);
  if (threads <= 1) {
    for (std::size_t t = 0; t < cfg.n_trees; ++t) fit_one(t);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t t = w; t < cfg.n_trees; t += threads) fit_one(t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return RandomForest(x.cols(), std::move(trees));
}

inline RandomForest fit_forest(const LabeledDataset& ds, const RfConfig& cfg) {
  if (ds.features.empty()) throw ConfigError("fit_forest: dataset is not encoded");
  const auto labels = ds.labels_of(Split::train);
  return fit_forest(ds.features_of(Split::train), labels, cfg);
}

/// Mean of the trees' leaf class-1 fractions.
inline std::vector<double> predict_proba_rf(const RandomForest& forest, const Tensor2D& x) {
  if (x.cols() != forest.input_width()) {
    throw ShapeError("predict_proba_rf: input has " + std::to_string(x.cols()) + " columns, forest expects " +
                     std::to_string(forest.input_width()));
  }
  std::vector<double> out(x.rows(), 0.0);
  if (forest.trees().empty()) return out;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (const auto& t : forest.trees()) s += t.predict_row(x.row(r));
    out[r] = s / static_cast<double>(forest.trees().size());
  }
  return out;
}

// Container: "PKRF" | u16 version | u32 input width | u32 tree count
//   | per tree: u32 node count | per node: i32 feature, f64 threshold,
//     i32 left, i32 right, f64 probability, u32 rows
inline constexpr std::uint16_t kForestFormatVersion = 1;

inline void write_forest(ByteWriter& w, const RandomForest& f) {
  w.bytes("PKRF");
  w.u16(kForestFormatVersion);
  w.u32(static_cast<std::uint32_t>(f.input_width()));
  w.u32(static_cast<std::uint32_t>(f.trees().size()));
  for (const auto& t : f.trees()) {
    w.u32(static_cast<std::uint32_t>(t.nodes().size()));
    for (const auto& n : t.nodes()) {
      w.i32(n.feature);
      w.f64(n.threshold);
      w.i32(n.left);
      w.i32(n.right);
      w.f64(n.probability);
      w.u32(n.rows);
    }
  }
}

inline RandomForest read_forest(ByteReader& r) {
  r.expect_magic("PKRF");
  if (r.u16() != kForestFormatVersion) throw FormatError("unsupported forest version");
  const std::size_t width = r.u32();
  const std::size_t count = r.u32();
  std::vector<DecisionTree> trees;
  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t nodes = r.u32();
    if (nodes > r.remaining()) throw FormatError("truncated container");
    std::vector<TreeNode> v(nodes);
    for (auto& n : v) {
      n.feature = r.i32();
      n.threshold = r.f64();
      n.left = r.i32();
      n.right = r.i32();
      n.probability = r.f64();
      n.rows = r.u32();
    }
    trees.emplace_back(std::move(v));
  }
  return RandomForest(width, std::move(trees));
}

}  // namespace prospect
