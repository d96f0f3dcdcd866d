#pragma once

#include <array>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stresskit/common.hpp"
#include "stresskit/observations.hpp"

namespace stresskit {

// --------------------------------------------------------------------------
// Dataset
// --------------------------------------------------------------------------

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> x;  // n rows, feature_names.size() wide
  std::vector<StressLevel> y;          // n labels
};

inline Dataset make_dataset(std::span<const Observation> observations) {
  Dataset d;
  const std::size_t width =
      observations.empty()
          ? static_cast<std::size_t>(kNumObservationFeatures)
          : observations.front().features.size();
  if (width == static_cast<std::size_t>(kNumObservationFeatures)) {
    d.feature_names = aggregate_feature_names();
  } else {
    for (std::size_t i = 0; i < width; ++i) {
      d.feature_names.push_back("f" + std::to_string(i));
    }
  }
  d.x.reserve(observations.size());
  d.y.reserve(observations.size());
  for (const auto& o : observations) {
    if (o.features.size() != width) {
      throw std::invalid_argument("observations have inconsistent feature widths");
    }
    d.x.push_back(o.features);
    d.y.push_back(o.label);
  }
  return d;
}

inline std::vector<int> all_indices(std::size_t n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

inline std::vector<double> gather_features(const std::vector<double>& row,
                                           std::span<const int> cols) {
  std::vector<double> out;
  out.reserve(cols.size());
  for (int c : cols) out.push_back(row[static_cast<std::size_t>(c)]);
  return out;
}

// --------------------------------------------------------------------------
// Predictions and the model interface
// --------------------------------------------------------------------------

struct Prediction {
  StressLevel predicted = StressLevel::Low;
  std::array<double, kNumLevels> prob{};  // sums to 1; absent classes at 0
};

// Ties break toward the lower stress level.
inline StressLevel argmax_level(const std::array<double, kNumLevels>& prob) {
  int best = 0;
  for (int i = 1; i < kNumLevels; ++i) {
    if (prob[static_cast<std::size_t>(i)] > prob[static_cast<std::size_t>(best)]) {
      best = i;
    }
  }
  return level_from_code(best);
}

// Trained classifiers are immutable; predict is pure except for the random
// baseline, which draws from the explicit caller-supplied engine.
class Model {
 public:
  virtual ~Model() = default;
  virtual Prediction predict(std::span<const double> features,
                             std::mt19937_64& rng) const = 0;
  virtual std::size_t feature_count() const = 0;
  virtual std::string kind() const = 0;
  virtual nlohmann::json to_json() const = 0;

 protected:
  static void check_width(std::size_t got, std::size_t want) {
    if (got != want) {
      throw std::invalid_argument("feature vector width " +
                                  std::to_string(got) +
                                  " does not match training width " +
                                  std::to_string(want));
    }
  }
};

using ModelFactory = std::function<std::unique_ptr<Model>(
    const Dataset&, std::span<const int>, std::span<const int>)>;

inline constexpr int kModelFormatVersion = 1;

// --------------------------------------------------------------------------
// Gaussian Naive Bayes
// --------------------------------------------------------------------------

struct NaiveBayesConfig {
  // Class-conditional variances are floored at
  // scale * max(per-feature training variance), or scale itself when all
  // features are constant, so constant features cannot produce degenerate
  // likelihoods.
  double variance_floor_scale = 1e-9;
};

class GaussianNaiveBayesModel final : public Model {
 public:
  struct ClassParams {
    double prior = 0.0;
    std::vector<double> mean;
    std::vector<double> variance;
  };

  GaussianNaiveBayesModel(std::size_t width,
                          std::array<bool, kNumLevels> present,
                          std::array<ClassParams, kNumLevels> params)
      : width_(width), present_(present), params_(std::move(params)) {}

  Prediction predict(std::span<const double> features,
                     std::mt19937_64&) const override {
    check_width(features.size(), width_);
    std::array<double, kNumLevels> log_post{};
    double max_lp = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < kNumLevels; ++c) {
      if (!present_[static_cast<std::size_t>(c)]) continue;
      const auto& p = params_[static_cast<std::size_t>(c)];
      double lp = std::log(p.prior);
      for (std::size_t f = 0; f < width_; ++f) {
        const double d = features[f] - p.mean[f];
        lp += -0.5 * std::log(2.0 * std::numbers::pi * p.variance[f]) -
              d * d / (2.0 * p.variance[f]);
      }
      log_post[static_cast<std::size_t>(c)] = lp;
      max_lp = std::max(max_lp, lp);
    }
    Prediction out;
    double total = 0.0;
    for (int c = 0; c < kNumLevels; ++c) {
      if (!present_[static_cast<std::size_t>(c)]) continue;
      const double e = std::exp(log_post[static_cast<std::size_t>(c)] - max_lp);
      out.prob[static_cast<std::size_t>(c)] = e;
      total += e;
    }
    for (double& p : out.prob) p /= total;
    out.predicted = argmax_level(out.prob);
    return out;
  }

  std::size_t feature_count() const override { return width_; }
  std::string kind() const override { return "naive_bayes"; }

  nlohmann::json to_json() const override {
    nlohmann::json j;
    j["version"] = kModelFormatVersion;
    j["kind"] = kind();
    j["width"] = width_;
    for (int c = 0; c < kNumLevels; ++c) {
      if (!present_[static_cast<std::size_t>(c)]) continue;
      const auto& p = params_[static_cast<std::size_t>(c)];
      nlohmann::json jc;
      jc["level"] = c;
      jc["prior"] = p.prior;
      jc["mean"] = p.mean;
      jc["variance"] = p.variance;
      j["classes"].push_back(jc);
    }
    return j;
  }

  static std::unique_ptr<GaussianNaiveBayesModel> from_json(
      const nlohmann::json& j) {
    std::array<bool, kNumLevels> present{};
    std::array<ClassParams, kNumLevels> params;
    for (const auto& jc : j.at("classes")) {
      const int c = jc.at("level").get<int>();
      present[static_cast<std::size_t>(c)] = true;
      auto& p = params[static_cast<std::size_t>(c)];
      p.prior = jc.at("prior").get<double>();
      p.mean = jc.at("mean").get<std::vector<double>>();
      p.variance = jc.at("variance").get<std::vector<double>>();
    }
    return std::make_unique<GaussianNaiveBayesModel>(
        j.at("width").get<std::size_t>(), present, std::move(params));
  }

 private:
  std::size_t width_;
  std::array<bool, kNumLevels> present_;
  std::array<ClassParams, kNumLevels> params_;
};

inline std::unique_ptr<Model> fit_naive_bayes(const Dataset& data,
                                              std::span<const int> rows,
                                              std::span<const int> cols,
                                              const NaiveBayesConfig& cfg = {}) {
  if (rows.empty()) throw std::invalid_argument("naive bayes: empty training set");
  const std::size_t width = cols.size();

  std::array<std::vector<int>, kNumLevels> by_class;
  for (int r : rows) {
    by_class[static_cast<std::size_t>(level_code(data.y[static_cast<std::size_t>(r)]))]
        .push_back(r);
  }
  for (int c = 0; c < kNumLevels; ++c) {
    const auto& members = by_class[static_cast<std::size_t>(c)];
    if (!members.empty() && members.size() < 2) {
      throw std::invalid_argument(
          std::string("naive bayes requires >= 2 observations per class; "
                      "class '") +
          level_name(level_from_code(c)) + "' has " +
          std::to_string(members.size()));
    }
  }

  // Variance floor from the spread of the whole training slice.
  double max_var = 0.0;
  for (int c : cols) {
    KahanSum s;
    for (int r : rows) s.add(data.x[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
    const double m = s.value() / static_cast<double>(rows.size());
    KahanSum sq;
    for (int r : rows) {
      const double d = data.x[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] - m;
      sq.add(d * d);
    }
    max_var = std::max(max_var, sq.value() / static_cast<double>(rows.size()));
  }
  const double floor = cfg.variance_floor_scale * (max_var > 0.0 ? max_var : 1.0);

  std::array<bool, kNumLevels> present{};
  std::array<GaussianNaiveBayesModel::ClassParams, kNumLevels> params;
  for (int c = 0; c < kNumLevels; ++c) {
    const auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.empty()) continue;
    present[static_cast<std::size_t>(c)] = true;
    auto& p = params[static_cast<std::size_t>(c)];
    p.prior = static_cast<double>(members.size()) / static_cast<double>(rows.size());
    p.mean.resize(width);
    p.variance.resize(width);
    for (std::size_t f = 0; f < width; ++f) {
      const std::size_t col = static_cast<std::size_t>(cols[f]);
      KahanSum s;
      for (int r : members) s.add(data.x[static_cast<std::size_t>(r)][col]);
      const double m = s.value() / static_cast<double>(members.size());
      KahanSum sq;
      for (int r : members) {
        const double d = data.x[static_cast<std::size_t>(r)][col] - m;
        sq.add(d * d);
      }
      p.mean[f] = m;
      p.variance[f] = std::max(
          sq.value() / static_cast<double>(members.size()), floor);
    }
  }
  return std::make_unique<GaussianNaiveBayesModel>(width, present,
                                                   std::move(params));
}

inline std::unique_ptr<Model> fit_naive_bayes(const Dataset& data,
                                              const NaiveBayesConfig& cfg = {}) {
  const auto rows = all_indices(data.x.size());
  const auto cols = all_indices(data.feature_names.size());
  return fit_naive_bayes(data, rows, cols, cfg);
}

// --------------------------------------------------------------------------
// Decision tree (CART, Gini impurity)
// --------------------------------------------------------------------------

struct TreeConfig {
  int max_depth = 8;
  int min_leaf = 5;
};

class DecisionTreeModel final : public Model {
 public:
  struct Node {
    bool leaf = true;
    int feature = -1;
    double threshold = 0.0;
    int left = -1, right = -1;
    std::array<double, kNumLevels> dist{};
  };

  DecisionTreeModel(std::size_t width, std::vector<Node> nodes)
      : width_(width), nodes_(std::move(nodes)) {}

  Prediction predict(std::span<const double> features,
                     std::mt19937_64&) const override {
    check_width(features.size(), width_);
    int i = 0;
    while (!nodes_[static_cast<std::size_t>(i)].leaf) {
      const auto& nd = nodes_[static_cast<std::size_t>(i)];
      i = features[static_cast<std::size_t>(nd.feature)] <= nd.threshold
              ? nd.left
              : nd.right;
    }
    Prediction out;
    out.prob = nodes_[static_cast<std::size_t>(i)].dist;
    out.predicted = argmax_level(out.prob);
    return out;
  }

  std::size_t feature_count() const override { return width_; }
  std::string kind() const override { return "decision_tree"; }

  int depth() const {
    std::function<int(int)> walk = [&](int i) -> int {
      const auto& nd = nodes_[static_cast<std::size_t>(i)];
      if (nd.leaf) return 0;
      return 1 + std::max(walk(nd.left), walk(nd.right));
    };
    return walk(0);
  }

  nlohmann::json to_json() const override {
    nlohmann::json j;
    j["version"] = kModelFormatVersion;
    j["kind"] = kind();
    j["width"] = width_;
    j["nodes"] = nlohmann::json::array();
    for (const auto& nd : nodes_) {
      nlohmann::json jn;
      jn["leaf"] = nd.leaf;
      if (nd.leaf) {
        jn["dist"] = nd.dist;
      } else {
        jn["feature"] = nd.feature;
        jn["threshold"] = nd.threshold;
        jn["left"] = nd.left;
        jn["right"] = nd.right;
      }
      j["nodes"].push_back(jn);
    }
    return j;
  }

  static std::unique_ptr<DecisionTreeModel> from_json(const nlohmann::json& j) {
    std::vector<Node> nodes;
    for (const auto& jn : j.at("nodes")) {
      Node nd;
      nd.leaf = jn.at("leaf").get<bool>();
      if (nd.leaf) {
        const auto d = jn.at("dist").get<std::vector<double>>();
        std::copy(d.begin(), d.end(), nd.dist.begin());
      } else {
        nd.feature = jn.at("feature").get<int>();
        nd.threshold = jn.at("threshold").get<double>();
        nd.left = jn.at("left").get<int>();
        nd.right = jn.at("right").get<int>();
      }
      nodes.push_back(nd);
    }
    return std::make_unique<DecisionTreeModel>(j.at("width").get<std::size_t>(),
                                               std::move(nodes));
  }

 private:
  std::size_t width_;
  std::vector<Node> nodes_;
};

namespace detail {

inline double gini(const std::array<std::size_t, kNumLevels>& counts,
                   std::size_t total) {
  double g = 1.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    g -= p * p;
  }
  return g;
}

}  // namespace detail

// Greedy binary tree on axis-aligned splits. Candidate thresholds are the
// midpoints between consecutive distinct sorted values; the best split is
// taken even at zero Gini gain (ties keep the lowest feature index and
// threshold), so structure like XOR is still separable at depth 2. Growth
// stops at max_depth, min_leaf, or a pure node.
inline std::unique_ptr<Model> fit_tree(const Dataset& data,
                                       std::span<const int> rows,
                                       std::span<const int> cols,
                                       const TreeConfig& cfg = {}) {
  if (rows.empty()) throw std::invalid_argument("decision tree: empty training set");
  std::vector<DecisionTreeModel::Node> nodes;

  std::function<int(std::vector<int>, int)> grow =
      [&](std::vector<int> members, int depth) -> int {
    std::array<std::size_t, kNumLevels> counts{};
    for (int r : members) {
      ++counts[static_cast<std::size_t>(level_code(data.y[static_cast<std::size_t>(r)]))];
    }
    DecisionTreeModel::Node node;
    for (int c = 0; c < kNumLevels; ++c) {
      node.dist[static_cast<std::size_t>(c)] =
          static_cast<double>(counts[static_cast<std::size_t>(c)]) /
          static_cast<double>(members.size());
    }
    const bool pure =
        *std::max_element(counts.begin(), counts.end()) == members.size();
    const std::size_t min_split =
        2 * static_cast<std::size_t>(std::max(cfg.min_leaf, 1));
    if (pure || depth >= cfg.max_depth || members.size() < min_split) {
      nodes.push_back(node);
      return static_cast<int>(nodes.size()) - 1;
    }

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_impurity = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, StressLevel>> sorted;
    for (std::size_t fi = 0; fi < cols.size(); ++fi) {
      const std::size_t col = static_cast<std::size_t>(cols[fi]);
      sorted.clear();
      for (int r : members) {
        sorted.push_back({data.x[static_cast<std::size_t>(r)][col],
                          data.y[static_cast<std::size_t>(r)]});
      }
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      std::array<std::size_t, kNumLevels> left_counts{};
      auto right_counts = counts;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const auto lvl = static_cast<std::size_t>(level_code(sorted[i].second));
        ++left_counts[lvl];
        --right_counts[lvl];
        if (sorted[i].first == sorted[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = sorted.size() - nl;
        if (nl < static_cast<std::size_t>(cfg.min_leaf) ||
            nr < static_cast<std::size_t>(cfg.min_leaf)) {
          continue;
        }
        const double impurity =
            (static_cast<double>(nl) * detail::gini(left_counts, nl) +
             static_cast<double>(nr) * detail::gini(right_counts, nr)) /
            static_cast<double>(sorted.size());
        if (impurity < best_impurity) {
          best_impurity = impurity;
          best_feature = static_cast<int>(fi);
          best_threshold = sorted[i].first / 2.0 + sorted[i + 1].first / 2.0;
        }
      }
    }

    if (best_feature < 0) {
      nodes.push_back(node);
      return static_cast<int>(nodes.size()) - 1;
    }

    std::vector<int> left, right;
    for (int r : members) {
      const double v = data.x[static_cast<std::size_t>(r)]
                             [static_cast<std::size_t>(cols[static_cast<std::size_t>(best_feature)])];
      (v <= best_threshold ? left : right).push_back(r);
    }
    node.leaf = false;
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = grow(std::move(left), depth + 1);
    node.right = grow(std::move(right), depth + 1);
    nodes.push_back(node);
    return static_cast<int>(nodes.size()) - 1;
  };

  std::vector<int> members(rows.begin(), rows.end());
  const int root = grow(std::move(members), 0);
  // Children were emitted before their parents; rebase so the root is node 0.
  std::vector<DecisionTreeModel::Node> ordered;
  ordered.reserve(nodes.size());
  std::function<int(int)> reorder = [&](int i) -> int {
    const auto& nd = nodes[static_cast<std::size_t>(i)];
    const int self = static_cast<int>(ordered.size());
    ordered.push_back(nd);
    if (!nd.leaf) {
      ordered[static_cast<std::size_t>(self)].left = reorder(nd.left);
      ordered[static_cast<std::size_t>(self)].right = reorder(nd.right);
    }
    return self;
  };
  reorder(root);
  return std::make_unique<DecisionTreeModel>(cols.size(), std::move(ordered));
}

inline std::unique_ptr<Model> fit_tree(const Dataset& data,
                                       const TreeConfig& cfg = {}) {
  const auto rows = all_indices(data.x.size());
  const auto cols = all_indices(data.feature_names.size());
  return fit_tree(data, rows, cols, cfg);
}

// --------------------------------------------------------------------------
// Frank-Hall ordinal wrapper
// --------------------------------------------------------------------------

// Recombines the k-1 threshold probabilities into the 3-class distribution:
// P(Low) = 1 - P(>Low), P(Medium) = P(>Low) - P(>Medium), P(High) =
// P(>Medium). A negative middle term is clamped to 0 and the vector
// renormalised.
inline std::array<double, kNumLevels> frank_hall_combine(double p_gt_low,
                                                         double p_gt_medium) {
  std::array<double, kNumLevels> p = {1.0 - p_gt_low, p_gt_low - p_gt_medium,
                                      p_gt_medium};
  double total = 0.0;
  for (double& v : p) {
    if (v < 0.0) v = 0.0;
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

using BinaryFactory = std::function<std::unique_ptr<Model>(
    const Dataset&, std::span<const int>, std::span<const int>)>;

// One "level > threshold" subproblem: a trained binary model, or the
// constant empirical probability when only one side is present in training.
class OrdinalModel final : public Model {
 public:
  struct Threshold {
    std::unique_ptr<Model> model;  // null -> constant
    double constant = 0.0;
  };

  OrdinalModel(std::size_t width, std::string base_kind,
               std::array<Threshold, kNumLevels - 1> thresholds)
      : width_(width),
        base_kind_(std::move(base_kind)),
        thresholds_(std::move(thresholds)) {}

  Prediction predict(std::span<const double> features,
                     std::mt19937_64& rng) const override {
    check_width(features.size(), width_);
    std::array<double, kNumLevels - 1> p_gt{};
    for (int t = 0; t < kNumLevels - 1; ++t) {
      const auto& th = thresholds_[static_cast<std::size_t>(t)];
      p_gt[static_cast<std::size_t>(t)] =
          th.model ? th.model->predict(features, rng).prob[1] : th.constant;
    }
    Prediction out;
    out.prob = frank_hall_combine(p_gt[0], p_gt[1]);
    out.predicted = argmax_level(out.prob);
    return out;
  }

  std::size_t feature_count() const override { return width_; }
  std::string kind() const override { return "ordinal_" + base_kind_; }

  nlohmann::json to_json() const override {
    nlohmann::json j;
    j["version"] = kModelFormatVersion;
    j["kind"] = "ordinal";
    j["base_kind"] = base_kind_;
    j["width"] = width_;
    j["thresholds"] = nlohmann::json::array();
    for (const auto& th : thresholds_) {
      nlohmann::json jt;
      if (th.model) {
        jt["model"] = th.model->to_json();
      } else {
        jt["constant"] = th.constant;
      }
      j["thresholds"].push_back(jt);
    }
    return j;
  }

 private:
  std::size_t width_;
  std::string base_kind_;
  std::array<Threshold, kNumLevels - 1> thresholds_;
};

// Trains the k-1 binary subproblems "level > Low" and "level > Medium"
// with the supplied binary factory. Binary targets are encoded on the
// ladder's two lowest levels: negative -> Low, positive -> Medium, so a
// sub-model's prob[1] is its positive-class probability.
inline std::unique_ptr<Model> fit_ordinal(const BinaryFactory& base,
                                          const Dataset& data,
                                          std::span<const int> rows,
                                          std::span<const int> cols) {
  if (rows.empty()) throw std::invalid_argument("ordinal fit: empty training set");
  int distinct = 0;
  {
    std::array<bool, kNumLevels> seen{};
    for (int r : rows) seen[static_cast<std::size_t>(level_code(data.y[static_cast<std::size_t>(r)]))] = true;
    for (bool s : seen) distinct += s ? 1 : 0;
  }
  if (distinct < 2) {
    throw std::invalid_argument("ordinal fit needs >= 2 ordered classes present");
  }

  std::array<OrdinalModel::Threshold, kNumLevels - 1> thresholds;
  std::string base_kind = "base";
  for (int t = 0; t < kNumLevels - 1; ++t) {
    Dataset binary;
    binary.feature_names = data.feature_names;
    binary.x.reserve(rows.size());
    binary.y.reserve(rows.size());
    std::size_t positives = 0;
    for (int r : rows) {
      const bool gt = level_code(data.y[static_cast<std::size_t>(r)]) > t;
      binary.x.push_back(data.x[static_cast<std::size_t>(r)]);
      binary.y.push_back(gt ? StressLevel::Medium : StressLevel::Low);
      positives += gt ? 1 : 0;
    }
    auto& th = thresholds[static_cast<std::size_t>(t)];
    if (positives == 0 || positives == rows.size()) {
      th.constant =
          static_cast<double>(positives) / static_cast<double>(rows.size());
    } else {
      const auto brows = all_indices(binary.x.size());
      th.model = base(binary, brows, cols);
      base_kind = th.model->kind();
    }
  }
  return std::make_unique<OrdinalModel>(cols.size(), base_kind,
                                        std::move(thresholds));
}

inline std::unique_ptr<Model> fit_ordinal_naive_bayes(
    const Dataset& data, std::span<const int> rows, std::span<const int> cols,
    const NaiveBayesConfig& cfg = {}) {
  return fit_ordinal(
      [cfg](const Dataset& d, std::span<const int> r, std::span<const int> c) {
        return fit_naive_bayes(d, r, c, cfg);
      },
      data, rows, cols);
}

inline std::unique_ptr<Model> fit_ordinal_naive_bayes(
    const Dataset& data, const NaiveBayesConfig& cfg = {}) {
  const auto rows = all_indices(data.x.size());
  const auto cols = all_indices(data.feature_names.size());
  return fit_ordinal_naive_bayes(data, rows, cols, cfg);
}

// --------------------------------------------------------------------------
// Random baseline
// --------------------------------------------------------------------------

// Samples a class from the training priors on every call; the prediction's
// probability vector is one-hot at the sampled class so the argmax
// invariant holds. Concurrent callers partition generators.
class RandomModel final : public Model {
 public:
  RandomModel(std::size_t width, std::array<double, kNumLevels> priors,
              std::uint64_t seed)
      : width_(width), priors_(priors), seed_(seed) {}

  Prediction predict(std::span<const double> features,
                     std::mt19937_64& rng) const override {
    check_width(features.size(), width_);
    const double u = next_uniform(rng);
    double cum = 0.0;
    int pick = kNumLevels - 1;
    for (int c = 0; c < kNumLevels; ++c) {
      cum += priors_[static_cast<std::size_t>(c)];
      if (u < cum) {
        pick = c;
        break;
      }
    }
    Prediction out;
    out.prob[static_cast<std::size_t>(pick)] = 1.0;
    out.predicted = level_from_code(pick);
    return out;
  }

  std::size_t feature_count() const override { return width_; }
  std::string kind() const override { return "random"; }
  std::uint64_t seed() const { return seed_; }

  nlohmann::json to_json() const override {
    nlohmann::json j;
    j["version"] = kModelFormatVersion;
    j["kind"] = kind();
    j["width"] = width_;
    j["priors"] = priors_;
    j["seed"] = seed_;
    return j;
  }

  static std::unique_ptr<RandomModel> from_json(const nlohmann::json& j) {
    const auto pv = j.at("priors").get<std::vector<double>>();
    std::array<double, kNumLevels> priors{};
    std::copy(pv.begin(), pv.end(), priors.begin());
    return std::make_unique<RandomModel>(j.at("width").get<std::size_t>(),
                                         priors, j.at("seed").get<std::uint64_t>());
  }

 private:
  std::size_t width_;
  std::array<double, kNumLevels> priors_;
  std::uint64_t seed_;
};

inline std::unique_ptr<Model> fit_random(const Dataset& data,
                                         std::span<const int> rows,
                                         std::span<const int> cols,
                                         std::uint64_t seed) {
  if (rows.empty()) throw std::invalid_argument("random baseline: empty training set");
  std::array<double, kNumLevels> priors{};
  for (int r : rows) {
    priors[static_cast<std::size_t>(level_code(data.y[static_cast<std::size_t>(r)]))] += 1.0;
  }
  for (double& p : priors) p /= static_cast<double>(rows.size());
  return std::make_unique<RandomModel>(cols.size(), priors, seed);
}

// --------------------------------------------------------------------------
// Serialization entry point
// --------------------------------------------------------------------------

inline std::unique_ptr<Model> load_model(const nlohmann::json& j) {
  const int version = j.at("version").get<int>();
  if (version != kModelFormatVersion) {
    throw std::runtime_error("unsupported model format version " +
                             std::to_string(version));
  }
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "naive_bayes") return GaussianNaiveBayesModel::from_json(j);
  if (kind == "decision_tree") return DecisionTreeModel::from_json(j);
  if (kind == "random") return RandomModel::from_json(j);
  if (kind == "ordinal") {
    std::array<OrdinalModel::Threshold, kNumLevels - 1> thresholds;
    const auto& jt = j.at("thresholds");
    for (int t = 0; t < kNumLevels - 1; ++t) {
      const auto& e = jt.at(static_cast<std::size_t>(t));
      if (e.contains("model")) {
        thresholds[static_cast<std::size_t>(t)].model = load_model(e.at("model"));
      } else {
        thresholds[static_cast<std::size_t>(t)].constant =
            e.at("constant").get<double>();
      }
    }
    return std::make_unique<OrdinalModel>(j.at("width").get<std::size_t>(),
                                          j.at("base_kind").get<std::string>(),
                                          std::move(thresholds));
  }
  throw std::runtime_error("unknown model kind: " + kind);
}

}  // namespace stresskit
