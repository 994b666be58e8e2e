#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "aetsgd/error.hpp"
#include "aetsgd/rng.hpp"

namespace aetsgd {

using Vector = std::vector<double>;

// m samples of dimension `dim`, stored row-major. `labels` is empty for
// unsupervised data (the mean-quadratic objective ignores it).
struct Dataset {
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const { return dim == 0 ? 0 : features.size() / dim; }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }
  bool labeled() const { return !labels.empty(); }

  void validate() const {
    if (dim == 0 || features.empty() || features.size() % dim != 0)
      throw ValidationError("dataset: need m >= 1 rows of equal length dim >= 1");
    if (labeled()) {
      if (labels.size() != size()) throw ValidationError("dataset: label count differs from row count");
      for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= classes)
          throw ValidationError("dataset: label " + std::to_string(y) + " outside [0, classes)");
    }
  }
};

enum class ObjectiveKind { kMeanQuadratic, kLogistic };

// Per-sample loss f(w; xi).
//   MeanQuadratic: 0.5 * ||w - xi||^2, model dim = feature dim.
//   Logistic: multinomial cross-entropy over `classes` with a bias per class,
//     plus 0.5 * l2 * ||w||^2 on every parameter. Model layout is
//     classes rows of [weights(dim), bias].
struct Objective {
  ObjectiveKind kind = ObjectiveKind::kMeanQuadratic;
  std::size_t dim = 0;
  std::size_t classes = 0;
  double l2 = 0.0;

  static Objective mean_quadratic(std::size_t dim) { return {ObjectiveKind::kMeanQuadratic, dim, 0, 0.0}; }
  static Objective logistic(std::size_t dim, std::size_t classes, double l2 = 0.0) {
    if (classes < 2) throw ValidationError("logistic objective needs at least 2 classes");
    if (l2 < 0.0) throw ValidationError("logistic objective: l2 must be non-negative");
    return {ObjectiveKind::kLogistic, dim, classes, l2};
  }

  std::size_t model_dim() const {
    return kind == ObjectiveKind::kMeanQuadratic ? dim : classes * (dim + 1);
  }
};

namespace detail {

inline void check_dims(const Objective& obj, std::span<const double> w, const Dataset& ds) {
  if (w.size() != obj.model_dim())
    throw ValidationError("model has " + std::to_string(w.size()) + " parameters, objective expects " +
                          std::to_string(obj.model_dim()));
  if (ds.dim != obj.dim)
    throw ValidationError("dataset dim " + std::to_string(ds.dim) + " != objective dim " +
                          std::to_string(obj.dim));
  if (obj.kind == ObjectiveKind::kLogistic && (!ds.labeled() || ds.classes > obj.classes))
    throw ValidationError("logistic objective needs labels within its class count");
}

// Softmax probabilities for one sample into `probs` (size classes). Returns
// the log-sum-exp so callers can form the cross-entropy.
inline double softmax(const Objective& obj, std::span<const double> w, std::span<const double> x,
                      std::vector<double>& probs) {
  const std::size_t stride = obj.dim + 1;
  probs.resize(obj.classes);
  double zmax = -INFINITY;
  for (std::size_t k = 0; k < obj.classes; ++k) {
    const double* wk = w.data() + k * stride;
    double z = wk[obj.dim];
    for (std::size_t j = 0; j < obj.dim; ++j) z += wk[j] * x[j];
    probs[k] = z;
    zmax = std::max(zmax, z);
  }
  double sum = 0.0;
  for (auto& z : probs) {
    z = std::exp(z - zmax);
    sum += z;
  }
  for (auto& p : probs) p /= sum;
  return zmax + std::log(sum);
}

}  // namespace detail

// g = grad f(w; xi_idx), written into `out` (resized to model_dim).
inline void grad_into(const Objective& obj, std::span<const double> w, const Dataset& ds,
                      std::size_t idx, Vector& out) {
  detail::check_dims(obj, w, ds);
  if (idx >= ds.size())
    throw ValidationError("sample index " + std::to_string(idx) + " out of range");
  out.resize(w.size());
  const auto x = ds.row(idx);
  if (obj.kind == ObjectiveKind::kMeanQuadratic) {
    for (std::size_t j = 0; j < w.size(); ++j) out[j] = w[j] - x[j];
    return;
  }
  thread_local std::vector<double> probs;
  detail::softmax(obj, w, x, probs);
  probs[static_cast<std::size_t>(ds.labels[idx])] -= 1.0;
  const std::size_t stride = obj.dim + 1;
  for (std::size_t k = 0; k < obj.classes; ++k) {
    double* gk = out.data() + k * stride;
    for (std::size_t j = 0; j < obj.dim; ++j) gk[j] = probs[k] * x[j];
    gk[obj.dim] = probs[k];
  }
  if (obj.l2 > 0.0)
    for (std::size_t j = 0; j < w.size(); ++j) out[j] += obj.l2 * w[j];
}

inline Vector grad(const Objective& obj, std::span<const double> w, const Dataset& ds, std::size_t idx) {
  Vector g;
  grad_into(obj, w, ds, idx, g);
  return g;
}

inline double sample_loss(const Objective& obj, std::span<const double> w, const Dataset& ds,
                          std::size_t idx) {
  detail::check_dims(obj, w, ds);
  const auto x = ds.row(idx);
  if (obj.kind == ObjectiveKind::kMeanQuadratic) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) s += (w[j] - x[j]) * (w[j] - x[j]);
    return 0.5 * s;
  }
  thread_local std::vector<double> probs;
  const std::size_t stride = obj.dim + 1;
  const double lse = detail::softmax(obj, w, x, probs);
  const std::size_t y = static_cast<std::size_t>(ds.labels[idx]);
  double zy = w[y * stride + obj.dim];
  for (std::size_t j = 0; j < obj.dim; ++j) zy += w[y * stride + j] * x[j];
  double reg = 0.0;
  if (obj.l2 > 0.0)
    for (double v : w) reg += v * v;
  return (lse - zy) + 0.5 * obj.l2 * reg;
}

// Mean per-sample loss over the dataset.
inline double loss(const Objective& obj, std::span<const double> w, const Dataset& ds) {
  detail::check_dims(obj, w, ds);
  double s = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) s += sample_loss(obj, w, ds, i);
  return s / static_cast<double>(ds.size());
}

// Fraction of samples whose argmax class matches the label. Ties go to the
// lowest class id.
inline double accuracy(const Objective& obj, std::span<const double> w, const Dataset& ds) {
  if (obj.kind != ObjectiveKind::kLogistic)
    throw UnsupportedOperation("accuracy is only defined for the logistic objective");
  detail::check_dims(obj, w, ds);
  const std::size_t stride = obj.dim + 1;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto x = ds.row(i);
    std::size_t best = 0;
    double best_z = -INFINITY;
    for (std::size_t k = 0; k < obj.classes; ++k) {
      double z = w[k * stride + obj.dim];
      for (std::size_t j = 0; j < obj.dim; ++j) z += w[k * stride + j] * x[j];
      if (z > best_z) {
        best_z = z;
        best = k;
      }
    }
    if (best == static_cast<std::size_t>(ds.labels[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

// Closed-form minimizer of the mean-quadratic objective.
inline Vector dataset_mean(const Dataset& ds) {
  Vector mean(ds.dim, 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto x = ds.row(i);
    for (std::size_t j = 0; j < ds.dim; ++j) mean[j] += x[j];
  }
  for (auto& v : mean) v /= static_cast<double>(ds.size());
  return mean;
}

// Gaussian clusters (unit variance) whose centers sit on a circle of radius
// `separation` in the first two coordinates. Labels cycle 0..classes-1 so the
// classes are balanced.
inline Dataset synthetic_blobs(std::uint64_t seed, std::size_t m, std::size_t dim, std::size_t classes,
                               double separation) {
  if (classes < 2) throw ValidationError("synthetic_blobs: classes must be >= 2");
  if (m < classes) throw ValidationError("synthetic_blobs: need m >= classes");
  if (dim == 0) throw ValidationError("synthetic_blobs: dim must be >= 1");
  Dataset ds;
  ds.dim = dim;
  ds.classes = classes;
  ds.features.resize(m * dim);
  ds.labels.resize(m);
  auto rng = make_rng(seed, StreamTag::kData);
  constexpr double kTwoPi = 6.283185307179586;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t k = i % classes;
    ds.labels[i] = static_cast<int>(k);
    const double angle = kTwoPi * static_cast<double>(k) / static_cast<double>(classes);
    for (std::size_t j = 0; j < dim; ++j) {
      double center = 0.0;
      if (j == 0) center = separation * std::cos(angle);
      if (j == 1) center = separation * std::sin(angle);
      ds.features[i * dim + j] = center + standard_normal(rng);
    }
  }
  return ds;
}

// Unlabeled isotropic Gaussian cloud for the mean-quadratic objective.
inline Dataset synthetic_cloud(std::uint64_t seed, std::size_t m, const Vector& center, double sigma) {
  if (m == 0 || center.empty()) throw ValidationError("synthetic_cloud: need m >= 1 and dim >= 1");
  Dataset ds;
  ds.dim = center.size();
  ds.features.resize(m * ds.dim);
  auto rng = make_rng(seed, StreamTag::kData);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < ds.dim; ++j)
      ds.features[i * ds.dim + j] = center[j] + sigma * standard_normal(rng);
  return ds;
}

// ---------------------------------------------------------------------------
// Partitions: which sample indices node c draws from (D_c).
// ---------------------------------------------------------------------------

enum class PartitionKind {
  kIid,        // every node samples the whole dataset
  kShard,      // disjoint random shards
  kLabelSkew,  // disjoint shards after sorting by label
};

using Partition = std::vector<std::vector<std::size_t>>;

inline Partition make_partition(PartitionKind kind, const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("partition: need at least one node");
  const std::size_t m = ds.size();
  std::vector<std::size_t> all(m);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (kind == PartitionKind::kIid) return Partition(n, all);
  if (m < n) throw ValidationError("partition: fewer samples than nodes");
  auto rng = make_rng(seed, StreamTag::kData, 1);
  for (std::size_t i = m; i > 1; --i) std::swap(all[i - 1], all[uniform_index(rng, i)]);
  if (kind == PartitionKind::kLabelSkew) {
    if (!ds.labeled()) throw ValidationError("label-skew partition needs labels");
    std::stable_sort(all.begin(), all.end(),
                     [&](std::size_t a, std::size_t b) { return ds.labels[a] < ds.labels[b]; });
  }
  Partition out(n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t lo = c * m / n;
    const std::size_t hi = (c + 1) * m / n;
    out[c].assign(all.begin() + static_cast<std::ptrdiff_t>(lo), all.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return out;
}

}  // namespace aetsgd
