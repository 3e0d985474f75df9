#pragma once

// Independent reference implementations used as test oracles. They follow the
// textbook definitions directly and share no code with the library beyond its
// plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vstack/core.hpp"
#include "vstack/learners.hpp"
#include "vstack/random.hpp"

namespace oracle {

using vstack::Dataset;
using vstack::LabeledSample;

inline std::size_t first_max(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

/// Plain Adam on a scalar, written straight from the update equations.
struct ScalarAdam {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double m = 0.0;
  double v = 0.0;
  int t = 0;

  double step(double param, double grad) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    const double mhat = m / (1.0 - std::pow(beta1, t));
    const double vhat = v / (1.0 - std::pow(beta2, t));
    return param - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

/// Summed cross-entropy of a c x (d+1) weight matrix, computed naively.
inline double naive_loss(const std::vector<double>& w, std::size_t c, const Dataset& data) {
  const std::size_t d = data.feature_dim();
  double loss = 0.0;
  for (const auto& s : data.samples()) {
    std::vector<double> z(c, 0.0);
    for (std::size_t r = 0; r < c; ++r) {
      for (std::size_t j = 0; j < d; ++j) z[r] += w[r * (d + 1) + j] * s.features[j];
      z[r] += w[r * (d + 1) + d];
    }
    const double peak = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double x : z) total += std::exp(x - peak);
    loss += peak + std::log(total) - z[s.label];
  }
  return loss;
}

/// Central differences of naive_loss with step h.
inline std::vector<double> central_difference(const std::vector<double>& w, std::size_t c, const Dataset& data,
                                              double h) {
  std::vector<double> g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto plus = w;
    auto minus = w;
    plus[i] += h;
    minus[i] -= h;
    g[i] = (naive_loss(plus, c, data) - naive_loss(minus, c, data)) / (2.0 * h);
  }
  return g;
}

/// Seeded Gaussian features with labels i % c, ids "x00".."xNN".
inline Dataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t c, std::size_t d, double spread = 1.0,
                              const std::string& prefix = "x") {
  vstack::Rng rng(seed);
  std::vector<std::vector<double>> centers(c, std::vector<double>(d));
  for (auto& ctr : centers) {
    for (auto& x : ctr) x = 2.0 * rng.normal();
  }
  std::vector<LabeledSample> rows;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSample s;
    s.id = prefix + (i < 10 ? "0" : "") + std::to_string(i);
    s.label = i % c;
    for (std::size_t j = 0; j < d; ++j) s.features.push_back(centers[s.label][j] + spread * rng.normal());
    rows.push_back(std::move(s));
  }
  return Dataset(std::move(rows), c, d);
}

// Brute-force two-level stacking ---------------------------------------------------

struct Learner {
  vstack::LearnerKind kind;
  std::size_t neighbors = 1;
  double floor = 1e-9;
};

struct Fitted {
  Learner spec;
  std::size_t c = 0;
  std::vector<LabeledSample> rows;   // knn memory
  std::vector<double> prior;         // gnb
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> var;
};

inline Fitted fit(const Learner& spec, const std::vector<LabeledSample>& rows, std::size_t c) {
  Fitted f{spec, c, rows, {}, {}, {}};
  if (spec.kind == vstack::LearnerKind::Knn) {
    f.spec.neighbors = std::min(spec.neighbors, rows.size());
    return f;
  }
  const std::size_t d = rows.front().features.size();
  f.prior.assign(c, 0.0);
  f.mean.assign(c, std::vector<double>(d, 0.0));
  f.var.assign(c, std::vector<double>(d, 0.0));
  std::vector<double> n(c, 0.0);
  for (const auto& s : rows) n[s.label] += 1.0;
  for (std::size_t r = 0; r < c; ++r) f.prior[r] = n[r] / static_cast<double>(rows.size());
  // Two-pass: class means, then variances around them.
  for (std::size_t r = 0; r < c; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      double sum = 0.0;
      double sq = 0.0;
      for (const auto& s : rows) {
        if (s.label == r) sum += s.features[j];
      }
      const double mu = n[r] > 0 ? sum / n[r] : 0.0;
      f.mean[r][j] = mu;
      for (const auto& s : rows) {
        if (s.label == r) sq += (s.features[j] - mu) * (s.features[j] - mu);
      }
      f.var[r][j] = std::max(n[r] > 0 ? sq / n[r] : 0.0, spec.floor);
    }
  }
  return f;
}

inline std::vector<double> predict(const Fitted& f, const std::vector<double>& x) {
  std::vector<double> out(f.c, 0.0);
  if (f.spec.kind == vstack::LearnerKind::Knn) {
    std::vector<std::pair<double, const LabeledSample*>> order;
    for (const auto& s : f.rows) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) d2 += (s.features[j] - x[j]) * (s.features[j] - x[j]);
      order.emplace_back(d2, &s);
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : a.second->id < b.second->id;
    });
    for (std::size_t i = 0; i < f.spec.neighbors; ++i) out[order[i].second->label] += 1.0;
    for (auto& v : out) v /= static_cast<double>(f.spec.neighbors);
    return out;
  }
  const double pi = std::acos(-1.0);
  std::vector<double> lp(f.c, -INFINITY);
  for (std::size_t r = 0; r < f.c; ++r) {
    if (f.prior[r] == 0.0) continue;
    lp[r] = std::log(f.prior[r]);
    for (std::size_t j = 0; j < x.size(); ++j) {
      lp[r] += -0.5 * std::log(2.0 * pi * f.var[r][j]) - (x[j] - f.mean[r][j]) * (x[j] - f.mean[r][j]) / (2.0 * f.var[r][j]);
    }
  }
  const double peak = *std::max_element(lp.begin(), lp.end());
  double total = 0.0;
  for (std::size_t r = 0; r < f.c; ++r) {
    out[r] = std::isinf(lp[r]) ? 0.0 : std::exp(lp[r] - peak);
    total += out[r];
  }
  for (auto& v : out) v /= total;
  return out;
}

/// Plain stacking: fit every base learner on D, build D' from their outputs on
/// every training sample, fit the meta learner on D', and compose.
struct StackingOracle {
  std::vector<Fitted> base;
  Fitted meta;

  StackingOracle(const Dataset& train, const std::vector<Learner>& bases, const Learner& meta_spec) {
    const auto& rows = train.samples();
    for (const auto& b : bases) base.push_back(fit(b, rows, train.class_count()));
    std::vector<LabeledSample> lifted;
    for (const auto& s : rows) lifted.push_back({s.id, lift(s.features), s.label});
    meta = fit(meta_spec, lifted, train.class_count());
  }

  std::vector<double> lift(const std::vector<double>& x) const {
    std::vector<double> z;
    for (const auto& b : base) {
      const auto p = predict(b, x);
      z.insert(z.end(), p.begin(), p.end());
    }
    return z;
  }

  std::size_t classify(const std::vector<double>& x) const { return first_max(predict(meta, lift(x))); }
};

}  // namespace oracle
