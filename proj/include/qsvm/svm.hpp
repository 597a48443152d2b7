#pragma once

// Binary soft-margin kernel SVM trained on the dual
//
//   max  sum_k l_k - 1/2 sum_ij l_i l_j y_i y_j K(x_i, x_j)
//   s.t. sum_k l_k y_k = 0,  0 <= l_k <= C
//
// with sequential minimal optimization (maximal violating pair selection).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qsvm/error.hpp"
#include "qsvm/strings.hpp"

namespace qsvm {

enum class KernelKind { Rbf, Polynomial, Sigmoid, Linear };

struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  double rbf_sigma = 1.0;
  double poly_c = 0.0;
  int poly_d = 2;
  double sig_k = 1.0;
  double sig_v = 0.0;

  static KernelSpec rbf(double sigma) {
    KernelSpec s;
    s.kind = KernelKind::Rbf;
    s.rbf_sigma = sigma;
    return s;
  }
  static KernelSpec polynomial(double c, int d) {
    KernelSpec s;
    s.kind = KernelKind::Polynomial;
    s.poly_c = c;
    s.poly_d = d;
    return s;
  }
  static KernelSpec sigmoid(double k, double v) {
    KernelSpec s;
    s.kind = KernelKind::Sigmoid;
    s.sig_k = k;
    s.sig_v = v;
    return s;
  }
  static KernelSpec linear() {
    KernelSpec s;
    s.kind = KernelKind::Linear;
    return s;
  }

  void validate() const {
    if (kind == KernelKind::Rbf && !(rbf_sigma > 0.0 && std::isfinite(rbf_sigma)))
      throw InvalidArgumentError("RBF kernel requires sigma > 0");
    if (kind == KernelKind::Polynomial && poly_d < 1)
      throw InvalidArgumentError("polynomial kernel requires degree >= 1");
  }
};

inline const char* kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::Rbf: return "rbf";
    case KernelKind::Polynomial: return "polynomial";
    case KernelKind::Sigmoid: return "sigmoid";
    case KernelKind::Linear: return "linear";
  }
  return "?";
}

struct TrainConfig {
  double penalty_c = 1.0;
  double tolerance = 1e-3;
  // Iteration budget is max_passes * N pair updates; 0 selects 10 * N passes.
  long max_passes = 0;
  // Working-set selection is deterministic, so the seed only travels with
  // the config for bookkeeping.
  std::uint64_t seed = 0;
};

struct LabeledSample {
  std::vector<double> features;
  int label = 1;  // +1 or -1
};

struct SvmModel {
  std::vector<std::vector<double>> support_vectors;
  std::vector<int> support_labels;
  std::vector<double> multipliers;
  double bias = 0.0;
  KernelSpec kernel;
  double penalty_c = 1.0;
  // Dual objective at the solution, over all multipliers (not only retained).
  double objective = 0.0;
  long iterations = 0;

  std::size_t dimension() const { return support_vectors.empty() ? 0 : support_vectors[0].size(); }
};

namespace detail {

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

inline double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DimensionMismatchError("kernel_eval: dimensions " + std::to_string(x.size()) + " and " +
                                 std::to_string(y.size()));
  switch (spec.kind) {
    case KernelKind::Rbf:
      return std::exp(-detail::squared_distance(x, y) / (spec.rbf_sigma * spec.rbf_sigma));
    case KernelKind::Polynomial:
      return std::pow(detail::dot(x, y) + spec.poly_c, spec.poly_d);
    case KernelKind::Sigmoid:
      return std::tanh(spec.sig_k * detail::dot(x, y) + spec.sig_v);
    case KernelKind::Linear:
      return detail::dot(x, y);
  }
  return 0.0;
}

// Sum_k l_k y_k K(sv_k, x) + b.
inline double decision_value(const SvmModel& model, std::span<const double> x) {
  if (!model.support_vectors.empty() && x.size() != model.dimension())
    throw DimensionMismatchError("decision_value: model dimension " +
                                 std::to_string(model.dimension()) + ", input " +
                                 std::to_string(x.size()));
  double f = model.bias;
  for (std::size_t k = 0; k < model.support_vectors.size(); ++k)
    f += model.multipliers[k] * model.support_labels[k] *
         kernel_eval(model.kernel, model.support_vectors[k], x);
  return f;
}

// Ties (decision value exactly 0) go to +1.
inline int predict(const SvmModel& model, std::span<const double> x) {
  return decision_value(model, x) >= 0.0 ? +1 : -1;
}

// Dual objective for an arbitrary multiplier vector over `data`.
inline double dual_objective(std::span<const LabeledSample> data, const KernelSpec& kernel,
                             std::span<const double> lambda) {
  double linear = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    linear += lambda[i];
    if (lambda[i] == 0.0) continue;
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (lambda[j] == 0.0) continue;
      quad += lambda[i] * lambda[j] * data[i].label * data[j].label *
              kernel_eval(kernel, data[i].features, data[j].features);
    }
  }
  return linear - 0.5 * quad;
}

struct TrainResult {
  SvmModel model;
  std::vector<double> lambda;  // one per training sample, in input order
};

namespace detail {

inline void validate_training_data(std::span<const LabeledSample> data) {
  if (data.empty()) throw EmptyDataError("train: no samples");
  const std::size_t dim = data[0].features.size();
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    if (s.features.size() != dim)
      throw DimensionMismatchError("train: sample " + std::to_string(i) + " has dimension " +
                                   std::to_string(s.features.size()) + ", expected " +
                                   std::to_string(dim));
    if (s.label == 1)
      pos = true;
    else if (s.label == -1)
      neg = true;
    else
      throw InvalidArgumentError("train: sample " + std::to_string(i) + " has label " +
                                 std::to_string(s.label) + "; labels must be +1 or -1");
    for (double v : s.features)
      if (!std::isfinite(v))
        throw InvalidArgumentError("train: sample " + std::to_string(i) + " has a non-finite feature");
  }
  if (!pos || !neg) throw SingleClassError("train: both classes (+1 and -1) must be present");
}

}  // namespace detail

// Trains and also returns the full multiplier vector (useful for KKT audits
// and objective checks). `train` below returns just the model.
inline TrainResult train_full(std::span<const LabeledSample> data, const KernelSpec& kernel,
                              const TrainConfig& config) {
  kernel.validate();
  if (!(config.penalty_c > 0.0)) throw InvalidArgumentError("train: penalty C must be > 0");
  if (!(config.tolerance > 0.0)) throw InvalidArgumentError("train: tolerance must be > 0");
  detail::validate_training_data(data);

  const std::size_t n = data.size();
  const double c = config.penalty_c;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = data[i].label;

  std::vector<double> gram(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      gram[i * n + j] = gram[j * n + i] = kernel_eval(kernel, data[i].features, data[j].features);
  auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * gram[i * n + j]; };

  // Gradient of 1/2 a'Qa - e'a.
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);

  auto in_up = [&](std::size_t t) { return y[t] > 0 ? alpha[t] < c : alpha[t] > 0; };
  auto in_low = [&](std::size_t t) { return y[t] > 0 ? alpha[t] > 0 : alpha[t] < c; };

  const long passes = config.max_passes > 0 ? config.max_passes : 10 * static_cast<long>(n);
  const long budget = passes * static_cast<long>(n);
  constexpr double kTau = 1e-12;

  long iter = 0;
  double gap = 0.0;
  for (;; ++iter) {
    std::size_t i = n, j = n;
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    gap = gmax - gmin;
    if (i == n || j == n || gap <= config.tolerance) break;
    if (iter >= budget) {
      std::ostringstream msg;
      msg << "train: SMO did not converge after " << iter << " iterations (" << passes
          << " passes over " << n << " samples); KKT gap " << gap << " > tolerance "
          << config.tolerance << ", C=" << c;
      throw NonConvergenceError(msg.str(), iter, gap);
    }

    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else {
        if (alpha[i] < 0) {
          alpha[i] = 0;
          alpha[j] = -diff;
        }
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = c + diff;
        }
      }
    } else {
      double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = sum;
        }
        if (alpha[i] < 0) {
          alpha[i] = 0;
          alpha[j] = sum;
        }
      }
    }
    alpha[i] = std::clamp(alpha[i], 0.0, c);
    alpha[j] = std::clamp(alpha[j], 0.0, c);

    const double di = alpha[i] - old_ai;
    const double dj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) grad[t] += q(t, i) * di + q(t, j) * dj;
  }

  // Bias: average over free multipliers, else midpoint of the feasible interval.
  double bias = 0.0;
  {
    double sum = 0.0;
    std::size_t free_count = 0;
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double yg = y[t] * grad[t];
      if (alpha[t] >= c) {
        if (y[t] < 0)
          ub = std::min(ub, yg);
        else
          lb = std::max(lb, yg);
      } else if (alpha[t] <= 0) {
        if (y[t] > 0)
          ub = std::min(ub, yg);
        else
          lb = std::max(lb, yg);
      } else {
        ++free_count;
        sum += yg;
      }
    }
    const double rho = free_count > 0 ? sum / static_cast<double>(free_count) : (ub + lb) / 2.0;
    bias = -rho;
  }

  TrainResult result;
  auto& model = result.model;
  model.kernel = kernel;
  model.penalty_c = c;
  model.bias = bias;
  model.iterations = iter;
  // Qa = grad + e.
  {
    double lin = 0.0;
    for (double a : alpha) lin += a;
    double aqa = 0.0;
    for (std::size_t t = 0; t < n; ++t) aqa += alpha[t] * (grad[t] + 1.0);
    model.objective = lin - 0.5 * aqa;
  }
  const double threshold = 1e-8 * c;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > threshold) {
      model.support_vectors.push_back(data[t].features);
      model.support_labels.push_back(data[t].label);
      model.multipliers.push_back(alpha[t]);
    }
  }
  result.lambda = std::move(alpha);
  return result;
}

inline SvmModel train(std::span<const LabeledSample> data, const KernelSpec& kernel,
                      const TrainConfig& config) {
  return train_full(data, kernel, config).model;
}

enum class KktCase { Zero, Free, Bound, OutOfBox };

struct KktViolation {
  std::size_t index;
  double lambda;
  double margin;  // y * f(x)
  KktCase kind;
};

struct KktReport {
  std::vector<KktViolation> violations;
  double equality_residual = 0.0;  // |sum l_k y_k| over the model's multipliers

  bool ok(double tolerance) const { return violations.empty() && equality_residual <= tolerance; }
};

// Matches samples to support vectors by exact feature equality and label.
inline KktReport check_kkt(const SvmModel& model, std::span<const LabeledSample> data, double tolerance) {
  KktReport report;
  double residual = 0.0;
  for (std::size_t k = 0; k < model.multipliers.size(); ++k)
    residual += model.multipliers[k] * model.support_labels[k];
  report.equality_residual = std::abs(residual);

  std::vector<bool> used(model.support_vectors.size(), false);
  const double c = model.penalty_c;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double lambda = 0.0;
    for (std::size_t k = 0; k < model.support_vectors.size(); ++k) {
      if (!used[k] && model.support_labels[k] == data[i].label &&
          model.support_vectors[k] == data[i].features) {
        used[k] = true;
        lambda = model.multipliers[k];
        break;
      }
    }
    const double margin = data[i].label * decision_value(model, data[i].features);
    if (lambda < 0.0 || lambda > c) {
      report.violations.push_back({i, lambda, margin, KktCase::OutOfBox});
    } else if (lambda == 0.0) {
      if (margin < 1.0 - tolerance) report.violations.push_back({i, lambda, margin, KktCase::Zero});
    } else if (lambda >= c) {
      if (margin > 1.0 + tolerance) report.violations.push_back({i, lambda, margin, KktCase::Bound});
    } else if (std::abs(margin - 1.0) > tolerance) {
      report.violations.push_back({i, lambda, margin, KktCase::Free});
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Plain-text model format, version 1:
//
//   qsvm-model 1
//   kernel rbf <sigma> | polynomial <c> <d> | sigmoid <k> <v> | linear
//   penalty_c <C>
//   bias <b>
//   dimension <d>
//   support_vectors <n>
//   <lambda> <y> <x_1> ... <x_d>        (n lines)
//
// Reals are written in shortest round-trip form.

inline void write_model(std::ostream& os, const SvmModel& m) {
  os << "qsvm-model 1\n";
  os << "kernel " << kernel_kind_name(m.kernel.kind);
  switch (m.kernel.kind) {
    case KernelKind::Rbf: os << ' ' << format_double(m.kernel.rbf_sigma); break;
    case KernelKind::Polynomial:
      os << ' ' << format_double(m.kernel.poly_c) << ' ' << m.kernel.poly_d;
      break;
    case KernelKind::Sigmoid:
      os << ' ' << format_double(m.kernel.sig_k) << ' ' << format_double(m.kernel.sig_v);
      break;
    case KernelKind::Linear: break;
  }
  os << "\npenalty_c " << format_double(m.penalty_c) << "\nbias " << format_double(m.bias)
     << "\ndimension " << m.dimension() << "\nsupport_vectors " << m.support_vectors.size() << '\n';
  for (std::size_t k = 0; k < m.support_vectors.size(); ++k) {
    os << format_double(m.multipliers[k]) << ' ' << m.support_labels[k];
    for (double v : m.support_vectors[k]) os << ' ' << format_double(v);
    os << '\n';
  }
}

inline SvmModel read_model(std::istream& is, const std::string& source = "<model>") {
  SvmModel m;
  std::string line;
  std::size_t lineno = 0;
  auto next = [&](const char* what) -> std::istringstream {
    if (!std::getline(is, line)) throw ParseError(source, lineno + 1, std::string("missing ") + what);
    ++lineno;
    return std::istringstream(line);
  };
  auto expect_key = [&](std::istringstream& ss, const char* key) {
    std::string k;
    ss >> k;
    if (k != key) throw ParseError(source, lineno, std::string("expected '") + key + "'");
  };
  {
    auto ss = next("header");
    std::string magic;
    int version = 0;
    ss >> magic >> version;
    if (magic != "qsvm-model" || version != 1)
      throw ParseError(source, lineno, "not a version-1 qsvm model");
  }
  {
    auto ss = next("kernel line");
    expect_key(ss, "kernel");
    std::string kind;
    ss >> kind;
    if (kind == "rbf") {
      m.kernel = KernelSpec::rbf(0);
      ss >> m.kernel.rbf_sigma;
    } else if (kind == "polynomial") {
      m.kernel = KernelSpec::polynomial(0, 1);
      ss >> m.kernel.poly_c >> m.kernel.poly_d;
    } else if (kind == "sigmoid") {
      m.kernel = KernelSpec::sigmoid(0, 0);
      ss >> m.kernel.sig_k >> m.kernel.sig_v;
    } else if (kind == "linear") {
      m.kernel = KernelSpec::linear();
    } else {
      throw ParseError(source, lineno, "unknown kernel '" + kind + "'");
    }
    if (ss.fail()) throw ParseError(source, lineno, "bad kernel parameters");
  }
  std::size_t dim = 0, count = 0;
  {
    auto ss = next("penalty_c");
    expect_key(ss, "penalty_c");
    ss >> m.penalty_c;
    auto sb = next("bias");
    expect_key(sb, "bias");
    sb >> m.bias;
    auto sd = next("dimension");
    expect_key(sd, "dimension");
    sd >> dim;
    auto sn = next("support_vectors");
    expect_key(sn, "support_vectors");
    sn >> count;
    if (ss.fail() || sb.fail() || sd.fail() || sn.fail())
      throw ParseError(source, lineno, "bad model header value");
  }
  for (std::size_t k = 0; k < count; ++k) {
    auto ss = next("support vector");
    double lambda;
    int label;
    std::vector<double> x(dim);
    ss >> lambda >> label;
    for (auto& v : x) ss >> v;
    if (ss.fail()) throw ParseError(source, lineno, "malformed support vector line");
    m.multipliers.push_back(lambda);
    m.support_labels.push_back(label);
    m.support_vectors.push_back(std::move(x));
  }
  return m;
}

}  // namespace qsvm
