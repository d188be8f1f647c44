#pragma once

// Binary nu-SVM classifier: kernels, a two-variable working-set solver for
// the nu-SVC dual, the averaged bias and sign prediction.
//
// The solver works on the nu-parameterized dual
//
//   min_a  1/2 a'Qa   s.t.  0 <= a_i <= 1,  y'a = 0,  e'a = nu * n
//
// with Q_ij = y_i y_j K(x_i, x_j). Dividing the solution by the margin
// estimate r gives the C-SVM dual solution with C = 1/r, which is what the
// model stores (alpha_i in [0, C], lambda_i = y_i alpha_i).

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cellguard/error.hpp"
#include "cellguard/text.hpp"

namespace cellguard::svm {

enum class KernelKind { Linear, Polynomial, Rbf, Sigmoid };

inline std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Polynomial: return "polynomial";
    case KernelKind::Rbf: return "rbf";
    case KernelKind::Sigmoid: return "sigmoid";
  }
  return "?";
}

inline KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "linear") return KernelKind::Linear;
  if (name == "polynomial" || name == "poly") return KernelKind::Polynomial;
  if (name == "rbf") return KernelKind::Rbf;
  if (name == "sigmoid") return KernelKind::Sigmoid;
  throw InvalidInput("unknown kernel '" + std::string(name) + "'");
}

struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  double gamma = 1.0;
  double coef0 = 0.0;
  double degree = 3.0;  // real-valued; tuned polynomials use fractional degrees

  bool uses_gamma() const noexcept { return kind != KernelKind::Linear; }
  bool uses_coef0() const noexcept { return kind == KernelKind::Polynomial || kind == KernelKind::Sigmoid; }
  bool uses_degree() const noexcept { return kind == KernelKind::Polynomial; }

  void validate() const {
    if (uses_gamma() && !(gamma > 0.0)) throw InvalidInput("kernel gamma must be positive");
    if (!std::isfinite(coef0) || !std::isfinite(degree)) throw InvalidInput("kernel parameters must be finite");
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double kernel_eval(const KernelSpec& spec, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("kernel operands differ in dimension");
  double v = 0.0;
  switch (spec.kind) {
    case KernelKind::Linear:
      v = dot(a, b);
      break;
    case KernelKind::Polynomial:
      v = std::pow(spec.gamma * dot(a, b) + spec.coef0, spec.degree);
      break;
    case KernelKind::Rbf: {
      double dist2 = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) dist2 += (a[i] - b[i]) * (a[i] - b[i]);
      v = std::exp(-spec.gamma * dist2);
      break;
    }
    case KernelKind::Sigmoid:
      v = std::tanh(spec.gamma * dot(a, b) + spec.coef0);
      break;
  }
  if (!std::isfinite(v)) throw KernelDomainError("kernel value is not finite");
  return v;
}

struct LabeledPoint {
  std::vector<double> x;
  int y = 1;  // -1 or +1
};

using TrainingSet = std::vector<LabeledPoint>;

// Per-dimension min-max scaling onto [0, 1]; constant dimensions map to 0.
struct MinMaxScaler {
  std::vector<double> lo;
  std::vector<double> hi;

  static MinMaxScaler fit(const TrainingSet& data) {
    MinMaxScaler s;
    const std::size_t d = data.front().x.size();
    s.lo.assign(d, std::numeric_limits<double>::infinity());
    s.hi.assign(d, -std::numeric_limits<double>::infinity());
    for (const auto& p : data) {
      for (std::size_t k = 0; k < d; ++k) {
        s.lo[k] = std::min(s.lo[k], p.x[k]);
        s.hi[k] = std::max(s.hi[k], p.x[k]);
      }
    }
    return s;
  }

  std::size_t dimension() const noexcept { return lo.size(); }

  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != lo.size()) throw InvalidInput("feature dimension does not match the model");
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double range = hi[k] - lo[k];
      out[k] = range > 0.0 ? (x[k] - lo[k]) / range : 0.0;
    }
    return out;
  }

  friend bool operator==(const MinMaxScaler&, const MinMaxScaler&) = default;
};

struct SvmModel {
  KernelSpec kernel;
  double nu = 0.5;
  double c_eff = 1.0;  // box bound of the equivalent C-SVM dual
  MinMaxScaler scaler;
  std::vector<std::vector<double>> support_vectors;  // in scaled coordinates
  std::vector<double> lambdas;                       // y_i * alpha_i
  double bias = 0.0;

  std::size_t dimension() const noexcept { return scaler.dimension(); }

  double decision_value(std::span<const double> x) const {
    const std::vector<double> z = scaler.apply(x);
    double sum = bias;
    for (std::size_t i = 0; i < support_vectors.size(); ++i) {
      sum += lambdas[i] * kernel_eval(kernel, z, support_vectors[i]);
    }
    return sum;
  }

  // -1, 0 or +1.
  int predict(std::span<const double> x) const {
    const double v = decision_value(x);
    return (v > 0.0) - (v < 0.0);
  }

  friend bool operator==(const SvmModel&, const SvmModel&) = default;
};

struct TrainOptions {
  double tolerance = 1e-3;                  // stop when the maximal KKT violation drops below this
  long long max_iterations = 10'000'000;    // two-variable updates
  double support_threshold = 1e-8;          // alpha above this marks a support vector
};

struct TrainResult {
  SvmModel model;
  std::vector<std::vector<double>> scaled_points;  // training inputs after scaling
  std::vector<int> labels;
  std::vector<double> nu_alpha;  // solution of the nu-parameterized dual, in [0, 1]
  std::vector<double> alpha;     // nu_alpha / r, the C-SVM dual variables
  double margin_r = 0.0;         // r; c_eff == 1 / r
  double kkt_bias = 0.0;         // -rho / r, the bias implied by the KKT conditions
  double kkt_violation = 0.0;     // final maximal violation, in the larger of the nu and C-SVM units
  long long iterations = 0;
};

// 1/2 a'Qa for the nu dual.
inline double nu_dual_objective(std::span<const double> q, std::span<const double> a) {
  const std::size_t n = a.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) s += a[i] * a[j] * q[i * n + j];
  }
  return 0.5 * s;
}

// W(a) = sum a_i - 1/2 sum a_i a_j y_i y_j K_ij, with q holding y_i y_j K_ij.
inline double svm_dual_objective(std::span<const double> q, std::span<const double> a) {
  double linear = 0.0;
  for (double v : a) linear += v;
  return linear - nu_dual_objective(q, a);
}

// Q_ij = y_i y_j K(x_i, x_j), row-major.
inline std::vector<double> signed_kernel_matrix(const KernelSpec& spec, const std::vector<std::vector<double>>& points,
                                                std::span<const int> labels) {
  const std::size_t n = points.size();
  std::vector<double> q(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = labels[i] * labels[j] * kernel_eval(spec, points[i], points[j]);
      q[i * n + j] = v;
      q[j * n + i] = v;
    }
  }
  return q;
}

// Average over the support vectors x_j of y_j - sum_i y_i alpha_i K(x_i, x_j).
inline double compute_bias(const KernelSpec& spec, const std::vector<std::vector<double>>& points,
                           std::span<const int> labels, std::span<const double> alpha, double support_threshold = 1e-8) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (alpha[j] <= support_threshold) continue;
    double f = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (alpha[i] > support_threshold) f += labels[i] * alpha[i] * kernel_eval(spec, points[i], points[j]);
    }
    sum += labels[j] - f;
    ++count;
  }
  if (count == 0) throw DegenerateModel("model has no support vectors");
  return sum / static_cast<double>(count);
}

namespace detail {

// Same average as compute_bias, reading K from the signed matrix.
inline double bias_from_matrix(std::span<const double> q, std::span<const int> labels, std::span<const double> alpha,
                               double support_threshold) {
  const std::size_t n = labels.size();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (alpha[j] <= support_threshold) continue;
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (alpha[i] > support_threshold) f += alpha[i] * q[i * n + j];
    }
    sum += labels[j] - labels[j] * f;
    ++count;
  }
  if (count == 0) throw DegenerateModel("model has no support vectors");
  return sum / static_cast<double>(count);
}

struct NuSolution {
  std::vector<double> alpha;
  double r = 0.0;
  double rho = 0.0;
  double violation = 0.0;
  long long iterations = 0;
};

// Maximal-violating-pair working set with second-order selection of the
// partner, restricted to pairs from the same class so both equality
// constraints stay satisfied.
class NuSolver {
 public:
  NuSolver(std::span<const double> q, std::span<const int> y, double nu, const TrainOptions& opt)
      : n_(y.size()), q_(q), y_(y), opt_(opt), alpha_(n_, 0.0), grad_(n_, 0.0), diag_(n_) {
    for (std::size_t i = 0; i < n_; ++i) diag_[i] = q_[i * n_ + i];
    double pos = nu * static_cast<double>(n_) / 2.0;
    double neg = pos;
    for (std::size_t i = 0; i < n_; ++i) {
      double& budget = y_[i] > 0 ? pos : neg;
      alpha_[i] = std::min(1.0, budget);
      budget -= alpha_[i];
    }
    for (std::size_t i = 0; i < n_; ++i) {
      if (alpha_[i] == 0.0) continue;
      for (std::size_t k = 0; k < n_; ++k) grad_[k] += q_[i * n_ + k] * alpha_[i];
    }
  }

  // Runs until the maximal violation drops below `tolerance`; may be called
  // again with a smaller tolerance to continue from the current point.
  NuSolution solve(double tolerance) {
    NuSolution out;
    std::size_t i = 0, j = 0;
    double violation = 0.0;
    while (!select_working_set(i, j, violation, tolerance)) {
      if (iterations_ >= opt_.max_iterations) {
        throw ConvergenceError("nu-SVM solver hit its iteration cap", violation);
      }
      update_pair(i, j);
      ++iterations_;
    }
    out.violation = violation;
    out.iterations = iterations_;
    compute_rho(out);
    out.alpha = alpha_;
    return out;
  }

 private:
  static constexpr double kTau = 1e-12;
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  bool at_upper(std::size_t t) const { return alpha_[t] >= 1.0; }
  bool at_lower(std::size_t t) const { return alpha_[t] <= 0.0; }
  double qv(std::size_t a, std::size_t b) const { return q_[a * n_ + b]; }

  // Returns true when optimal within tolerance.
  bool select_working_set(std::size_t& out_i, std::size_t& out_j, double& violation, double tolerance) const {
    double gmax_p = -kInf, gmax_p2 = -kInf, gmax_n = -kInf, gmax_n2 = -kInf;
    std::ptrdiff_t ip = -1, in = -1, jmin = -1;
    double best_obj = kInf;

    for (std::size_t t = 0; t < n_; ++t) {
      if (y_[t] > 0) {
        if (!at_upper(t) && -grad_[t] >= gmax_p) {
          gmax_p = -grad_[t];
          ip = static_cast<std::ptrdiff_t>(t);
        }
      } else if (!at_lower(t) && grad_[t] >= gmax_n) {
        gmax_n = grad_[t];
        in = static_cast<std::ptrdiff_t>(t);
      }
    }

    for (std::size_t t = 0; t < n_; ++t) {
      if (y_[t] > 0) {
        if (at_lower(t)) continue;
        gmax_p2 = std::max(gmax_p2, grad_[t]);
        const double diff = gmax_p + grad_[t];
        if (ip >= 0 && diff > 0.0) {
          double quad = diag_[ip] + diag_[t] - 2.0 * qv(ip, t);
          if (quad <= 0.0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best_obj) {
            best_obj = obj;
            jmin = static_cast<std::ptrdiff_t>(t);
          }
        }
      } else {
        if (at_upper(t)) continue;
        gmax_n2 = std::max(gmax_n2, -grad_[t]);
        const double diff = gmax_n - grad_[t];
        if (in >= 0 && diff > 0.0) {
          double quad = diag_[in] + diag_[t] - 2.0 * qv(in, t);
          if (quad <= 0.0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best_obj) {
            best_obj = obj;
            jmin = static_cast<std::ptrdiff_t>(t);
          }
        }
      }
    }

    violation = std::max({gmax_p + gmax_p2, gmax_n + gmax_n2, 0.0});
    if (violation < tolerance || jmin < 0) return true;
    out_i = static_cast<std::size_t>(y_[jmin] > 0 ? ip : in);
    out_j = static_cast<std::size_t>(jmin);
    return false;
  }

  void update_pair(std::size_t i, std::size_t j) {
    const double old_i = alpha_[i];
    const double old_j = alpha_[j];
    double quad = diag_[i] + diag_[j] - 2.0 * qv(i, j);
    if (quad <= 0.0) quad = kTau;
    const double delta = (grad_[i] - grad_[j]) / quad;
    const double sum = old_i + old_j;
    double ai = old_i - delta;
    double aj = old_j + delta;
    if (sum > 1.0) {
      if (ai > 1.0) { ai = 1.0; aj = sum - 1.0; }
    } else if (aj < 0.0) {
      aj = 0.0; ai = sum;
    }
    if (sum > 1.0) {
      if (aj > 1.0) { aj = 1.0; ai = sum - 1.0; }
    } else if (ai < 0.0) {
      ai = 0.0; aj = sum;
    }
    alpha_[i] = ai;
    alpha_[j] = aj;
    const double di = ai - old_i;
    const double dj = aj - old_j;
    const double* row_i = q_.data() + i * n_;
    const double* row_j = q_.data() + j * n_;
    for (std::size_t k = 0; k < n_; ++k) grad_[k] += row_i[k] * di + row_j[k] * dj;
  }

  // Margin estimate per class: mean gradient over free variables, otherwise
  // the midpoint of the feasible interval.
  void compute_rho(NuSolution& out) const {
    auto class_level = [&](int label) {
      double ub = kInf, lb = -kInf, sum_free = 0.0;
      std::size_t free = 0;
      for (std::size_t t = 0; t < n_; ++t) {
        if (y_[t] != label) continue;
        if (at_upper(t)) {
          lb = std::max(lb, grad_[t]);
        } else if (at_lower(t)) {
          ub = std::min(ub, grad_[t]);
        } else {
          ++free;
          sum_free += grad_[t];
        }
      }
      if (free > 0) return sum_free / static_cast<double>(free);
      if (!std::isfinite(ub)) return lb;
      if (!std::isfinite(lb)) return ub;
      return (ub + lb) / 2.0;
    };
    const double r_pos = class_level(+1);
    const double r_neg = class_level(-1);
    out.r = (r_pos + r_neg) / 2.0;
    out.rho = (r_pos - r_neg) / 2.0;
  }

  std::size_t n_;
  std::span<const double> q_;
  std::span<const int> y_;
  TrainOptions opt_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
  std::vector<double> diag_;
  long long iterations_ = 0;
};

}  // namespace detail

// Margins at or below this are treated as w = 0 (no separating direction).
inline constexpr double kMinMargin = 1e-9;

// Largest nu the class balance admits: 2 * min(n+, n-) / n.
inline double max_feasible_nu(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int y : labels) pos += y > 0 ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  return 2.0 * static_cast<double>(std::min(pos, neg)) / static_cast<double>(labels.size());
}

inline TrainResult train_detailed(const TrainingSet& data, const KernelSpec& kernel, double nu,
                                  const TrainOptions& options = {}) {
  if (data.empty()) throw InvalidInput("training set is empty");
  kernel.validate();
  const std::size_t d = data.front().x.size();
  if (d == 0) throw InvalidInput("training points have no features");

  TrainResult result;
  result.labels.reserve(data.size());
  bool has_pos = false, has_neg = false;
  for (const auto& p : data) {
    if (p.x.size() != d) throw InvalidInput("training points differ in dimension");
    if (p.y != 1 && p.y != -1) throw InvalidInput("labels must be -1 or +1");
    for (double v : p.x) {
      if (!std::isfinite(v)) throw InvalidInput("training features must be finite");
    }
    (p.y > 0 ? has_pos : has_neg) = true;
    result.labels.push_back(p.y);
  }
  if (!has_pos || !has_neg) throw InvalidInput("training set needs both labels");
  if (!(nu > 0.0 && nu <= 1.0)) throw InfeasibleNu("nu must lie in (0, 1]");
  const double nu_max = max_feasible_nu(result.labels);
  if (nu > nu_max + 1e-12) {
    throw InfeasibleNu("nu " + text::format_double(nu) + " exceeds the feasible bound " +
                       text::format_double(nu_max) + " for this class balance");
  }

  SvmModel& model = result.model;
  model.kernel = kernel;
  model.nu = nu;
  model.scaler = MinMaxScaler::fit(data);
  result.scaled_points.reserve(data.size());
  for (const auto& p : data) result.scaled_points.push_back(model.scaler.apply(p.x));

  const std::vector<double> q = signed_kernel_matrix(kernel, result.scaled_points, result.labels);
  // The nu dual is solved in its own units, where a violation v is v / r in
  // the equivalent C-SVM dual. Tighten until both are below the tolerance.
  detail::NuSolver solver(q, result.labels, nu, options);
  double tolerance = options.tolerance;
  detail::NuSolution sol = solver.solve(tolerance);
  for (int round = 0; round < 64; ++round) {
    if (!std::isfinite(sol.r) || sol.r <= kMinMargin) break;
    if (sol.violation <= options.tolerance * std::min(1.0, sol.r)) break;
    tolerance = 0.5 * options.tolerance * sol.r;
    sol = solver.solve(tolerance);
  }
  if (!std::isfinite(sol.r) || sol.r <= kMinMargin) {
    throw DegenerateModel("solution has no positive margin (r = " + text::format_double(sol.r) + ")");
  }
  result.nu_alpha = std::move(sol.alpha);
  result.margin_r = sol.r;
  result.kkt_bias = -sol.rho / sol.r;
  result.kkt_violation = std::max(sol.violation, sol.violation / sol.r);
  result.iterations = sol.iterations;
  result.alpha.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) result.alpha[i] = result.nu_alpha[i] / sol.r;

  model.c_eff = 1.0 / sol.r;
  model.bias = detail::bias_from_matrix(q, result.labels, result.alpha, options.support_threshold);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (result.alpha[i] <= options.support_threshold) continue;
    model.support_vectors.push_back(result.scaled_points[i]);
    model.lambdas.push_back(result.labels[i] * result.alpha[i]);
  }
  return result;
}

inline SvmModel train(const TrainingSet& data, const KernelSpec& kernel, double nu, const TrainOptions& options = {}) {
  return train_detailed(data, kernel, nu, options).model;
}

// ---------------------------------------------------------------------------
// Flat text model format, one "key value..." record per line.

inline constexpr std::string_view kModelMagic = "cellguard-svm";
inline constexpr int kModelVersion = 1;

inline void save_model(std::ostream& out, const SvmModel& m) {
  using text::format_double;
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "kernel " << to_string(m.kernel.kind) << '\n';
  out << "gamma " << format_double(m.kernel.gamma) << '\n';
  out << "coef0 " << format_double(m.kernel.coef0) << '\n';
  out << "degree " << format_double(m.kernel.degree) << '\n';
  out << "nu " << format_double(m.nu) << '\n';
  out << "c_eff " << format_double(m.c_eff) << '\n';
  out << "dimension " << m.dimension() << '\n';
  out << "scale_min";
  for (double v : m.scaler.lo) out << ' ' << format_double(v);
  out << "\nscale_max";
  for (double v : m.scaler.hi) out << ' ' << format_double(v);
  out << "\nbias " << format_double(m.bias) << '\n';
  out << "support_vectors " << m.support_vectors.size() << '\n';
  for (std::size_t i = 0; i < m.support_vectors.size(); ++i) {
    out << format_double(m.lambdas[i]);
    for (double v : m.support_vectors[i]) out << ' ' << format_double(v);
    out << '\n';
  }
}

inline SvmModel load_model(std::istream& in) {
  std::string line;
  auto next_fields = [&](std::string_view key, std::size_t count) {
    if (!std::getline(in, line)) throw IoError("model file truncated before '" + std::string(key) + "'");
    auto fields = text::split(text::trim(line), ' ');
    if (fields.front() != key) throw IoError("model file: expected '" + std::string(key) + "', got '" + line + "'");
    if (count != static_cast<std::size_t>(-1) && fields.size() != count + 1) {
      throw IoError("model file: wrong field count on '" + std::string(key) + "'");
    }
    fields.erase(fields.begin());
    return fields;
  };

  const auto header = next_fields(kModelMagic, 1);
  if (text::parse_int(header[0]) != kModelVersion) throw IoError("unsupported model version " + header[0]);

  SvmModel m;
  m.kernel.kind = parse_kernel_kind(next_fields("kernel", 1)[0]);
  m.kernel.gamma = text::parse_double(next_fields("gamma", 1)[0]);
  m.kernel.coef0 = text::parse_double(next_fields("coef0", 1)[0]);
  m.kernel.degree = text::parse_double(next_fields("degree", 1)[0]);
  m.nu = text::parse_double(next_fields("nu", 1)[0]);
  m.c_eff = text::parse_double(next_fields("c_eff", 1)[0]);
  const auto d = static_cast<std::size_t>(text::parse_int(next_fields("dimension", 1)[0]));
  if (d == 0) throw IoError("model dimension must be positive");
  for (const auto& f : next_fields("scale_min", d)) m.scaler.lo.push_back(text::parse_double(f));
  for (const auto& f : next_fields("scale_max", d)) m.scaler.hi.push_back(text::parse_double(f));
  m.bias = text::parse_double(next_fields("bias", 1)[0]);
  const auto count = static_cast<std::size_t>(text::parse_int(next_fields("support_vectors", 1)[0]));
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw IoError("model file truncated in support vectors");
    const auto fields = text::split(text::trim(line), ' ');
    if (fields.size() != d + 1) throw IoError("support vector line has wrong width");
    m.lambdas.push_back(text::parse_double(fields[0]));
    std::vector<double> sv;
    for (std::size_t k = 1; k < fields.size(); ++k) sv.push_back(text::parse_double(fields[k]));
    m.support_vectors.push_back(std::move(sv));
  }
  m.kernel.validate();
  return m;
}

}  // namespace cellguard::svm
