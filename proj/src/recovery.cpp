#include "rmtshrink/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "rmtshrink/detail/first_error.hpp"
#include "rmtshrink/errors.hpp"
#include "rmtshrink/kernels.hpp"

namespace rmtshrink {

namespace {

constexpr std::uint64_t kRestartDomain = 0x5DEECE66DULL;

Vector as_vector(const DiscreteSpectrum& s) {
  return Eigen::Map<const Vector>(s.values().data(), static_cast<Eigen::Index>(s.size()));
}

std::vector<Eigen::Index> descending_order(const Vector& t) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(t.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return t(a) > t(b); });
  return order;
}

// Objective and gradient against a pre-scaled noise matrix n^{-1/2} Zhat.
class Objective {
 public:
  // With sort_input the objective is permutation invariant but has kinks
  // wherever two coordinates tie; without it T keeps its diagonal slots and
  // the objective is smooth away from eigenvalue crossings.
  Objective(const Matrix& scaled_noise, const DiscreteSpectrum& lambda_hat, bool sort_input)
      : noise_(scaled_noise), target_(as_vector(lambda_hat)), sort_input_(sort_input) {
    if (noise_.rows() != noise_.cols() || noise_.rows() != target_.size()) {
      throw ValidationError("recovery objective: Zhat is " + std::to_string(noise_.rows()) +
                            "x" + std::to_string(noise_.cols()) + " but lambda_hat has " +
                            std::to_string(target_.size()) + " values");
    }
  }

  Eigen::Index dim() const { return target_.size(); }

  double value(const Vector& t) const {
    check(t);
    const Vector eig = eigvalsh_trusted(assemble(t, slots(t)));
    return (eig - target_).squaredNorm() / static_cast<double>(dim());
  }

  RecoveryGradient value_and_gradient(const Vector& t) const {
    check(t);
    const auto order = slots(t);
    const SpectralDecomposition dec = eigh_trusted(assemble(t, order));
    const Vector eig = dec.values();
    const Vector residual = eig - target_;
    const double n = static_cast<double>(dim());

    RecoveryGradient out;
    out.objective = residual.squaredNorm() / n;
    const Vector sorted_grad =
        (2.0 / n) * kernels::parallel::weighted_row_squares(
                        dec.eigenvectors, std::span<const double>(residual.data(), residual.size()));
    out.gradient.resize(dim());
    for (std::size_t i = 0; i < order.size(); ++i) {
      out.gradient(order[i]) = sorted_grad(static_cast<Eigen::Index>(i));
    }
    const double scale = std::max(1.0, eig.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j + 1 < eig.size(); ++j) {
      if (eig(j) - eig(j + 1) <= 1e-12 * scale) {
        out.degenerate = true;
        break;
      }
    }
    return out;
  }

 private:
  void check(const Vector& t) const {
    if (t.size() != dim()) {
      throw ValidationError("recovery objective: T has length " + std::to_string(t.size()) +
                            ", expected " + std::to_string(dim()));
    }
  }

  std::vector<Eigen::Index> slots(const Vector& t) const {
    if (sort_input_) return descending_order(t);
    std::vector<Eigen::Index> identity(static_cast<std::size_t>(t.size()));
    std::iota(identity.begin(), identity.end(), Eigen::Index{0});
    return identity;
  }

  Matrix assemble(const Vector& t, const std::vector<Eigen::Index>& order) const {
    Matrix m = noise_;
    for (std::size_t i = 0; i < order.size(); ++i) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += t(order[i]);
    }
    return m;
  }

  const Matrix& noise_;
  Vector target_;
  bool sort_input_;
};

struct RunOutcome {
  Vector t;
  RestartDiagnostics diag;
};

// Quasi-Newton with Armijo backtracking. Dense inverse-Hessian BFGS for
// small n, two-loop L-BFGS otherwise. Every accepted step satisfies the
// Armijo condition, so the objective never increases.
RunOutcome minimize(const Objective& obj, Vector x, const RecoveryConfig& cfg) {
  const Eigen::Index n = obj.dim();
  const bool limited = n > cfg.lbfgs_above;
  // Gauss-Newton curvature is about 2/n times a doubly stochastic Gram
  // matrix, so n/2 is the natural initial inverse-Hessian scale.
  double gamma = static_cast<double>(n) / 2.0;
  Matrix h_inv;
  if (!limited) h_inv = gamma * Matrix::Identity(n, n);
  std::deque<std::pair<Vector, Vector>> memory;  // (s, y)
  bool first_update = true;

  RunOutcome out;
  RecoveryGradient cur = obj.value_and_gradient(x);
  out.diag.initial_objective = cur.objective;
  out.diag.degenerate_warnings += cur.degenerate ? 1 : 0;
  const double grad_tol = cfg.grad_tol_per_n * static_cast<double>(n);

  auto direction = [&](const Vector& g) -> Vector {
    if (!limited) return -(h_inv * g);
    Vector q = g;
    std::vector<double> alphas(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      const auto& [s, y] = memory[k];
      alphas[k] = s.dot(q) / y.dot(s);
      q -= alphas[k] * y;
    }
    Vector r = gamma * q;
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const auto& [s, y] = memory[k];
      const double beta = y.dot(r) / y.dot(s);
      r += s * (alphas[k] - beta);
    }
    return -r;
  };

  auto reset = [&] {
    memory.clear();
    if (!limited) h_inv = gamma * Matrix::Identity(n, n);
  };

  int stalled = 0;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (cur.gradient.norm() <= grad_tol) {
      out.diag.gradient_converged = true;
      break;
    }
    Vector p = direction(cur.gradient);
    double slope = cur.gradient.dot(p);
    if (!(slope < 0.0)) {
      reset();
      p = -gamma * cur.gradient;
      slope = cur.gradient.dot(p);
    }

    double step = 1.0;
    bool accepted = false;
    RecoveryGradient next;
    Vector xn;
    for (int bt = 0; bt < cfg.max_backtracks; ++bt, step *= cfg.backtrack) {
      xn = x + step * p;
      if (bt == 0) {
        next = obj.value_and_gradient(xn);
        if (next.objective <= cur.objective + cfg.armijo_c * step * slope) {
          accepted = true;
          break;
        }
      } else {
        const double f = obj.value(xn);
        if (f <= cur.objective + cfg.armijo_c * step * slope) {
          next = obj.value_and_gradient(xn);
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      if (!memory.empty() || (!limited && !first_update)) {
        reset();
        first_update = true;
        continue;
      }
      break;
    }
    out.diag.degenerate_warnings += next.degenerate ? 1 : 0;

    const Vector s = xn - x;
    const Vector y = next.gradient - cur.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      gamma = sy / y.squaredNorm();
      if (limited) {
        memory.emplace_back(s, y);
        if (static_cast<int>(memory.size()) > cfg.lbfgs_memory) memory.pop_front();
      } else {
        if (first_update) {
          h_inv = gamma * Matrix::Identity(n, n);
          first_update = false;
        }
        const double rho = 1.0 / sy;
        const Vector hy = h_inv * y;
        const double yhy = y.dot(hy);
        h_inv -= rho * (hy * s.transpose() + s * hy.transpose());
        h_inv += (rho * rho * yhy + rho) * (s * s.transpose());
      }
    }

    const double decrease = cur.objective - next.objective;
    stalled = decrease <= cfg.stall_rel * std::max(cur.objective, 1e-300) ? stalled + 1 : 0;
    x = xn;
    cur = std::move(next);
    if (stalled >= cfg.stall_window) {
      ++it;
      break;
    }
  }
  out.diag.iterations = it;
  out.diag.final_objective = cur.objective;
  if (!out.diag.gradient_converged && cur.gradient.norm() <= grad_tol) {
    out.diag.gradient_converged = true;
  }
  out.t = std::move(x);
  return out;
}

double stddev(const DiscreteSpectrum& s) { return std::sqrt(s.variance()); }

struct CopyOutcome {
  Vector t_sorted;
  std::vector<std::size_t> order;
  double objective = 0.0;
  int iterations = 0;
  std::vector<RestartDiagnostics> restarts;
};

CopyOutcome solve_copy(const DiscreteSpectrum& lambda_hat, double sigma, int restarts,
                       std::uint64_t zhat_seed, std::uint64_t restart_base,
                       const RecoveryConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(lambda_hat.size());
  const Matrix scaled = (sigma / std::sqrt(static_cast<double>(n))) * sample_goe(n, zhat_seed);
  const Objective obj(scaled, lambda_hat, false);
  const double mean = lambda_hat.mean();
  const double sd = stddev(lambda_hat);

  std::vector<RunOutcome> runs(static_cast<std::size_t>(restarts));
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(restarts));
  detail::FirstError error;
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < restarts; ++r) {
    try {
      const std::uint64_t s = derive_seed(restart_base, static_cast<std::uint64_t>(r));
      seeds[static_cast<std::size_t>(r)] = s;
      EntrySampler normal(NoiseDistribution::gaussian, CounterRng(s));
      Vector t0(n);
      for (Eigen::Index i = 0; i < n; ++i) t0(i) = mean + sd * normal();
      runs[static_cast<std::size_t>(r)] = minimize(obj, std::move(t0), cfg);
      runs[static_cast<std::size_t>(r)].diag.seed = s;
    } catch (...) {
      error.capture(r);
    }
  }
  error.rethrow();

  CopyOutcome out;
  bool any_ok = false;
  std::size_t best = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& d = runs[r].diag;
    out.restarts.push_back(d);
    any_ok = any_ok || d.gradient_converged || d.final_objective < d.initial_objective;
    if (d.final_objective < runs[best].diag.final_objective) best = r;
  }
  if (!any_ok) {
    std::ostringstream os;
    os << "recover_spectrum: no restart made progress;";
    for (const auto& d : out.restarts) {
      os << " [seed " << d.seed << ": " << d.initial_objective << " -> " << d.final_objective
         << " in " << d.iterations << " it]";
    }
    throw NumericalError(os.str(), runs[best].diag.final_objective);
  }
  const auto order = descending_order(runs[best].t);
  out.t_sorted.resize(n);
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.t_sorted(static_cast<Eigen::Index>(i)) = runs[best].t(order[i]);
    out.order.push_back(static_cast<std::size_t>(order[i]));
  }
  out.objective = runs[best].diag.final_objective;
  out.iterations = runs[best].diag.iterations;
  return out;
}

}  // namespace

double recovery_objective(const Vector& t, const Matrix& zhat, const DiscreteSpectrum& lambda_hat) {
  const Matrix scaled = zhat / std::sqrt(static_cast<double>(zhat.rows()));
  return Objective(scaled, lambda_hat, true).value(t);
}

RecoveryGradient recovery_gradient(const Vector& t, const Matrix& zhat,
                                   const DiscreteSpectrum& lambda_hat) {
  const Matrix scaled = zhat / std::sqrt(static_cast<double>(zhat.rows()));
  return Objective(scaled, lambda_hat, true).value_and_gradient(t);
}

RecoveryResult recover_spectrum(const DiscreteSpectrum& lambda_hat, double sigma, int restarts,
                                std::uint64_t seed, const RecoveryConfig& config) {
  if (restarts < 1) throw ValidationError("recover_spectrum: restarts must be >= 1");
  if (!(sigma >= 0.0)) throw ValidationError("recover_spectrum: sigma must be >= 0");
  if (config.K_reg < 1) throw ValidationError("recover_spectrum: K_reg must be >= 1");

  RecoveryResult result;
  result.sigma_used = sigma;
  if (sigma == 0.0) {
    result.t_star = lambda_hat;
    return result;
  }

  const auto n = static_cast<Eigen::Index>(lambda_hat.size());
  Vector sum = Vector::Zero(n);
  for (int c = 0; c < config.K_reg; ++c) {
    const std::uint64_t zseed = derive_seed(seed, static_cast<std::uint64_t>(c));
    const std::uint64_t rbase = derive_seed(seed ^ kRestartDomain, static_cast<std::uint64_t>(c));
    CopyOutcome copy = solve_copy(lambda_hat, sigma, restarts, zseed, rbase, config);
    result.zhat_seeds.push_back(zseed);
    result.zhat_orders.push_back(copy.order);
    sum += copy.t_sorted;
    result.iterations += copy.iterations;
    for (const auto& d : copy.restarts) {
      result.degenerate_warnings += d.degenerate_warnings;
      result.restarts.push_back(d);
    }
    if (config.K_reg == 1) result.objective = copy.objective;
  }
  const Vector t_star = sum / static_cast<double>(config.K_reg);
  result.t_star = DiscreteSpectrum(std::vector<double>(t_star.data(), t_star.data() + n));

  if (config.K_reg > 1) {
    // Report the averaged solution's objective, averaged over the copies.
    double total = 0.0;
    const Vector t = as_vector(result.t_star);
    for (std::size_t c = 0; c < result.zhat_seeds.size(); ++c) {
      total += recovery_objective(t, aligned_noise(result, c), lambda_hat);
    }
    result.objective = total / static_cast<double>(config.K_reg);
  }
  return result;
}

NoiseSweep estimate_noise(const DiscreteSpectrum& lambda_hat, const std::vector<double>& grid,
                          int restarts, std::uint64_t seed, double threshold_frac,
                          const RecoveryConfig& config) {
  if (grid.empty()) throw ValidationError("estimate_noise: grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw ValidationError("estimate_noise: grid must be nonnegative and strictly ascending");
    }
  }
  if (!(threshold_frac > 0.0)) throw ValidationError("estimate_noise: threshold_frac must be > 0");

  NoiseSweep sweep;
  sweep.grid = grid;
  sweep.objectives.assign(grid.size(), 0.0);
  sweep.threshold = threshold_frac * lambda_hat.variance();

  detail::FirstError error;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(grid.size()); ++i) {
    try {
      const auto iu = static_cast<std::size_t>(i);
      sweep.objectives[iu] = recover_spectrum(lambda_hat, std::sqrt(grid[iu]), restarts,
                                              derive_seed(seed, iu), config)
                                 .objective;
    } catch (...) {
      error.capture(i);
    }
  }
  error.rethrow();

  std::ptrdiff_t last_below = -1;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (sweep.objectives[i] <= sweep.threshold) last_below = static_cast<std::ptrdiff_t>(i);
  }
  if (last_below < 0) {
    throw ValidationError(
        "estimate_noise: grid below true sigma^2 not found (every objective exceeds the "
        "threshold)");
  }
  const auto lb = static_cast<std::size_t>(last_below);
  if (lb + 1 == grid.size()) {
    sweep.warnings.push_back("grid may be entirely below sigma^2");
    sweep.chosen_sigma2 = grid[lb];
  } else {
    sweep.chosen_sigma2 = 0.5 * (grid[lb] + grid[lb + 1]);
  }
  return sweep;
}

Matrix aligned_noise(const RecoveryResult& result, std::size_t copy) {
  if (copy >= result.zhat_seeds.size()) throw ValidationError("aligned_noise: no such copy");
  const auto& order = result.zhat_orders.at(copy);
  const auto n = static_cast<Eigen::Index>(order.size());
  const Matrix z = result.sigma_used * sample_goe(n, result.zhat_seeds[copy]);
  Matrix out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      out(i, j) = z(static_cast<Eigen::Index>(order[i]), static_cast<Eigen::Index>(order[j]));
    }
  }
  return out;
}

double spectrum_mse(const DiscreteSpectrum& a, const DiscreteSpectrum& b) {
  if (a.size() != b.size()) throw ValidationError("spectrum_mse: lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.value(i) - b.value(i);
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

}  // namespace rmtshrink
