#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "oracles.hpp"
#include "rng.hpp"

namespace nscmab {

// Finite-support distribution over super arms.
struct ActionDistribution {
  std::vector<Action> actions;
  std::vector<double> weights;

  std::vector<double> marginals(int m) const {
    std::vector<double> q(static_cast<std::size_t>(m), 0.0);
    for (std::size_t k = 0; k < actions.size(); ++k)
      for (Arm a : actions[k]) q[static_cast<std::size_t>(a)] += weights[k];
    return q;
  }

  const Action& sample(Rng& rng) const { return actions[categorical(rng, weights)]; }

  // Merge repeated actions, drop zero weights, renormalize to sum 1.
  void normalize() {
    std::map<Action, double> merged;
    for (std::size_t k = 0; k < actions.size(); ++k)
      if (weights[k] > 0.0) merged[actions[k]] += weights[k];
    double total = 0.0;
    for (const auto& [a, w] : merged) total += w;
    actions.clear();
    weights.clear();
    for (const auto& [a, w] : merged) {
      actions.push_back(a);
      weights.push_back(w / total);
    }
  }
};

struct FtrlSolution {
  std::vector<double> q;
  ActionDistribution distribution;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
};

struct FtrlOptions {
  double tolerance = 1e-11;
  int max_iterations = 2000;
};

namespace detail {

inline double barrier_objective(std::span<const double> q, std::span<const double> lin, double weight) {
  double f = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!(q[i] > 0.0)) return -std::numeric_limits<double>::infinity();
    f += lin[i] * q[i] + weight * std::log(q[i]);
  }
  return f;
}

// Vertex-peeling decomposition of a point of the capped simplex
// {0 <= q <= 1, sum q = K}. Each step takes the K largest residual
// coordinates with the largest weight that keeps every residual coordinate
// at most the remaining mass.
inline ActionDistribution peel_top_k(std::span<const double> q, int K) {
  const int m = static_cast<int>(q.size());
  std::vector<double> r(q.begin(), q.end());
  for (auto& v : r) v = std::clamp(v, 0.0, 1.0);
  double mass = 0.0;
  for (double v : r) mass += v;
  mass /= K;
  ActionDistribution out;
  for (int step = 0; step <= m + 1 && mass > 1e-15; ++step) {
    auto S = top_k_indices(r, K);
    double a = std::numeric_limits<double>::infinity();
    for (Arm i : S) a = std::min(a, r[static_cast<std::size_t>(i)]);
    double outside = 0.0;
    for (int i = 0; i < m; ++i)
      if (!contains(S, i)) outside = std::max(outside, r[static_cast<std::size_t>(i)]);
    const double theta = std::min(a, mass - outside);
    if (!(theta > 0.0)) break;
    for (Arm i : S) r[static_cast<std::size_t>(i)] = std::max(0.0, r[static_cast<std::size_t>(i)] - theta);
    mass -= theta;
    out.actions.push_back(std::move(S));
    out.weights.push_back(theta);
  }
  if (out.actions.empty()) throw DecompositionError("top_k peeling made no progress");
  out.normalize();
  return out;
}

inline std::vector<double> combine(const std::vector<Action>& actions, const std::vector<int>& support,
                                   const std::vector<double>& lambda, int m) {
  std::vector<double> q(static_cast<std::size_t>(m), 0.0);
  for (std::size_t k = 0; k < support.size(); ++k)
    for (Arm a : actions[static_cast<std::size_t>(support[k])]) q[static_cast<std::size_t>(a)] += lambda[k];
  return q;
}

inline void drop_nonpositive(std::vector<int>& support, std::vector<double>& lambda) {
  std::size_t w = 0;
  double total = 0.0;
  for (std::size_t k = 0; k < support.size(); ++k) {
    if (lambda[k] > 0.0) {
      support[w] = support[k];
      lambda[w] = lambda[k];
      total += lambda[k];
      ++w;
    }
  }
  support.resize(w);
  lambda.resize(w);
  for (auto& l : lambda) l /= total;
}

// Carathéodory reduction: shrink the support to affinely independent
// vertices without moving the represented point.
inline void reduce_affine(const std::vector<Action>& actions, std::vector<int>& support,
                          std::vector<double>& lambda, int m) {
  while (support.size() > 1) {
    const auto n = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m + 1, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      for (Arm a : actions[static_cast<std::size_t>(support[static_cast<std::size_t>(k)])]) M(a, k) = 1.0;
      M(m, k) = 1.0;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    lu.setThreshold(1e-9);
    if (lu.rank() == n) return;
    Eigen::VectorXd z = lu.kernel().col(0);
    if (z.maxCoeff() <= 0.0) z = -z;
    double theta = std::numeric_limits<double>::infinity();
    Eigen::Index pivot = -1;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (z(k) > 1e-12) {
        const double r = lambda[static_cast<std::size_t>(k)] / z(k);
        if (r < theta) {
          theta = r;
          pivot = k;
        }
      }
    }
    for (Eigen::Index k = 0; k < n; ++k) lambda[static_cast<std::size_t>(k)] -= theta * z(k);
    lambda[static_cast<std::size_t>(pivot)] = 0.0;
    drop_nonpositive(support, lambda);
  }
}

// Separable concave objective
//   sum_i lin_i q_i + weight log q_i + tau log(q_i - floor)
// with the tau term dropped when tau = 0.
struct SeparableObjective {
  std::span<const double> lin;
  double weight = 0.0;
  double tau = 0.0;
  double floor = 0.0;

  bool inside(std::span<const double> q) const {
    for (double v : q)
      if (!(v > 0.0) || (tau > 0.0 && !(v > floor))) return false;
    return true;
  }
  double value(std::span<const double> q) const {
    if (!inside(q)) return -std::numeric_limits<double>::infinity();
    double f = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      f += lin.empty() ? 0.0 : lin[i] * q[i];
      if (weight > 0.0) f += weight * std::log(q[i]);
      if (tau > 0.0) f += tau * std::log(q[i] - floor);
    }
    return f;
  }
  double gradient(double q, std::size_t i) const {
    double g = lin.empty() ? 0.0 : lin[i];
    if (weight > 0.0) g += weight / q;
    if (tau > 0.0) g += tau / (q - floor);
    return g;
  }
  double curvature(double q) const {
    double h = weight > 0.0 ? weight / (q * q) : 0.0;
    if (tau > 0.0) h += tau / ((q - floor) * (q - floor));
    return h;
  }
};

// Maximize a separable objective over Conv(actions) by simplicial
// decomposition: Frank-Wolfe vertex additions, each followed by damped Newton
// steps inside the affine hull of an affinely independent support.
struct SimplicialResult {
  std::vector<int> support;
  std::vector<double> lambda;
  std::vector<double> q;
  double gap = 0.0;
  int iterations = 0;
};

// Uniform mixture over a greedy cover of the arms.
inline SimplicialResult covering_start(const std::vector<Action>& actions, int m) {
  SimplicialResult res;
  std::vector<bool> covered(static_cast<std::size_t>(m), false);
  for (int i = 0; i < m; ++i) {
    if (covered[static_cast<std::size_t>(i)]) continue;
    bool found = false;
    for (std::size_t k = 0; k < actions.size() && !found; ++k) {
      if (contains(actions[k], i)) {
        res.support.push_back(static_cast<int>(k));
        for (Arm a : actions[k]) covered[static_cast<std::size_t>(a)] = true;
        found = true;
      }
    }
    if (!found) throw ConfigError("arm " + std::to_string(i) + " appears in no action; Conv(S)_nu is empty");
  }
  res.lambda.assign(res.support.size(), 1.0 / static_cast<double>(res.support.size()));
  reduce_affine(actions, res.support, res.lambda, m);
  res.q = combine(actions, res.support, res.lambda, m);
  return res;
}

// Starts from `res`, whose marginals must lie strictly inside the domain.
inline SimplicialResult simplicial_solve(const std::vector<Action>& actions, int m,
                                         const SeparableObjective& obj, SimplicialResult res,
                                         const FtrlOptions& opts) {
  reduce_affine(actions, res.support, res.lambda, m);
  if (!obj.inside(combine(actions, res.support, res.lambda, m)))
    throw NumericalError("simplicial solver started outside the objective domain");
  auto gradient = [&](const std::vector<double>& q) {
    std::vector<double> g(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) g[i] = obj.gradient(q[i], i);
    return g;
  };

  double scale = 1.0;
  double previous = -std::numeric_limits<double>::infinity();
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    const double start_value = obj.value(combine(actions, res.support, res.lambda, m));
    // Newton steps in the affine hull of the current support.
    for (int inner = 0; inner < 200 && res.support.size() > 1; ++inner) {
      const auto q = combine(actions, res.support, res.lambda, m);
      const auto g = gradient(q);
      const auto n = static_cast<Eigen::Index>(res.support.size());
      Eigen::MatrixXd B(m, n - 1);
      const auto base = indicator(actions[static_cast<std::size_t>(res.support[0])], m);
      for (Eigen::Index k = 1; k < n; ++k) {
        const auto v = indicator(actions[static_cast<std::size_t>(res.support[static_cast<std::size_t>(k)])], m);
        for (int i = 0; i < m; ++i) B(i, k - 1) = v[static_cast<std::size_t>(i)] - base[static_cast<std::size_t>(i)];
      }
      Eigen::VectorXd gv(m), dinv(m);
      for (int i = 0; i < m; ++i) {
        gv(i) = g[static_cast<std::size_t>(i)];
        dinv(i) = obj.curvature(q[static_cast<std::size_t>(i)]);
      }
      const Eigen::MatrixXd H = B.transpose() * dinv.asDiagonal() * B;
      const Eigen::VectorXd rhs = B.transpose() * gv;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
      if (ldlt.info() != Eigen::Success) break;
      const Eigen::VectorXd delta = ldlt.solve(rhs);
      const double decrement = rhs.dot(delta);
      if (!(decrement > 1e-24)) break;
      std::vector<double> dl(static_cast<std::size_t>(n), 0.0);
      for (Eigen::Index k = 1; k < n; ++k) {
        dl[static_cast<std::size_t>(k)] = delta(k - 1);
        dl[0] -= delta(k - 1);
      }
      double s_max = std::numeric_limits<double>::infinity();
      std::size_t blocking = 0;
      for (std::size_t k = 0; k < dl.size(); ++k) {
        if (dl[k] < 0.0) {
          const double r = res.lambda[k] / -dl[k];
          if (r < s_max) {
            s_max = r;
            blocking = k;
          }
        }
      }
      double s = std::min(1.0, s_max);
      const double f0 = obj.value(q);
      std::vector<double> trial(res.lambda.size());
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        for (std::size_t k = 0; k < trial.size(); ++k) trial[k] = res.lambda[k] + s * dl[k];
        const double f1 = obj.value(combine(actions, res.support, trial, m));
        if (f1 >= f0 + 1e-4 * s * decrement || (f1 >= f0 && decrement < 1e-14)) {
          accepted = true;
          break;
        }
        s *= 0.5;
      }
      if (!accepted) break;
      const bool hit_boundary = s == s_max;
      res.lambda = trial;
      if (hit_boundary) res.lambda[blocking] = 0.0;
      drop_nonpositive(res.support, res.lambda);
      if (!hit_boundary && s == 1.0 && decrement < 1e-20) break;
    }

    res.q = combine(actions, res.support, res.lambda, m);
    const auto g = gradient(res.q);
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < actions.size(); ++k) {
      const double v = linear_value(actions[k], g);
      if (v > best_value) {
        best_value = v;
        best = k;
      }
    }
    double current = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) current += g[i] * res.q[i];
    res.gap = best_value - current;
    scale = std::max(1.0, std::abs(current));
    if (res.gap <= opts.tolerance * scale) return res;
    // Best vertex already in the support and a whole round without progress:
    // the remaining gap is rounding in the barrier gradient near a floor.
    const bool in_support =
        std::find(res.support.begin(), res.support.end(), static_cast<int>(best)) != res.support.end();
    if (in_support && !(start_value > previous)) return res;
    previous = start_value;

    // Frank-Wolfe line search toward the best vertex, then restore affine
    // independence so the next Newton phase is well posed.
    const auto vertex = indicator(actions[best], m);
    std::vector<double> dir(res.q.size()), point(res.q.size());
    for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = vertex[i] - res.q[i];
    auto at = [&](double s) {
      for (std::size_t i = 0; i < dir.size(); ++i) point[i] = res.q[i] + s * dir[i];
      return obj.inside(point);
    };
    auto slope = [&](double s) {
      double d = 0.0;
      for (std::size_t i = 0; i < dir.size(); ++i) d += dir[i] * obj.gradient(res.q[i] + s * dir[i], i);
      return d;
    };
    double lo = 0.0, hi = 1.0;
    if (at(1.0) && slope(1.0) >= 0.0) {
      lo = 1.0;
    } else {
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (at(mid) && slope(mid) > 0.0) lo = mid; else hi = mid;
      }
    }
    const double step = lo;
    if (!(step > 0.0)) continue;
    for (auto& l : res.lambda) l *= 1.0 - step;
    auto it = std::find(res.support.begin(), res.support.end(), static_cast<int>(best));
    if (it == res.support.end()) {
      res.support.push_back(static_cast<int>(best));
      res.lambda.push_back(step);
    } else {
      res.lambda[static_cast<std::size_t>(it - res.support.begin())] += step;
    }
    drop_nonpositive(res.support, res.lambda);
    reduce_affine(actions, res.support, res.lambda, m);
  }
  res.q = combine(actions, res.support, res.lambda, m);
  if (res.gap <= 1e-9 * scale) return res;
  throw NumericalError("FTRL simplicial solver did not converge: gap " + std::to_string(res.gap) +
                       " after " + std::to_string(res.iterations) + " iterations");
}

// A point of Conv(actions) with every coordinate strictly above nu, found by
// raising a shift s under the analytic center of {q >= s}. At that center
// c, max_q min_i q_i <= s + m min_i (c_i - s), which certifies emptiness.
inline SimplicialResult floor_interior_point(const std::vector<Action>& actions, int m, double nu,
                                            const FtrlOptions& opts) {
  auto res = covering_start(actions, m);
  double s = 0.0;
  for (int round = 0; round < 500; ++round) {
    SeparableObjective center;
    center.tau = 1.0;
    center.floor = s;
    FtrlOptions loose = opts;
    loose.tolerance = std::max(opts.tolerance, 1e-10);
    res = simplicial_solve(actions, m, center, std::move(res), loose);
    const double low = *std::min_element(res.q.begin(), res.q.end());
    if (low > nu) return res;
    const double margin = low - s;
    if (nu >= s + m * margin * (1.0 + 1e-9) || margin < 1e-13)
      throw ConfigError("Conv(S)_nu is empty for nu = " + std::to_string(nu));
    s += 0.5 * margin;
  }
  throw ConfigError("Conv(S)_nu has no interior point for nu = " + std::to_string(nu));
}

}  // namespace detail

// Sparse distribution over the action space whose expected indicator equals q.
// top_k: greedy vertex peeling. enumerated: min-norm-point search over the
// hull of {1_S - q}; a nonzero minimum means q lies outside Conv(S).
inline ActionDistribution decompose_marginals(std::span<const double> q, const ActionSpace& space,
                                              double tolerance = 1e-9) {
  const int m = space.m();
  if (static_cast<int>(q.size()) != m) throw DecompositionError("marginal vector has wrong length");
  if (space.kind() == ActionSpace::Kind::top_k) {
    double sum = 0.0;
    for (double v : q) {
      if (v < -tolerance || v > 1.0 + tolerance) throw DecompositionError("marginal outside [0,1]");
      sum += v;
    }
    if (std::abs(sum - space.k_max()) > tolerance * m)
      throw DecompositionError("marginals sum to " + std::to_string(sum) + ", expected K");
    return detail::peel_top_k(q, space.k_max());
  }

  // Wolfe's min-norm-point algorithm on points p_S = 1_S - q.
  const auto& actions = space.actions();
  auto point = [&](std::size_t k) {
    Eigen::VectorXd p(m);
    const auto v = indicator(actions[k], m);
    for (int i = 0; i < m; ++i) p(i) = v[static_cast<std::size_t>(i)] - q[static_cast<std::size_t>(i)];
    return p;
  };
  std::size_t start = 0;
  double start_norm = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < actions.size(); ++k) {
    const double nrm = point(k).squaredNorm();
    if (nrm < start_norm) {
      start_norm = nrm;
      start = k;
    }
  }
  std::vector<std::size_t> support{start};
  std::vector<double> lambda{1.0};
  Eigen::VectorXd x = point(start);
  for (int major = 0; major < 10000; ++major) {
    std::size_t best = 0;
    double best_dot = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < actions.size(); ++k) {
      const double d = x.dot(point(k));
      if (d < best_dot) {
        best_dot = d;
        best = k;
      }
    }
    if (x.squaredNorm() - best_dot <= 1e-15 ||
        std::find(support.begin(), support.end(), best) != support.end())
      break;
    support.push_back(best);
    lambda.push_back(0.0);
    for (int minor = 0; minor < 1000; ++minor) {
      const auto n = static_cast<Eigen::Index>(support.size());
      Eigen::MatrixXd P(m, n);
      for (Eigen::Index k = 0; k < n; ++k) P.col(k) = point(support[static_cast<std::size_t>(k)]);
      Eigen::MatrixXd A(n + 1, n + 1);
      A.topLeftCorner(n, n) = P.transpose() * P;
      A.topRightCorner(n, 1).setOnes();
      A.bottomLeftCorner(1, n).setOnes();
      A(n, n) = 0.0;
      Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
      b(n) = 1.0;
      const Eigen::VectorXd sol = A.colPivHouseholderQr().solve(b);
      const Eigen::VectorXd alpha = sol.head(n);
      if (alpha.minCoeff() > 1e-14) {
        for (Eigen::Index k = 0; k < n; ++k) lambda[static_cast<std::size_t>(k)] = alpha(k);
        break;
      }
      double theta = 1.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        const double lk = lambda[static_cast<std::size_t>(k)];
        if (alpha(k) <= 1e-14 && lk - alpha(k) > 0.0) theta = std::min(theta, lk / (lk - alpha(k)));
      }
      std::vector<std::size_t> kept_support;
      std::vector<double> kept_lambda;
      for (Eigen::Index k = 0; k < n; ++k) {
        const double l = (1.0 - theta) * lambda[static_cast<std::size_t>(k)] + theta * alpha(k);
        if (l > 1e-15) {
          kept_support.push_back(support[static_cast<std::size_t>(k)]);
          kept_lambda.push_back(l);
        }
      }
      support = std::move(kept_support);
      lambda = std::move(kept_lambda);
      if (support.size() <= 1) break;
    }
    double total = 0.0;
    for (double l : lambda) total += l;
    x.setZero();
    for (std::size_t k = 0; k < support.size(); ++k) {
      lambda[k] /= total;
      x += lambda[k] * point(support[k]);
    }
  }
  if (x.cwiseAbs().maxCoeff() > tolerance)
    throw DecompositionError("marginal vector lies outside Conv(S) (distance " +
                             std::to_string(x.norm()) + ")");
  ActionDistribution out;
  for (std::size_t k = 0; k < support.size(); ++k) {
    out.actions.push_back(actions[support[k]]);
    out.weights.push_back(lambda[k]);
  }
  out.normalize();
  return out;
}

namespace detail {

// Capped simplex {nu <= q <= 1, sum q = K}: q_i(lambda) = clip(C nu / (lambda
// - mu_i), nu, 1) and lambda is found by bisection on sum q = K.
inline std::vector<double> solve_top_k_marginals(std::span<const double> lin, double weight,
                                                 double nu, int K) {
  const std::size_t m = lin.size();
  auto q_at = [&](double lambda, std::vector<double>& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double gap = lambda - lin[i];
      q[i] = gap <= 0.0 ? 1.0 : std::clamp(weight / gap, nu, 1.0);
      s += q[i];
    }
    return s;
  };
  const double lo0 = *std::min_element(lin.begin(), lin.end()) + weight;
  const double hi0 = *std::max_element(lin.begin(), lin.end()) + weight / nu;
  double lo = lo0, hi = hi0;
  std::vector<double> q(m);
  for (int it = 0; it < 2000 && hi > lo; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (q_at(mid, q) > K) lo = mid; else hi = mid;
  }
  // Interpolate between the bracketing points so sum q = K to rounding.
  std::vector<double> qlo(m), qhi(m);
  const double slo = q_at(lo, qlo), shi = q_at(hi, qhi);
  const double w = slo == shi ? 0.0 : (slo - K) / (slo - shi);
  for (std::size_t i = 0; i < m; ++i) q[i] = (1.0 - w) * qlo[i] + w * qhi[i];
  return q;
}

// Frank-Wolfe gap over the capped simplex with floor nu.
inline double top_k_gap(std::span<const double> q, std::span<const double> g, double nu, int K) {
  const std::size_t m = q.size();
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return g[a] > g[b]; });
  double budget = K - static_cast<double>(m) * nu;
  double best = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double add = std::clamp(budget, 0.0, 1.0 - nu);
    best += g[order[k]] * (nu + add);
    budget -= add;
  }
  double cur = 0.0;
  for (std::size_t i = 0; i < m; ++i) cur += g[i] * q[i];
  return std::max(0.0, best - cur);
}

}  // namespace detail

// Log-barrier FTRL over Conv(S)_nu:
//   q = argmax_{q in Conv(S), q >= nu} <q, mu_hat> + C nu sum_i log q_i,
// together with a distribution Q over S whose marginals are q.
inline FtrlSolution ftrl_solve(std::span<const double> mu_hat, double nu, const ActionSpace& space,
                               double C = 100.0, const FtrlOptions& opts = {}) {
  const int m = space.m();
  if (static_cast<int>(mu_hat.size()) != m) throw ConfigError("mu_hat has wrong length");
  if (!(nu > 0.0)) throw ConfigError("nu must be positive");
  if (!(C > 0.0)) throw ConfigError("barrier constant C must be positive");
  const double weight = C * nu;
  FtrlSolution sol;

  if (space.kind() == ActionSpace::Kind::top_k) {
    const int K = space.k_max();
    if (nu * m > K + 1e-12 || nu > 1.0)
      throw ConfigError("Conv(S)_nu is empty for top_k with nu = " + std::to_string(nu));
    sol.q = detail::solve_top_k_marginals(mu_hat, weight, nu, K);
    std::vector<double> g(static_cast<std::size_t>(m));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = mu_hat[i] + weight / sol.q[i];
    sol.kkt_residual = detail::top_k_gap(sol.q, g, nu, K);
    sol.distribution = detail::peel_top_k(sol.q, K);
    sol.objective = detail::barrier_objective(sol.q, mu_hat, weight);
    if (sol.kkt_residual > 1e-9)
      throw NumericalError("top_k FTRL KKT residual " + std::to_string(sol.kkt_residual));
    return sol;
  }

  // Enumerated: solve in distribution space. If the unconstrained optimum
  // violates the floor, follow a log-barrier path on q >= nu from a strictly
  // feasible point.
  const auto& actions = space.actions();
  detail::SeparableObjective obj;
  obj.lin = mu_hat;
  obj.weight = weight;
  auto res = detail::simplicial_solve(actions, m, obj, detail::covering_start(actions, m), opts);
  if (*std::min_element(res.q.begin(), res.q.end()) < nu) {
    res = detail::floor_interior_point(actions, m, nu, opts);
    obj.floor = nu;
    for (obj.tau = weight; obj.tau > 1e-10 * weight; obj.tau *= 0.1)
      res = detail::simplicial_solve(actions, m, obj, std::move(res), opts);
  }
  sol.q = res.q;
  sol.iterations = res.iterations;
  sol.kkt_residual = res.gap;
  for (std::size_t k = 0; k < res.support.size(); ++k) {
    sol.distribution.actions.push_back(actions[static_cast<std::size_t>(res.support[k])]);
    sol.distribution.weights.push_back(res.lambda[k]);
  }
  sol.distribution.normalize();
  sol.objective = detail::barrier_objective(sol.q, mu_hat, weight);
  return sol;
}

// Empirical regret of S against the interval mean mu_hat.
inline double empirical_regret(const Action& S, std::span<const double> mu_hat, const ActionSpace& space) {
  return signed_linear_max(mu_hat, space) - linear_value(S, mu_hat);
}

struct FtrlLemmaSlack {
  double regret = 0.0;    // C m nu - sum_S Q(S) Reg(S)
  double variance = 0.0;  // min_S [m + Reg(S)/(C nu) - sum_{i in S} 1/q_i]
};

// Slack in the two FTRL guarantees (small expected empirical regret, small
// variance). Both are nonnegative when the guarantees hold. The variance
// minimum over S is one signed linear maximization.
inline FtrlLemmaSlack ftrl_lemma_slack(std::span<const double> mu_hat, double nu, double C,
                                       const ActionSpace& space, const FtrlSolution& sol) {
  const int m = space.m();
  const double best = signed_linear_max(mu_hat, space);
  FtrlLemmaSlack s;
  double expected_regret = 0.0;
  for (std::size_t k = 0; k < sol.distribution.actions.size(); ++k)
    expected_regret += sol.distribution.weights[k] * (best - linear_value(sol.distribution.actions[k], mu_hat));
  s.regret = C * m * nu - expected_regret;
  std::vector<double> w(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / sol.q[i] + mu_hat[i] / (C * nu);
  s.variance = m + best / (C * nu) - signed_linear_max(w, space);
  return s;
}

}  // namespace nscmab
