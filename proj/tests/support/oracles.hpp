#pragma once
// Slow, direct reimplementations used only as test oracles. Nothing here calls
// into the library's numerical code, so a shared bug cannot cancel out.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace oracle {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Event {
  int ref_age;
  bool older;
};

// Direct product of per-event likelihoods, normalized once at the end.
inline std::vector<double> posterior(int min_age, int max_age, double beta,
                                     const std::vector<double>& prior,
                                     const std::vector<Event>& events) {
  const int n = max_age - min_age + 1;
  std::vector<long double> w(n);
  long double total = 0.0L;
  for (int i = 0; i < n; ++i) {
    const int a = min_age + i;
    long double p = prior[i];
    for (const auto& e : events) {
      const long double z = static_cast<long double>(beta) * (a - e.ref_age);
      const long double s = 1.0L / (1.0L + std::exp(-z));
      p *= e.older ? s : 1.0L - s;
    }
    w[i] = p;
    total += p;
  }
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = static_cast<double>(w[i] / total);
  return out;
}

inline std::vector<double> uniform(int n) { return std::vector<double>(n, 1.0 / n); }

// Every contiguous window; shortest first, heavier then younger on ties.
struct Window {
  int lo, hi;
  double mass;
};
inline Window shortest_window(int min_age, const std::vector<double>& p, double level) {
  const int n = static_cast<int>(p.size());
  for (int len = 1; len <= n; ++len) {
    Window best{0, 0, -1.0};
    for (int s = 0; s + len <= n; ++s) {
      double m = 0.0;
      for (int i = s; i < s + len; ++i) m += p[i];
      if (m >= level - 1e-12 && m > best.mass + 1e-15) best = {min_age + s, min_age + s + len - 1, m};
    }
    if (best.mass >= 0.0) return best;
  }
  return {min_age, min_age + n - 1, 1.0};
}

inline int argmax_youngest(const std::vector<double>& p) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(p.size()); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

// Soft-evidence product: P(a) ∝ Π_k s(a-k)^f_k (1 - s(a-k))^(1 - f_k), thresholds at min_age + k.
inline std::vector<double> soft_posterior(int min_age, int max_age, double beta,
                                          const std::vector<double>& f) {
  const int n = max_age - min_age + 1;
  std::vector<double> logp(n);
  for (int i = 0; i < n; ++i) {
    const int a = min_age + i;
    double acc = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double t = min_age + static_cast<double>(k);
      const double s = logistic(beta * (a - t));
      acc += f[k] * std::log(s) + (1.0 - f[k]) * std::log(1.0 - s);
    }
    logp[i] = acc;
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logp) mx = std::max(mx, v);
  double total = 0.0;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) total += (out[i] = std::exp(logp[i] - mx));
  for (double& v : out) v /= total;
  return out;
}

// Row k of w is (w_k, bias_k).
inline std::vector<double> responses(const std::vector<double>& w, std::size_t dim,
                                     const std::vector<double>& x) {
  const std::size_t ranks = w.size() / (dim + 1);
  std::vector<double> f(ranks);
  for (std::size_t k = 0; k < ranks; ++k) {
    double z = w[k * (dim + 1) + dim];
    for (std::size_t j = 0; j < dim; ++j) z += w[k * (dim + 1) + j] * x[j];
    f[k] = logistic(z);
  }
  return f;
}

// Central differences of a scalar function of a parameter vector.
template <typename F>
std::vector<double> numeric_gradient(F&& loss, std::vector<double> params, double h = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = loss(params);
    params[i] = keep - h;
    const double down = loss(params);
    params[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - n_i| / max(1, |a_i|, |n_i|) so near-zero entries are judged absolutely.
inline double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

// Grid scan then local refinement of the squared-error curve fit.
inline double fit_beta(const std::vector<std::pair<int, double>>& samples, double lo = 1e-3,
                       double hi = 10.0) {
  auto sse = [&](double b) {
    double s = 0.0;
    for (auto [d, f] : samples) {
      const double r = logistic(b * d) - f;
      s += r * r;
    }
    return s;
  };
  double best = lo;
  double step = (hi - lo) / 100000.0;
  for (double b = lo; b <= hi; b += step) {
    if (sse(b) < sse(best)) best = b;
  }
  for (int round = 0; round < 4; ++round) {
    const double a = std::max(lo, best - step), c = std::min(hi, best + step);
    step = (c - a) / 1000.0;
    for (double b = a; b <= c; b += step) {
      if (sse(b) < sse(best)) best = b;
    }
  }
  return best;
}

}  // namespace oracle
