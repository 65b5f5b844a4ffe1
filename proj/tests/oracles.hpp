#pragma once

// Independent reference implementations used to pin expected values in tests.
// Everything here is deliberately naive: triple loops, direct summation,
// exhaustive recursion. None of it shares code with the library under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scriptor/tensor.hpp"

namespace oracle {

inline std::vector<double> naive_matmul(const std::vector<double>& a, std::int64_t m,
                                        std::int64_t k, const std::vector<double>& b,
                                        std::int64_t n) {
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      out[i * n + j] = acc;
    }
  return out;
}

// Direct-summation convolution, cross-correlation convention.
inline std::vector<double> direct_conv2d(const std::vector<double>& x, std::int64_t ic,
                                         std::int64_t ih, std::int64_t iw,
                                         const std::vector<double>& k, std::int64_t oc,
                                         std::int64_t kh, std::int64_t kw,
                                         const std::vector<double>& bias, int sh, int sw, int ph,
                                         int pw) {
  std::int64_t oh = (ih + 2 * ph - kh) / sh + 1;
  std::int64_t ow = (iw + 2 * pw - kw) / sw + 1;
  std::vector<double> out(static_cast<std::size_t>(oc * oh * ow), 0.0);
  for (std::int64_t o = 0; o < oc; ++o)
    for (std::int64_t oy = 0; oy < oh; ++oy)
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        double acc = bias.empty() ? 0.0 : bias[o];
        for (std::int64_t c = 0; c < ic; ++c)
          for (std::int64_t ky = 0; ky < kh; ++ky)
            for (std::int64_t kx = 0; kx < kw; ++kx) {
              std::int64_t iy = oy * sh - ph + ky;
              std::int64_t ix = ox * sw - pw + kx;
              if (iy < 0 || iy >= ih || ix < 0 || ix >= iw) continue;
              acc += x[(c * ih + iy) * iw + ix] * k[((o * ic + c) * kh + ky) * kw + kx];
            }
        out[(o * oh + oy) * ow + ox] = acc;
      }
  return out;
}

// Partition-mean reference for adaptive average pooling.
inline std::vector<double> partition_mean_pool(const std::vector<double>& x, std::int64_t c,
                                               std::int64_t ih, std::int64_t iw, std::int64_t oh,
                                               std::int64_t ow) {
  std::vector<double> out(static_cast<std::size_t>(c * oh * ow), 0.0);
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t oy = 0; oy < oh; ++oy)
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        std::int64_t y0 = oy * ih / oh, y1 = (oy + 1) * ih / oh;
        std::int64_t x0 = ox * iw / ow, x1 = (ox + 1) * iw / ow;
        double acc = 0.0;
        for (std::int64_t y = y0; y < y1; ++y)
          for (std::int64_t xx = x0; xx < x1; ++xx) acc += x[(ch * ih + y) * iw + xx];
        out[(ch * oh + oy) * ow + ox] = acc / static_cast<double>((y1 - y0) * (x1 - x0));
      }
  return out;
}

// Plain recursive Levenshtein, no memoization. Exponential; short inputs only.
inline int exhaustive_levenshtein(const std::vector<int>& a, std::size_t i,
                                  const std::vector<int>& b, std::size_t j) {
  if (i == a.size()) return static_cast<int>(b.size() - j);
  if (j == b.size()) return static_cast<int>(a.size() - i);
  int sub = exhaustive_levenshtein(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  int del = exhaustive_levenshtein(a, i + 1, b, j) + 1;
  int ins = exhaustive_levenshtein(a, i, b, j + 1) + 1;
  return std::min(sub, std::min(del, ins));
}

inline int exhaustive_levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  return exhaustive_levenshtein(a, 0, b, 0);
}

// CTC by brute-force path enumeration over the (V+1)^T alignment space.
// probs is [T, V+1] with blank at index 0; target holds labels in 1..V.
inline double brute_force_ctc_nll(const std::vector<double>& probs, std::int64_t t_steps,
                                  std::int64_t n_classes, const std::vector<int>& target) {
  std::vector<int> path(static_cast<std::size_t>(t_steps), 0);
  double total = 0.0;
  std::function<void(std::int64_t)> walk = [&](std::int64_t t) {
    if (t == t_steps) {
      std::vector<int> collapsed;
      int prev = -1;
      for (int s : path) {
        if (s != prev && s != 0) collapsed.push_back(s);
        prev = s;
      }
      if (collapsed == target) {
        double p = 1.0;
        for (std::int64_t i = 0; i < t_steps; ++i) p *= probs[i * n_classes + path[i]];
        total += p;
      }
      return;
    }
    for (int s = 0; s < n_classes; ++s) {
      path[t] = s;
      walk(t + 1);
    }
  };
  walk(0);
  return -std::log(total);
}

// ---- finite-difference gradient checking ----

struct FdReport {
  double max_rel = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::string worst_param;
  std::int64_t checked = 0;
};

// Builds the loss once under a fresh tape, runs backward, then replays the
// tape around central perturbations of each parameter coordinate.
inline FdReport fd_check(const std::function<scriptor::Tensor()>& build_loss,
                         const std::vector<std::pair<std::string, scriptor::Tensor>>& params,
                         double eps = 1e-5, std::int64_t max_coords_per_param = -1,
                         std::uint64_t seed = 7) {
  using scriptor::Tensor;
  scriptor::Tape tape;
  Tensor loss;
  {
    scriptor::TapeScope scope(tape);
    loss = build_loss();
  }
  std::vector<std::vector<double>> grads;
  for (const auto& [name, p] : params) {
    p.node()->grad.assign(p.node()->data.size(), 0.0);
  }
  tape.backward(loss);
  for (const auto& [name, p] : params) grads.push_back(p.node()->grad);

  FdReport rep;
  scriptor::RngStream pick(seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto [name, p] = params[pi];  // handle copy aliases the same node
    std::int64_t n = p.numel();
    std::vector<std::int64_t> coords;
    if (max_coords_per_param < 0 || n <= max_coords_per_param) {
      for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::int64_t i = 0; i < max_coords_per_param; ++i) {
        coords.push_back(pick.uniform_int(0, n - 1));
      }
    }
    for (std::int64_t j : coords) {
      double saved = p.data()[j];
      p.data()[j] = saved + eps;
      tape.replay();
      double lp = loss.value();
      p.data()[j] = saved - eps;
      tape.replay();
      double lm = loss.value();
      p.data()[j] = saved;
      double fd = (lp - lm) / (2.0 * eps);
      double g = grads[pi][j];
      double rel = std::fabs(g - fd) / std::max({std::fabs(g), std::fabs(fd), 1e-3});
      ++rep.checked;
      if (rel > rep.max_rel) {
        rep.max_rel = rel;
        rep.worst_analytic = g;
        rep.worst_numeric = fd;
        rep.worst_param = name + "[" + std::to_string(j) + "]";
      }
    }
  }
  tape.replay();  // restore forward values at the unperturbed point
  return rep;
}

// Deterministic pseudo-random scalarization so FD checks see a generic loss.
inline scriptor::Tensor weighted_sum(const scriptor::Tensor& y, std::uint64_t seed = 11) {
  scriptor::RngStream rng(seed);
  scriptor::Tensor w = scriptor::Tensor::randn(y.shape(), rng);
  return scriptor::sum_all(scriptor::mul(y, w));
}

}  // namespace oracle
