/*
 * Copyright 2026 The slidestitch Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "slidestitch/core.hpp"

namespace slidestitch {

// Compressed sparse rows, square.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> cols;
  std::vector<double> vals;

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t r = 0; r < n; ++r) {
      double acc = 0.0;
      for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) acc += vals[k] * x[cols[k]];
      y[r] = acc;
    }
  }

  double diagonal(std::size_t r) const {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      if (cols[k] == r) return vals[k];
    }
    return 0.0;
  }
};

struct WeightedEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 1.0;
};

// Graph Laplacian over nodes [0, n) with node `grounded` removed (its row
// and column dropped), which makes the system positive definite on a
// connected graph. Remaining nodes keep their order, shifted down past the
// grounded index.
inline CsrMatrix grounded_laplacian(std::size_t n, std::span<const WeightedEdge> edges, std::size_t grounded) {
  auto reduced = [grounded](std::size_t i) { return i < grounded ? i : i - 1; };
  std::vector<std::map<std::size_t, double>> rows(n - 1);
  for (const auto& e : edges) {
    if (e.u == e.v) continue;
    if (e.u != grounded) rows[reduced(e.u)][reduced(e.u)] += e.weight;
    if (e.v != grounded) rows[reduced(e.v)][reduced(e.v)] += e.weight;
    if (e.u != grounded && e.v != grounded) {
      rows[reduced(e.u)][reduced(e.v)] -= e.weight;
      rows[reduced(e.v)][reduced(e.u)] -= e.weight;
    }
  }
  CsrMatrix m;
  m.n = n - 1;
  for (const auto& row : rows) {
    for (const auto& [c, v] : row) {
      m.cols.push_back(c);
      m.vals.push_back(v);
    }
    m.row_ptr.push_back(m.cols.size());
  }
  return m;
}

struct CgResult {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

// Jacobi-preconditioned conjugate gradient for a symmetric positive definite
// system. Stops when ||b - Ax|| <= tolerance * ||b||. `x` holds the initial
// guess on entry.
inline CgResult conjugate_gradient(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
                                   double tolerance = 1e-8, std::size_t max_iterations = 0) {
  const std::size_t n = a.n;
  if (b.size() != n || x.size() != n) throw ValidationError("conjugate_gradient: size mismatch");
  if (max_iterations == 0) max_iterations = 10 * n + 100;
  CgResult res;
  double bnorm = 0.0;
  for (double v : b) bnorm += v * v;
  bnorm = std::sqrt(bnorm);
  if (n == 0) {
    res.converged = true;
    return res;
  }
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    res.converged = true;
    return res;
  }

  std::vector<double> inv_diag(n), r(n), z(n), p(n), q(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.diagonal(i);
    inv_diag[i] = d > 0.0 ? 1.0 / d : 1.0;
  }
  a.multiply(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = 0.0;
  for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];

  auto residual_norm = [&] {
    double s = 0.0;
    for (double v : r) s += v * v;
    return std::sqrt(s);
  };
  res.relative_residual = residual_norm() / bnorm;
  while (res.relative_residual > tolerance && res.iterations < max_iterations) {
    a.multiply(p, q);
    double pq = 0.0;
    for (std::size_t i = 0; i < n; ++i) pq += p[i] * q[i];
    if (pq <= 0.0) break;
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    double rz_next = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz_next += r[i] * z[i];
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    ++res.iterations;
    res.relative_residual = residual_norm() / bnorm;
  }
  res.converged = res.relative_residual <= tolerance;
  return res;
}

// Conjugate gradient followed by iterative refinement: the residual of the
// current solution is solved for again (to the same relative tolerance) and
// added back, until the correction drops below `step_floor` in every
// component. Each pass shrinks the error by roughly tolerance * cond(A), so a
// few passes reach an accuracy that a single relative stopping rule cannot
// guarantee for large right-hand sides.
inline CgResult solve_refined(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
                              double tolerance = 1e-8, double step_floor = 1e-10, int max_passes = 4) {
  CgResult res = conjugate_gradient(a, b, x, tolerance);
  std::vector<double> r(a.n), ax(a.n), d(a.n);
  for (int pass = 0; pass < max_passes && res.converged; ++pass) {
    a.multiply(x, ax);
    for (std::size_t i = 0; i < a.n; ++i) r[i] = b[i] - ax[i];
    std::fill(d.begin(), d.end(), 0.0);
    const CgResult step = conjugate_gradient(a, r, d, tolerance);
    res.iterations += step.iterations;
    res.converged = step.converged;
    double largest = 0.0;
    for (std::size_t i = 0; i < a.n; ++i) {
      x[i] += d[i];
      largest = std::max(largest, std::abs(d[i]));
    }
    if (largest <= step_floor) break;
  }
  return res;
}

}  // namespace slidestitch
