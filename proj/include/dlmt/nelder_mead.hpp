#ifndef DLMT_NELDER_MEAD_HPP_
#define DLMT_NELDER_MEAD_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace dlmt {

struct NelderMeadOptions {
  int max_iter = 0;       // 0 => 200 * dimension
  double x_tol = 1e-6;    // simplex diameter
  double f_tol = 1e-8;    // spread of f over the simplex
};

struct NelderMeadTracePoint {
  int iteration = 0;
  double f_best = 0.0;
  std::vector<double> x_best;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<NelderMeadTracePoint> trace;
};

// Minimizes f with the standard simplex method (reflection 1, expansion 2,
// contraction 0.5, shrink 0.5).  The initial simplex perturbs each coordinate
// of x0 by 5% (absolute 0.05 when the coordinate is 0), so results are
// deterministic.
inline NelderMeadResult nelder_mead(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x0, NelderMeadOptions opts = {}) {
  const int dim = static_cast<int>(x0.size());
  if (dim == 0) throw std::invalid_argument("nelder_mead: empty x0");
  const int max_iter = opts.max_iter > 0 ? opts.max_iter : 200 * dim;

  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    return f(x);
  };

  std::vector<std::vector<double>> simplex(dim + 1, x0);
  std::vector<double> fv(dim + 1);
  fv[0] = eval(x0);
  if (!std::isfinite(fv[0]))
    throw std::invalid_argument("nelder_mead: f not finite at x0");
  for (int i = 0; i < dim; ++i) {
    double& c = simplex[i + 1][i];
    c = (c != 0.0) ? 1.05 * c : 0.05;
    fv[i + 1] = eval(simplex[i + 1]);
  }

  std::vector<int> order(dim + 1);
  auto sort_simplex = [&] {
    for (int i = 0; i <= dim; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> s2(dim + 1);
    std::vector<double> f2(dim + 1);
    for (int i = 0; i <= dim; ++i) {
      s2[i] = std::move(simplex[order[i]]);
      f2[i] = fv[order[i]];
    }
    simplex = std::move(s2);
    fv = std::move(f2);
  };

  auto combine = [&](const std::vector<double>& centroid,
                     const std::vector<double>& vertex, double coef) {
    std::vector<double> x(dim);
    for (int j = 0; j < dim; ++j)
      x[j] = centroid[j] + coef * (centroid[j] - vertex[j]);
    return x;
  };

  for (int it = 0; it < max_iter; ++it) {
    sort_simplex();
    res.iterations = it;
    res.trace.push_back({it, fv[0], simplex[0]});

    double diam = 0.0;
    for (int i = 1; i <= dim; ++i)
      for (int j = 0; j < dim; ++j)
        diam = std::max(diam, std::abs(simplex[i][j] - simplex[0][j]));
    if (diam < opts.x_tol || fv[dim] - fv[0] < opts.f_tol) {
      res.converged = true;
      break;
    }

    std::vector<double> centroid(dim, 0.0);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) centroid[j] += simplex[i][j] / dim;

    const auto xr = combine(centroid, simplex[dim], 1.0);  // reflection
    const double fr = eval(xr);
    if (fr < fv[0]) {
      const auto xe = combine(centroid, simplex[dim], 2.0);  // expansion
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[dim] = xe;
        fv[dim] = fe;
      } else {
        simplex[dim] = xr;
        fv[dim] = fr;
      }
    } else if (fr < fv[dim - 1]) {
      simplex[dim] = xr;
      fv[dim] = fr;
    } else {
      // Contraction, toward the better of reflected/worst.
      const bool outside = fr < fv[dim];
      const auto xc = combine(centroid, outside ? xr : simplex[dim], -0.5);
      const double fc = eval(xc);
      if (fc < std::min(fr, fv[dim])) {
        simplex[dim] = xc;
        fv[dim] = fc;
      } else {
        // Shrink toward the best vertex.
        for (int i = 1; i <= dim; ++i) {
          for (int j = 0; j < dim; ++j)
            simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
          fv[i] = eval(simplex[i]);
        }
      }
    }
  }

  sort_simplex();
  res.x = simplex[0];
  res.f = fv[0];
  return res;
}

}  // namespace dlmt

#endif  // DLMT_NELDER_MEAD_HPP_
