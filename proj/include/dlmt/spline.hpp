#ifndef DLMT_SPLINE_HPP_
#define DLMT_SPLINE_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace dlmt {

// Knot layout for an I-spline/M-spline basis on [lo, hi].  Boundary knots
// are repeated degree+1 times (clamped construction), so the basis has
// degree + interior_knots.size() + 1 members.
struct KnotConfig {
  int degree = 3;
  std::vector<double> interior_knots;
  double lo = 0.0;
  double hi = 1.0;

  int basis_size() const {
    return degree + static_cast<int>(interior_knots.size()) + 1;
  }

  double range() const { return hi - lo; }

  double clamp(double y) const { return std::min(std::max(y, lo), hi); }

  bool contains(double y) const { return y >= lo && y <= hi; }
};

// Monotone spline transform tau(y) = lambda0 + sum_b lambda_b * I_b(y).
// Nonnegative lambda keeps tau nondecreasing.  range_c records the intended
// total range sum(lambda); it is a constraint only in the Dirichlet-prior
// variant.
struct TransformParams {
  double lambda0 = 0.0;
  std::vector<double> lambda;
  double range_c = 1.0;
  KnotConfig knots;
};

// Interior knots at evenly spaced quantiles of `values`; boundaries at the
// data min/max widened slightly so every observation is strictly interior.
inline KnotConfig make_knot_config(std::vector<double> values,
                                   int n_interior = 3, int degree = 3) {
  if (values.empty()) throw std::invalid_argument("make_knot_config: no values");
  if (degree < 1) throw std::invalid_argument("make_knot_config: degree < 1");
  if (n_interior < 1)
    throw std::invalid_argument("make_knot_config: n_interior < 1");
  std::sort(values.begin(), values.end());

  KnotConfig k;
  k.degree = degree;
  const double width = values.back() - values.front();
  const double pad = 1e-9 * std::max(width, 1.0);
  k.lo = values.front() - pad;
  k.hi = values.back() + pad;

  const auto n = values.size();
  k.interior_knots.resize(n_interior);
  for (int i = 0; i < n_interior; ++i) {
    // Type-7 quantile (linear interpolation of order statistics).
    const double q = static_cast<double>(i + 1) / (n_interior + 1);
    const double h = q * static_cast<double>(n - 1);
    const auto j = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(j);
    const double upper = (j + 1 < n) ? values[j + 1] : values[j];
    k.interior_knots[i] = values[j] + frac * (upper - values[j]);
  }
  for (int i = 0; i + 1 < n_interior; ++i) {
    if (!(k.interior_knots[i] <= k.interior_knots[i + 1]))
      throw std::invalid_argument("make_knot_config: quantiles out of order");
  }
  for (double t : k.interior_knots) {
    if (!(t > k.lo && t < k.hi))
      throw std::invalid_argument(
          "make_knot_config: degenerate quantiles (too few distinct values "
          "for the requested interior knots)");
  }
  // Collapsed interior knots mean there were fewer distinct values than
  // knot positions; the basis would be rank-deficient.
  for (int i = 0; i + 1 < n_interior; ++i) {
    if (k.interior_knots[i] == k.interior_knots[i + 1])
      throw std::invalid_argument("make_knot_config: collapsed quantiles");
  }
  return k;
}

namespace detail {

// Knot vector with `copies` repeats of each boundary.
inline std::vector<double> padded_knots(const KnotConfig& k, int copies) {
  std::vector<double> t;
  t.reserve(2 * copies + k.interior_knots.size());
  t.insert(t.end(), copies, k.lo);
  t.insert(t.end(), k.interior_knots.begin(), k.interior_knots.end());
  t.insert(t.end(), copies, k.hi);
  return t;
}

// All order-1 M-splines (boxes).  The last nondegenerate interval is treated
// as closed so y == hi evaluates sensibly.
inline std::vector<double> order1_boxes(const std::vector<double>& t,
                                        double y) {
  std::vector<double> m(t.size() - 1, 0.0);
  int idx = -1;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (t[i] < t[i + 1] && y >= t[i] && y < t[i + 1]) {
      idx = static_cast<int>(i);
      break;
    }
  }
  if (idx < 0) {
    // y at (or numerically equal to) the right boundary.
    for (std::size_t i = t.size() - 1; i-- > 0;) {
      if (t[i] < t[i + 1]) {
        idx = static_cast<int>(i);
        break;
      }
    }
  }
  if (idx >= 0) m[idx] = 1.0 / (t[idx + 1] - t[idx]);
  return m;
}

// All M-splines of the given order on knot vector t, evaluated at y.
// Ramsay (1988) recursion; each basis function integrates to 1.
inline std::vector<double> msplines_at(const std::vector<double>& t, int order,
                                       double y) {
  std::vector<double> m = order1_boxes(t, y);
  for (int k = 2; k <= order; ++k) {
    for (std::size_t i = 0; i + k < t.size(); ++i) {
      const double denom = t[i + k] - t[i];
      double v = 0.0;
      if (denom > 0.0) {
        v = k * ((y - t[i]) * m[i] + (t[i + k] - y) * m[i + 1]) /
            ((k - 1) * denom);
      }
      m[i] = v;
    }
  }
  m.resize(t.size() - order);
  return m;
}

// All normalized B-splines of the given order on knot vector t (Cox-de Boor);
// they form a partition of unity on [lo, hi].
inline std::vector<double> bsplines_at(const std::vector<double>& t, int order,
                                       double y) {
  std::vector<double> n = order1_boxes(t, y);
  for (auto& v : n)
    if (v != 0.0) v = 1.0;  // unnormalized boxes
  for (int k = 2; k <= order; ++k) {
    for (std::size_t i = 0; i + k < t.size(); ++i) {
      double v = 0.0;
      const double d1 = t[i + k - 1] - t[i];
      const double d2 = t[i + k] - t[i + 1];
      if (d1 > 0.0) v += (y - t[i]) / d1 * n[i];
      if (d2 > 0.0) v += (t[i + k] - y) / d2 * n[i + 1];
      n[i] = v;
    }
  }
  n.resize(t.size() - order);
  return n;
}

}  // namespace detail

// M_b(y) for b = 1..B.  Inputs outside [lo, hi] are clamped.
inline std::vector<double> eval_mspline_basis(const KnotConfig& k, double y) {
  const int order = k.degree + 1;
  return detail::msplines_at(detail::padded_knots(k, order), order,
                             k.clamp(y));
}

// I_b(y) = integral of M_b from lo to y, via the closed-form identity
// I_b(y) = sum_{m > b} N_m(y) over order-(degree+2) B-splines on the
// once-extended knot vector.
inline std::vector<double> eval_ispline_basis(const KnotConfig& k, double y) {
  const int order = k.degree + 1;
  const auto t2 = detail::padded_knots(k, order + 1);
  const auto n = detail::bsplines_at(t2, order + 1, k.clamp(y));  // B+1 values
  const int B = k.basis_size();
  std::vector<double> out(B);
  double tail = 0.0;
  for (int b = B - 1; b >= 0; --b) {
    tail += n[b + 1];
    out[b] = std::min(tail, 1.0);
  }
  return out;
}

inline double transform(const TransformParams& p, double y) {
  const auto basis = eval_ispline_basis(p.knots, y);
  double v = p.lambda0;
  for (std::size_t b = 0; b < basis.size(); ++b) v += p.lambda[b] * basis[b];
  return v;
}

// d tau / dy = sum_b lambda_b M_b(y).  At clamped points this is the
// boundary derivative.
inline double transform_jacobian(const TransformParams& p, double y) {
  const auto basis = eval_mspline_basis(p.knots, y);
  double v = 0.0;
  for (std::size_t b = 0; b < basis.size(); ++b) v += p.lambda[b] * basis[b];
  return v;
}

// Nonnegative least-squares fit of tau to the identity map on a 512-point
// grid, with lambda0 held fixed.  Negativity is handled by clipping the
// offending coordinates to zero and refitting on the remaining set.
inline TransformParams identity_lambda(const KnotConfig& k, double c,
                                       double lambda0) {
  constexpr int kGrid = 512;
  const int B = k.basis_size();
  Eigen::MatrixXd A(kGrid, B);
  Eigen::VectorXd rhs(kGrid);
  for (int i = 0; i < kGrid; ++i) {
    const double y = k.lo + k.range() * i / (kGrid - 1);
    const auto basis = eval_ispline_basis(k, y);
    for (int b = 0; b < B; ++b) A(i, b) = basis[b];
    rhs(i) = y - lambda0;
  }

  std::vector<bool> active(B, true);  // coordinates still free to move
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(B);
  for (int pass = 0; pass <= B; ++pass) {
    std::vector<int> free;
    for (int b = 0; b < B; ++b)
      if (active[b]) free.push_back(b);
    if (free.empty()) break;
    Eigen::MatrixXd Af(kGrid, free.size());
    for (std::size_t j = 0; j < free.size(); ++j) Af.col(j) = A.col(free[j]);
    Eigen::VectorXd sol = Af.colPivHouseholderQr().solve(rhs);
    bool clipped = false;
    lambda.setZero();
    for (std::size_t j = 0; j < free.size(); ++j) {
      if (sol(j) < 0.0) {
        active[free[j]] = false;
        clipped = true;
      } else {
        lambda(free[j]) = sol(j);
      }
    }
    if (!clipped) break;
  }

  TransformParams p;
  p.lambda0 = lambda0;
  p.lambda.assign(lambda.data(), lambda.data() + B);
  p.range_c = c;
  p.knots = k;
  return p;
}

}  // namespace dlmt

#endif  // DLMT_SPLINE_HPP_
