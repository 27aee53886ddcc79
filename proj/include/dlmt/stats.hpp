#ifndef DLMT_STATS_HPP_
#define DLMT_STATS_HPP_

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <stdexcept>

namespace dlmt {

// Log density of the multivariate Student-t with the "scale matrix"
// parameterization: x ~ t_df(loc, S) has density
//   G((df+n)/2) / (G(df/2) (df pi)^{n/2} |S|^{1/2})
//     * (1 + d' S^{-1} d / df)^{-(df+n)/2},  d = x - loc.
inline double log_mvt_density(const Eigen::VectorXd& x, double df,
                              const Eigen::VectorXd& loc,
                              const Eigen::MatrixXd& scale) {
  const auto n = x.size();
  if (loc.size() != n || scale.rows() != n || scale.cols() != n)
    throw std::invalid_argument("log_mvt_density: dimension mismatch");
  if (!(df > 0.0)) throw std::invalid_argument("log_mvt_density: df <= 0");

  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("log_mvt_density: scale matrix not SPD");

  double log_det = 0.0;
  const auto& L = llt.matrixL();
  for (Eigen::Index i = 0; i < n; ++i) log_det += 2.0 * std::log(L(i, i));

  const Eigen::VectorXd diff = x - loc;
  const double quad = diff.dot(llt.solve(diff));

  const double nd = static_cast<double>(n);
  return std::lgamma(0.5 * (df + nd)) - std::lgamma(0.5 * df) -
         0.5 * nd * std::log(df * M_PI) - 0.5 * log_det -
         0.5 * (df + nd) * std::log1p(quad / df);
}

inline double log_t_density(double x, double df, double loc, double scale2) {
  if (!(scale2 > 0.0)) throw std::invalid_argument("log_t_density: scale <= 0");
  const double z2 = (x - loc) * (x - loc) / scale2;
  return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
         0.5 * std::log(df * M_PI * scale2) -
         0.5 * (df + 1.0) * std::log1p(z2 / df);
}

inline double student_t_quantile(double df, double p) {
  return boost::math::quantile(boost::math::students_t(df), p);
}

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal(), p);
}

// Pearson correlation; 0 when either side is constant.
template <typename VecA, typename VecB>
double pearson_correlation(const VecA& a, const VecB& b) {
  const std::size_t n = a.size();
  if (n == 0 || b.size() != n)
    throw std::invalid_argument("pearson_correlation: size mismatch");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace dlmt

#endif  // DLMT_STATS_HPP_
