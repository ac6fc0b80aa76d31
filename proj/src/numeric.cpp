#include "klrf/numeric.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace klrf {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
  : rows_(rows), cols_(cols), values_(std::move(values))
{
  if (values_.size() != rows_ * cols_)
    throw std::invalid_argument("Matrix: value count does not match rows * cols");
}

namespace numeric {

std::vector<double> least_squares_min_norm(Matrix const & a, std::span<const double> b)
{
  if (a.rows() == 0 || a.cols() == 0)
    throw std::invalid_argument("least_squares_min_norm: empty matrix");
  if (b.size() != a.rows())
    throw std::invalid_argument("least_squares_min_norm: right-hand side length mismatch");
  for (double v : a.values())
    if (!std::isfinite(v)) throw std::invalid_argument("least_squares_min_norm: non-finite matrix entry");
  for (double v : b)
    if (!std::isfinite(v)) throw std::invalid_argument("least_squares_min_norm: non-finite right-hand side");

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> am(a.values().data(), static_cast<Eigen::Index>(a.rows()),
                                static_cast<Eigen::Index>(a.cols()));
  Eigen::Map<const Eigen::VectorXd> bm(b.data(), static_cast<Eigen::Index>(b.size()));

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(am, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd const & sigma = svd.singularValues();
  double const cutoff = sigma.size() > 0 ? 1e-10 * sigma(0) : 0.0;

  Eigen::VectorXd utb = svd.matrixU().transpose() * bm;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    utb(i) = (sigma(i) > cutoff && sigma(i) > 0.0) ? utb(i) / sigma(i) : 0.0;
  Eigen::VectorXd w = svd.matrixV() * utb;

  return {w.data(), w.data() + w.size()};
}

std::vector<double> dft_low_magnitudes(std::span<const double> series, std::size_t k)
{
  if (k == 0) throw std::invalid_argument("dft_low_magnitudes: k must be >= 1");
  std::size_t const n = std::max(series.size(), k);
  std::vector<double> out(k, 0.0);
  for (std::size_t f = 0; f < k; ++f) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < series.size(); ++t) {
      // reduce f*t mod n first so the angle stays small and exact at multiples of pi/2
      double const angle = 2.0 * std::numbers::pi * static_cast<double>((f * t) % n) / static_cast<double>(n);
      re += series[t] * std::cos(angle);
      im -= series[t] * std::sin(angle);
    }
    out[f] = std::hypot(re, im);
  }
  return out;
}

double shannon_term(std::span<const double> hist)
{
  double total = 0.0;
  for (double h : hist) {
    if (h < 0.0) throw std::invalid_argument("shannon_term: negative histogram entry");
    total += h;
  }
  if (total <= 0.0) return 0.0;
  double acc = 0.0;
  for (double h : hist) {
    if (h <= 0.0) continue;
    double const p = h / total;
    acc += p * std::log(p);
  }
  return acc;
}

double variance_trace(std::span<const std::span<const double>> vectors)
{
  if (vectors.empty()) return 0.0;
  std::size_t const d = vectors.front().size();
  double const n = static_cast<double>(vectors.size());
  std::vector<double> mean(d, 0.0);
  for (auto const & v : vectors) {
    if (v.size() != d) throw std::invalid_argument("variance_trace: vectors differ in dimension");
    for (std::size_t j = 0; j < d; ++j) mean[j] += v[j];
  }
  for (double & m : mean) m /= n;
  double acc = 0.0;
  for (auto const & v : vectors)
    for (std::size_t j = 0; j < d; ++j) {
      double const dev = v[j] - mean[j];
      acc += dev * dev;
    }
  return acc / n;
}

double gaussian_kernel(double dist, double sigma)
{
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
  return std::exp(-(dist * dist) / (2.0 * sigma * sigma));
}

} // namespace numeric
} // namespace klrf
