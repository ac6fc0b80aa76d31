#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace klrf {

/// Dense row-major matrix of doubles.
class Matrix
{
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return values_.empty(); }

    double & operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::vector<double> const & values() const { return values_; }

    bool operator==(Matrix const &) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

namespace numeric {

/// Minimum-norm minimizer of ||A w - b||^2, computed through the SVD pseudoinverse with
/// singular values below 1e-10 * sigma_max treated as zero. Throws std::invalid_argument
/// on empty or non-finite input, or when b does not have A.rows() entries.
std::vector<double> least_squares_min_norm(Matrix const & a, std::span<const double> b);

/// Magnitudes of DFT coefficients 0..k-1 of the series, zero-padded to at least k samples.
std::vector<double> dft_low_magnitudes(std::span<const double> series, std::size_t k);

/// sum p log p over the normalized histogram (natural log, 0 log 0 = 0). Zero for an empty histogram.
double shannon_term(std::span<const double> hist);

/// Sum of per-coordinate population variances. Zero for an empty set.
double variance_trace(std::span<const std::span<const double>> vectors);

/// exp(-dist^2 / (2 sigma^2)). Throws std::invalid_argument when sigma <= 0.
double gaussian_kernel(double dist, double sigma);

} // namespace numeric
} // namespace klrf
