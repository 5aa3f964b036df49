#pragma once

#include <string>
#include <vector>

namespace nestknn {

// Symmetric positive semidefinite weight matrix for the quadratic-form
// distance d(y, x) = (y-x)^T W (y-x). Diagonal storage is kept explicit
// because diagonal weights dominate in practice and whiten to cheap
// per-channel scalings.
class WeightMatrix {
public:
  enum class Storage { Diagonal, Full };

  WeightMatrix() = default;

  static WeightMatrix identity(int dim);
  // Throws ConfigError on non-finite or negative entries.
  static WeightMatrix diagonal(std::vector<double> entries);
  // Row-major dense, validated symmetric (relative tolerance 1e-9) and PSD.
  static WeightMatrix full(int dim, std::vector<double> row_major);

  int dim() const noexcept { return dim_; }
  Storage storage() const noexcept { return storage_; }
  double at(int i, int j) const;

  // Diagonal entries (Diagonal) or row-major dense values (Full).
  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const WeightMatrix& o) const = default;

private:
  int dim_ = 0;
  Storage storage_ = Storage::Diagonal;
  std::vector<double> values_;
};

// Linear map L with L^T L = W, so |L(y-x)|^2 equals the weighted distance.
// Rank-deficient W yields rows of zeros for the null directions; distances
// simply ignore those combinations, matching the quadratic form.
struct WhitenTransform {
  int dim = 0;
  bool diagonal = true;
  // diagonal: dim scale factors sqrt(w_i); dense: dim*dim row-major L.
  std::vector<double> coeffs;

  void apply(const double* x, double* out) const;
  std::vector<double> apply(const std::vector<double>& x) const;
};

// Factor W into L^T L. Uses Cholesky when W is positive definite and a
// symmetric eigendecomposition (eigenvalues below 1e-12 * max clamped to
// zero) when it is semidefinite. Reconstruction error stays within 1e-9
// relative, which the tests assert.
WhitenTransform whiten(const WeightMatrix& w);

}  // namespace nestknn
