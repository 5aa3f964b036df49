#include "core/weights.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "core/error.hpp"

namespace nestknn {

WeightMatrix WeightMatrix::identity(int dim) {
  if (dim < 1) throw ConfigError("weight matrix: dim must be >= 1");
  WeightMatrix w;
  w.dim_ = dim;
  w.storage_ = Storage::Diagonal;
  w.values_.assign(static_cast<size_t>(dim), 1.0);
  return w;
}

WeightMatrix WeightMatrix::diagonal(std::vector<double> entries) {
  if (entries.empty()) throw ConfigError("weight matrix: dim must be >= 1");
  for (size_t i = 0; i < entries.size(); ++i) {
    if (!std::isfinite(entries[i]) || entries[i] < 0.0)
      throw ConfigError("weight matrix: diagonal entry " + std::to_string(i) +
                        " must be finite and >= 0");
  }
  WeightMatrix w;
  w.dim_ = static_cast<int>(entries.size());
  w.storage_ = Storage::Diagonal;
  w.values_ = std::move(entries);
  return w;
}

WeightMatrix WeightMatrix::full(int dim, std::vector<double> row_major) {
  if (dim < 1) throw ConfigError("weight matrix: dim must be >= 1");
  if (row_major.size() != static_cast<size_t>(dim) * dim)
    throw ConfigError("weight matrix: expected " + std::to_string(dim * dim) +
                      " entries, got " + std::to_string(row_major.size()));
  double max_abs = 0.0;
  for (double v : row_major) {
    if (!std::isfinite(v))
      throw ConfigError("weight matrix: non-finite entry");
    max_abs = std::max(max_abs, std::abs(v));
  }
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) {
      double aij = row_major[static_cast<size_t>(i) * dim + j];
      double aji = row_major[static_cast<size_t>(j) * dim + i];
      if (std::abs(aij - aji) > 1e-9 * std::max(1.0, max_abs))
        throw ConfigError("weight matrix: not symmetric at (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }

  const Eigen::MatrixXd m =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>(row_major.data(), dim,
                                                       dim);
  // The solver reads only the lower triangle, matching the symmetry check.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success)
    throw ConfigError("weight matrix: eigendecomposition failed");
  const double emax = es.eigenvalues().maxCoeff();
  const double floor = -1e-9 * std::max(1.0, emax);
  if (es.eigenvalues().minCoeff() < floor)
    throw ConfigError("weight matrix: not positive semidefinite (min "
                      "eigenvalue " +
                      std::to_string(es.eigenvalues().minCoeff()) + ")");

  WeightMatrix w;
  w.dim_ = dim;
  w.storage_ = Storage::Full;
  w.values_ = std::move(row_major);
  return w;
}

double WeightMatrix::at(int i, int j) const {
  if (i < 0 || j < 0 || i >= dim_ || j >= dim_)
    throw InternalError("weight matrix index out of range");
  if (storage_ == Storage::Diagonal)
    return i == j ? values_[static_cast<size_t>(i)] : 0.0;
  return values_[static_cast<size_t>(i) * dim_ + j];
}

void WhitenTransform::apply(const double* x, double* out) const {
  if (diagonal) {
    for (int i = 0; i < dim; ++i) out[i] = coeffs[static_cast<size_t>(i)] * x[i];
    return;
  }
  for (int i = 0; i < dim; ++i) {
    const double* row = coeffs.data() + static_cast<size_t>(i) * dim;
    double acc = 0.0;
    for (int j = 0; j < dim; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
}

std::vector<double> WhitenTransform::apply(const std::vector<double>& x) const {
  std::vector<double> out(static_cast<size_t>(dim));
  apply(x.data(), out.data());
  return out;
}

WhitenTransform whiten(const WeightMatrix& w) {
  WhitenTransform t;
  t.dim = w.dim();
  if (w.storage() == WeightMatrix::Storage::Diagonal) {
    t.diagonal = true;
    t.coeffs.reserve(w.values().size());
    for (double v : w.values()) t.coeffs.push_back(std::sqrt(v));
    return t;
  }

  const int n = w.dim();
  // Mirror the lower triangle so downstream factorizations see an exactly
  // symmetric matrix even when the input carries 1e-9-level asymmetry.
  Eigen::MatrixXd sym(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = w.values()[static_cast<size_t>(i) * n + j];
      sym(i, j) = v;
      sym(j, i) = v;
    }
  }

  // Cholesky covers the definite case; fall back to the eigendecomposition
  // when W is singular or near-singular.
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd u = llt.matrixU();
    // Verify U^T U reproduces W; LLT can "succeed" marginally close to
    // singularity with poor reconstruction.
    double err = (u.transpose() * u - sym).cwiseAbs().maxCoeff();
    double scale = std::max(1.0, sym.cwiseAbs().maxCoeff());
    if (err <= 1e-10 * scale) {
      t.diagonal = false;
      t.coeffs.resize(static_cast<size_t>(n) * n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          t.coeffs[static_cast<size_t>(i) * n + j] = u(i, j);
      return t;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success)
    throw ConfigError("whiten: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double emax = std::max(0.0, ev.maxCoeff());
  Eigen::VectorXd root(n);
  for (int i = 0; i < n; ++i) {
    double v = ev(i);
    if (v < 1e-12 * std::max(1.0, emax)) v = 0.0;  // clamp null directions
    root(i) = std::sqrt(v);
  }
  // L = sqrt(Lambda) Q^T gives L^T L = Q Lambda Q^T = W.
  Eigen::MatrixXd l = root.asDiagonal() * es.eigenvectors().transpose();
  t.diagonal = false;
  t.coeffs.resize(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      t.coeffs[static_cast<size_t>(i) * n + j] = l(i, j);
  return t;
}

}  // namespace nestknn
