#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace trilogit {

// Data-validation failures raised while ingesting or pruning a panel.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DuplicateKey : DataError {
  DuplicateKey(const std::string& i, const std::string& j, const std::string& t)
      : DataError("duplicate observation key (" + i + ", " + j + ", " + t + ")"),
        i(i), j(j), t(t) {}
  std::string i, j, t;
};

struct NonBinaryOutcome : DataError {
  explicit NonBinaryOutcome(std::size_t row)
      : DataError("outcome is not 0/1 at row " + std::to_string(row)), row(row) {}
  std::size_t row;
};

struct NonFiniteRegressor : DataError {
  NonFiniteRegressor(std::size_t row, int k)
      : DataError("non-finite regressor " + std::to_string(k) + " at row " +
                   std::to_string(row)),
        row(row), k(k) {}
  std::size_t row;
  int k;
};

struct NoInformativeData : DataError {
  NoInformativeData() : DataError("pruning removed every observation") {}
};

// Estimation failures.
struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonConvergence : EstimationError {
  NonConvergence(const std::string& what, double last_delta)
      : EstimationError(what), last_delta(last_delta) {}
  double last_delta;
};

struct CollinearRegressors : EstimationError {
  explicit CollinearRegressors(const std::string& what) : EstimationError(what) {}
};

struct DegenerateCell : EstimationError {
  DegenerateCell(const std::string& family, std::int64_t cell, double denom)
      : EstimationError("degenerate " + family + " cell " + std::to_string(cell) +
                        ": weight sum " + std::to_string(denom)),
        family(family), cell(cell), denom(denom) {}
  std::string family;
  std::int64_t cell;
  double denom;
};

struct SingularW : EstimationError {
  explicit SingularW(double cond)
      : EstimationError("profile Hessian estimate is numerically singular (cond " +
                        std::to_string(cond) + ")"),
        cond(cond) {}
  double cond;
};

struct SingularHessian : EstimationError {
  explicit SingularHessian(const std::string& what) : EstimationError(what) {}
};

// Oracle preconditions.
struct TooLargeForDense : std::runtime_error {
  TooLargeForDense(std::int64_t n, std::int64_t cap)
      : std::runtime_error("instance with " + std::to_string(n) +
                           " observations exceeds dense cap " + std::to_string(cap)),
        n(n), cap(cap) {}
  std::int64_t n, cap;
};

struct AsymmetricPanel : std::runtime_error {
  explicit AsymmetricPanel(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace trilogit
