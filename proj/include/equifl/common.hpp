#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace equifl {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = Vector<double>;
using Mat = Matrix<double>;

/// Node indices; sorted and duplicate-free unless documented otherwise.
using IndexSet = std::vector<int>;

// Every failure the library reports derives from Error and carries a stable
// machine-readable kind (used by the CLI's JSON error output).
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config_error", w) {}
};
struct ContractViolation : Error {
  explicit ContractViolation(const std::string& w) : Error("contract_violation", w) {}
};
struct PreconditionError : Error {
  explicit PreconditionError(const std::string& w) : Error("precondition_error", w) {}
};
struct CapacityError : Error {
  explicit CapacityError(const std::string& w) : Error("capacity_error", w) {}
};
struct NumericalError : Error {
  explicit NumericalError(const std::string& w) : Error("numerical_error", w) {}
};
struct InfeasibleError : Error {
  explicit InfeasibleError(const std::string& w) : Error("infeasible", w) {}
};
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& w) : Error("divergence", w) {}
};

inline void require(bool ok, const char* msg) {
  if (!ok) throw ContractViolation(msg);
}

}  // namespace equifl
