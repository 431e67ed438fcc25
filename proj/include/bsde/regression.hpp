#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace bsde {

/// Total-degree polynomial basis in the standardized state coordinates
/// (probabilists' Hermite polynomials, which span the same space as monomials).
struct BasisSpec {
    int degree = 3;
    double ridge = 0.0;  ///< added to the diagonal of the normal equations
};

/// C(d + q, q)
[[nodiscard]] std::size_t basis_size(std::size_t dim, int degree);

/// Multi-indices of total degree <= q, constant term first.
[[nodiscard]] std::vector<std::vector<int>> basis_multi_indices(std::size_t dim, int degree);

/// Least-squares projector onto the basis evaluated at a fixed state sample.
/// Factorizes the normal equations once; fit() can be called for many targets.
class Regressor {
public:
    /// state is M x d. Throws SingularSystemError when ridge == 0 and the
    /// normal equations are rank deficient, ParameterError when M <= basis size.
    Regressor(const Eigen::MatrixXd& state, const BasisSpec& basis, bool deterministic = true);

    /// targets is M x m. Constant columns are reproduced exactly.
    [[nodiscard]] Eigen::MatrixXd fit(const Eigen::MatrixXd& targets) const;
    [[nodiscard]] Eigen::MatrixXd coefficients(const Eigen::MatrixXd& targets) const;

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(features_.cols()); }
    [[nodiscard]] const Eigen::VectorXd& center() const noexcept { return center_; }
    [[nodiscard]] const Eigen::VectorXd& scale() const noexcept { return scale_; }

private:
    Eigen::MatrixXd cross(const Eigen::MatrixXd& targets) const;

    Eigen::MatrixXd features_;  // M x P
    Eigen::LDLT<Eigen::MatrixXd> gram_;
    Eigen::VectorXd center_;
    Eigen::VectorXd scale_;
    bool deterministic_;
};

struct RegressionResult {
    Eigen::MatrixXd fitted;        ///< M x m
    Eigen::MatrixXd coefficients;  ///< P x m, in the standardized Hermite basis
    Eigen::VectorXd center;
    Eigen::VectorXd scale;
};

[[nodiscard]] RegressionResult regress_conditional_expectation(const Eigen::MatrixXd& targets,
                                                               const Eigen::MatrixXd& state,
                                                               const BasisSpec& basis,
                                                               bool deterministic = true);

}  // namespace bsde
