#include "bsde/regression.hpp"

#include "bsde/errors.hpp"
#include "bsde/parallel.hpp"

#include <fmt/format.h>

#include <cmath>

namespace bsde {

namespace {

constexpr std::size_t kBlockRows = 512;

void enumerate(std::size_t dim, int remaining, std::vector<int>& cur, std::size_t pos,
               std::vector<std::vector<int>>& out)
{
    if (pos == dim) {
        out.push_back(cur);
        return;
    }
    for (int e = 0; e <= remaining; ++e) {
        cur[pos] = e;
        enumerate(dim, remaining - e, cur, pos + 1, out);
    }
    cur[pos] = 0;
}

// Sums per-block partials in block order; with deterministic == false the
// partition follows the worker count instead.
template <typename Partial>
Eigen::MatrixXd blocked_sum(std::size_t rows, Eigen::Index out_rows, Eigen::Index out_cols,
                            bool deterministic, const Partial& partial)
{
    std::size_t nblocks = 0;
    std::size_t block = 0;
    if (deterministic) {
        block = kBlockRows;
        nblocks = (rows + block - 1) / block;
    } else {
        nblocks = std::max<std::size_t>(1, std::min(worker_count(), rows));
        block = (rows + nblocks - 1) / nblocks;
    }
    std::vector<Eigen::MatrixXd> parts(nblocks, Eigen::MatrixXd::Zero(out_rows, out_cols));
    parallel_for(nblocks, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            const std::size_t r0 = b * block;
            const std::size_t r1 = std::min(rows, r0 + block);
            if (r0 < r1) {
                parts[b] = partial(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(r1 - r0));
            }
        }
    });
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(out_rows, out_cols);
    for (const auto& p : parts) {
        total += p;
    }
    return total;
}

}  // namespace

std::size_t basis_size(std::size_t dim, int degree)
{
    // C(d + q, q) by the multiplicative formula
    std::size_t r = 1;
    for (int i = 1; i <= degree; ++i) {
        r = r * (dim + static_cast<std::size_t>(i)) / static_cast<std::size_t>(i);
    }
    return r;
}

std::vector<std::vector<int>> basis_multi_indices(std::size_t dim, int degree)
{
    std::vector<std::vector<int>> all;
    std::vector<int> cur(dim, 0);
    enumerate(dim, degree, cur, 0, all);
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        int sa = 0, sb = 0;
        for (int e : a) sa += e;
        for (int e : b) sb += e;
        return sa < sb;
    });
    return all;
}

Regressor::Regressor(const Eigen::MatrixXd& state, const BasisSpec& basis, bool deterministic)
    : deterministic_(deterministic)
{
    if (basis.degree < 0) {
        throw ParameterError("basis degree must be >= 0");
    }
    if (!(basis.ridge >= 0.0)) {
        throw ParameterError("ridge must be >= 0");
    }
    const auto M = state.rows();
    const auto d = state.cols();
    const auto idx = basis_multi_indices(static_cast<std::size_t>(d), basis.degree);
    const auto P = static_cast<Eigen::Index>(idx.size());
    if (M <= P) {
        throw ParameterError(fmt::format("regression needs more samples ({}) than basis functions ({})", M, P));
    }

    center_ = Eigen::VectorXd::Zero(d);
    scale_ = Eigen::VectorXd::Ones(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        double mean = 0.0;
        for (Eigen::Index m = 0; m < M; ++m) {
            mean += state(m, j);
        }
        mean /= static_cast<double>(M);
        double var = 0.0;
        for (Eigen::Index m = 0; m < M; ++m) {
            var += (state(m, j) - mean) * (state(m, j) - mean);
        }
        var /= static_cast<double>(M);
        center_(j) = mean;
        scale_(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }

    features_.resize(M, P);
    const int q = basis.degree;
    parallel_for(static_cast<std::size_t>(M), [&](std::size_t r0, std::size_t r1) {
        std::vector<double> he(static_cast<std::size_t>((q + 1) * d));
        for (std::size_t r = r0; r < r1; ++r) {
            const auto m = static_cast<Eigen::Index>(r);
            for (Eigen::Index j = 0; j < d; ++j) {
                const double x = (state(m, j) - center_(j)) / scale_(j);
                double* h = he.data() + j * (q + 1);
                h[0] = 1.0;
                if (q >= 1) h[1] = x;
                for (int n = 1; n < q; ++n) {
                    h[n + 1] = x * h[n] - n * h[n - 1];
                }
            }
            for (Eigen::Index c = 0; c < P; ++c) {
                double v = 1.0;
                for (Eigen::Index j = 0; j < d; ++j) {
                    v *= he[static_cast<std::size_t>(j * (q + 1) + idx[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)])];
                }
                features_(m, c) = v;
            }
        }
    });

    Eigen::MatrixXd gram = blocked_sum(static_cast<std::size_t>(M), P, P, deterministic_,
                                       [&](Eigen::Index r0, Eigen::Index n) -> Eigen::MatrixXd {
                                           const auto blk = features_.middleRows(r0, n);
                                           return blk.transpose() * blk;
                                       });
    gram.diagonal().array() += basis.ridge;
    gram_.compute(gram);
    const Eigen::VectorXd D = gram_.vectorD().cwiseAbs();
    const bool ok = gram_.info() == Eigen::Success && gram_.isPositive() &&
                    D.minCoeff() > 1e-12 * D.maxCoeff();
    if (!ok) {
        throw SingularSystemError(fmt::format(
            "normal equations are rank deficient (basis size {}, ridge {}); use ridge > 0", P, basis.ridge));
    }
}

Eigen::MatrixXd Regressor::cross(const Eigen::MatrixXd& targets) const
{
    const auto P = features_.cols();
    return blocked_sum(static_cast<std::size_t>(features_.rows()), P, targets.cols(), deterministic_,
                       [&](Eigen::Index r0, Eigen::Index n) -> Eigen::MatrixXd {
                           return features_.middleRows(r0, n).transpose() * targets.middleRows(r0, n);
                       });
}

Eigen::MatrixXd Regressor::coefficients(const Eigen::MatrixXd& targets) const
{
    if (targets.rows() != features_.rows()) {
        throw DimensionError("regression targets must have one row per sample");
    }
    Eigen::MatrixXd beta = gram_.solve(cross(targets));
    for (Eigen::Index c = 0; c < targets.cols(); ++c) {
        const double v0 = targets(0, c);
        if ((targets.col(c).array() == v0).all()) {
            beta.col(c).setZero();
            beta(0, c) = v0;
        }
    }
    return beta;
}

Eigen::MatrixXd Regressor::fit(const Eigen::MatrixXd& targets) const
{
    if (targets.rows() != features_.rows()) {
        throw DimensionError("regression targets must have one row per sample");
    }
    const Eigen::MatrixXd beta = gram_.solve(cross(targets));
    Eigen::MatrixXd fitted = features_ * beta;
    for (Eigen::Index c = 0; c < targets.cols(); ++c) {
        const double v0 = targets(0, c);
        if ((targets.col(c).array() == v0).all()) {
            fitted.col(c).setConstant(v0);
        }
    }
    return fitted;
}

RegressionResult regress_conditional_expectation(const Eigen::MatrixXd& targets,
                                                 const Eigen::MatrixXd& state, const BasisSpec& basis,
                                                 bool deterministic)
{
    if (targets.rows() != state.rows()) {
        throw DimensionError("targets and state must have the same number of samples");
    }
    const Regressor reg(state, basis, deterministic);
    RegressionResult res;
    res.coefficients = reg.coefficients(targets);
    res.fitted = reg.fit(targets);
    res.center = reg.center();
    res.scale = reg.scale();
    return res;
}

}  // namespace bsde
