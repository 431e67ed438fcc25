#pragma once

#include "bsde/generator.hpp"
#include "bsde/modulus.hpp"
#include "bsde/solver.hpp"

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

namespace bsde {

// ---------------------------------------------------------------------------
// Norms and iterate distances
// ---------------------------------------------------------------------------

struct LpNorms {
    double sp = 0.0;  ///< (E sup_i |y_i|^p)^{1/p}
    double mp = 0.0;  ///< (E (sum_i |z_i|^2 dt)^{p/2})^{1/p}
    /// Standard errors of the underlying means E sup|y|^p and E(...)^{p/2}.
    double sp_moment_se = 0.0;
    double mp_moment_se = 0.0;
};

[[nodiscard]] LpNorms lp_norms(const DiscreteSolution& sol, double p);

struct PicardDistance {
    double dy = 0.0;  ///< E sup |y_a - y_b|^p
    double dz = 0.0;  ///< E (int |z_a - z_b|^2 dt)^{p/2}
};

inline constexpr std::size_t kLastStep = std::numeric_limits<std::size_t>::max();

/// Restricted to steps [first_step, last_step] for y and [first_step, last_step) for z.
[[nodiscard]] PicardDistance picard_distance(const DiscreteSolution& a, const DiscreteSolution& b, double p,
                                             std::size_t first_step = 0, std::size_t last_step = kLastStep);

// ---------------------------------------------------------------------------
// Bihari recursion phi_{n+1}(t) = int_t^T rho(phi_n(s)) ds
// ---------------------------------------------------------------------------

struct BihariCurve {
    std::vector<double> t;                 ///< quad_steps + 1 points on [T1, T]
    std::vector<std::vector<double>> phi;  ///< phi[n][i]
    double m_bound = 0.0;
};

[[nodiscard]] BihariCurve bihari_recursion(const Modulus& mod, double m_bound, double horizon, double t1,
                                           int n_max, std::size_t quad_steps = 2048);

/// CSV: t,phi_0..phi_n
void write_bihari_csv(const BihariCurve& curve, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------------

struct ConstantsInput {
    double p = 2.0;
    double lambda = 0.0;
    double horizon = 1.0;
    double a = 0.0;  ///< linear-growth coefficient of the modulus
    double k_prime_p = 2.0;
    double k_doubleprime_p = 2.0;
    std::optional<double> c1;  ///< default 2 k'_p d
    std::optional<double> c2;  ///< default max(2 k'_p, k''_p)
    std::optional<double> c3;  ///< default 2 k'_p d
    double terminal_moment = 0.0;  ///< E|xi|^p
    double h3_moment = 0.0;        ///< E (int |g(t,0,0)| dt)^p
};

struct ConstantsBundle {
    double p = 0.0;
    double lambda = 0.0;
    double horizon = 0.0;
    double a = 0.0;
    double k_prime_p = 0.0;
    double k_doubleprime_p = 0.0;
    double theta = 0.0;
    double c_p = 0.0;
    double c_lambda_p_t = 0.0;
    double d_lambda_p_theta = 0.0;
    double m_p = 0.0;
    double k_lambda_p = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
    double mu0 = 0.0;
    double m_bound = 0.0;
    double t1 = 0.0;
};

[[nodiscard]] double c_of_p(double p);

/// Throws ParameterError for p <= 1 or non-positive c1/c3.
[[nodiscard]] ConstantsBundle compute_constants(const ConstantsInput& in);

/// CSV: name,value
void write_constants_csv(const ConstantsBundle& cb, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Inequality checks in expectation
// ---------------------------------------------------------------------------

struct Lemma1Report {
    std::size_t t_index = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;  ///< rhs - lhs
    double std_error = 0.0;
};

/// E|y_t|^p + c(p) E int_t^T |y|^{p-2} 1{y != 0} |z|^2 ds
///   <= E|xi|^p + p E int_t^T |y|^{p-2} 1{y != 0} <y, g(s, y, z)> ds,
/// with left-point sums in time.
[[nodiscard]] Lemma1Report check_lemma1(const DiscreteSolution& sol, const PathEnsemble& ens,
                                        const Generator& gen, double p, std::size_t t_index);

struct AprioriReport {
    std::size_t t_index = 0;
    double prop1_lhs = 0.0;
    double prop1_rhs = 0.0;
    bool prop1_holds = false;
    double prop2_lhs = 0.0;
    double prop2_rhs = 0.0;
    bool prop2_holds = false;
};

/// Advisory evaluation of the two a priori estimates with surrogate constants
/// C = c_{lambda,p,T}, m_p = 2 k'_p and K = 2 k'_p d_{lambda,p,theta}:
///   E(int_t^T |z|^2)^{p/2} <= C { S + psi(S) + E int_t^T phi^p + E(int_t^T f)^p },  S = E sup_{s>=t}|y_s|^p
///   S <= e^{K(T-t)} { m_p E|xi|^p + m_p E(int_t^T f)^p + E int_t^T phi^p / 2 + int_t^T psi(E|y_s|^p) / 2 }
/// The envelope processes are evaluated along sol's own y.
[[nodiscard]] AprioriReport check_apriori_bounds(const DiscreteSolution& sol, const PathEnsemble& ens,
                                                 const EnvelopeA& env, const ConstantsBundle& cb, double p,
                                                 std::size_t t_index);

}  // namespace bsde
