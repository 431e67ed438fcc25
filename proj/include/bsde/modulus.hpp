#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace bsde {

// ---------------------------------------------------------------------------
// Moduli of continuity
//
// A modulus is a nondecreasing function on R+ vanishing at zero. The same
// representation carries the rho bounding increments of a generator in y,
// the kappa of the stronger continuity conditions, and the psi of the
// growth envelope.
// ---------------------------------------------------------------------------

/// rho(u) = mu * u
struct LinearFamily {
    double mu = 1.0;
};

/// rho(u) = c * u^alpha, alpha in (0, 2]. alpha > 1 is accepted but is not concave.
struct PowerFamily {
    double c = 1.0;
    double alpha = 1.0;
};

/// h(x) = x |ln x|^{1/p} on (0, delta], continued by its tangent line at delta.
struct Example1HFamily {
    double p = 2.0;
    double delta = std::exp(-2.0);
};

/// Piecewise-linear interpolant through (u_i, v_i), u_0 = v_0 = 0.
/// Extended beyond the last breakpoint with the final slope.
struct TabulatedFamily {
    std::vector<double> u;
    std::vector<double> v;
};

using ModulusFamily = std::variant<LinearFamily, PowerFamily, Example1HFamily, TabulatedFamily>;

class Modulus {
public:
    /// Validates the family parameters; throws ParameterError.
    Modulus(ModulusFamily family, double domain_cap = 1.0);

    static Modulus linear(double mu, double domain_cap = 1.0);
    static Modulus power(double c, double alpha, double domain_cap = 1.0);
    static Modulus example1_h(double p, double delta = std::exp(-2.0), double domain_cap = 1.0);
    static Modulus tabulated(std::vector<double> u, std::vector<double> v);

    /// Throws ParameterError for negative or NaN u.
    [[nodiscard]] double operator()(double u) const;

    [[nodiscard]] const ModulusFamily& family() const noexcept { return family_; }
    [[nodiscard]] double domain_cap() const noexcept { return domain_cap_; }
    [[nodiscard]] bool is_tabulated() const noexcept {
        return std::holds_alternative<TabulatedFamily>(family_);
    }
    [[nodiscard]] std::string describe() const;

private:
    ModulusFamily family_;
    double domain_cap_;
};

[[nodiscard]] inline double eval_modulus(const Modulus& mod, double u) { return mod(u); }

// ---------------------------------------------------------------------------
// Shape checks
// ---------------------------------------------------------------------------

struct ShapeReport {
    bool is_nondecreasing = false;
    bool is_concave = false;
    bool zero_at_zero = false;
    bool positive_on_positive = false;
    /// Largest monotonicity/concavity defect minus tol; <= 0 means pass.
    double worst_violation = 0.0;
    std::size_t grid_size = 0;

    [[nodiscard]] bool all() const noexcept {
        return is_nondecreasing && is_concave && zero_at_zero && positive_on_positive;
    }
    /// The shape needed by the hypotheses that do not require strict positivity.
    [[nodiscard]] bool concave_modulus() const noexcept {
        return is_nondecreasing && is_concave && zero_at_zero;
    }
};

/// Geometric grid (down to 1e-12 U) merged with a uniform grid over (0, U].
[[nodiscard]] std::vector<double> shape_grid(double cap, std::size_t grid_size);

[[nodiscard]] ShapeReport check_shape(const Modulus& mod, std::size_t grid_size = 10000,
                                      double tol = 1e-9);

// ---------------------------------------------------------------------------
// Osgood-type integral classification
// ---------------------------------------------------------------------------

enum class OsgoodVerdict { Divergent, Convergent, Inconclusive };

[[nodiscard]] const char* to_string(OsgoodVerdict v) noexcept;

struct OsgoodOptions {
    /// Tail-ratio rule, reported alongside the decay fit and used when the fit is impossible.
    double tail_ratio_threshold = 0.1;
    /// Fitted decay exponent of per-decade increments against log(1/eps):
    /// >= divergent_above means the increments are not summable.
    double divergent_above = -1.15;
    double convergent_below = -1.35;
    double quadrature_tol = 1e-12;
};

struct OsgoodResult {
    OsgoodVerdict verdict = OsgoodVerdict::Inconclusive;
    bool integrand_unbounded = false;
    std::vector<double> eps;       ///< u0 * 10^{-j}, j = 1..decades
    std::vector<double> integral;  ///< I(eps_j)
    std::vector<double> increments;
    double tail_ratio = 0.0;
    double decay_exponent = 0.0;
};

/// Integrates u^{w-1} / mod(u)^w over [eps, u0] for eps = u0 10^{-j} and
/// classifies the behaviour of the integral as eps -> 0.
[[nodiscard]] OsgoodResult osgood_classify(const Modulus& mod, double weight_exponent, double u0,
                                           int eps_decades = 8, const OsgoodOptions& opts = {});

/// Smallest A with mod(u) <= A (u + 1) on a uniform grid over [0, U].
/// Requires a nondecreasing concave modulus vanishing at zero.
[[nodiscard]] double linear_growth_coefficient(const Modulus& mod, std::size_t grid_size = 10001);

// ---------------------------------------------------------------------------
// Transformations
// ---------------------------------------------------------------------------

/// u -> mod(u^{1/r})^r
struct PowerRoot {
    double r = 2.0;
};

/// kappa -> rho(u) = kappa(u^{1/p})^p
struct H1StarToH1 {
    double p = 2.0;
};

/// kappa -> rho1(u) = kappa(u^q)^{1/q}, rho2 = concave majorant of rho1,
/// rho_bar(u) = rho2(u^{1/p})^p + u.
struct H1ppToH1 {
    double p = 2.0;
    double q = 2.0;
};

using TransformKind = std::variant<PowerRoot, H1StarToH1, H1ppToH1>;

struct TransformGrid {
    int decades = 16;
    int points_per_decade = 2000;
    int uniform_points = 2000;
};

/// Domination rho_bar(u) <= K 2^p kappa(u^{q/p})^{p/q}, K = 1 + 1/rho2(1)^p, on (0, 1].
struct DominationReport {
    bool evaluated = false;
    std::string note;
    double K = 0.0;
    double max_ratio = 0.0;  ///< max of lhs/rhs over the grid
    bool holds = false;
    double majorant_ratio = 0.0;  ///< sup rho2 / rho1 over the grid
};

struct TransformResult {
    Modulus modulus;
    std::optional<DominationReport> domination;
};

[[nodiscard]] std::vector<double> transform_grid(double cap, const TransformGrid& grid = {});

[[nodiscard]] TransformResult transform_modulus(const Modulus& mod, const TransformKind& kind,
                                                const TransformGrid& grid = {});

/// Least concave nondecreasing majorant of (u_i, v_i), u ascending from (0, 0).
[[nodiscard]] Modulus concave_majorant(const std::vector<double>& u, const std::vector<double>& v);

// ---------------------------------------------------------------------------
// CSV (u,v)
// ---------------------------------------------------------------------------

void write_modulus_csv(const Modulus& tabulated, const std::filesystem::path& path);
[[nodiscard]] Modulus read_modulus_csv(const std::filesystem::path& path);

}  // namespace bsde
