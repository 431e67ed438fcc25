#pragma once

#include "bsde/modulus.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace bsde {

class PathEnsemble;

// ---------------------------------------------------------------------------
// Generators g(t, B_t, y, z): R^k x R^{k x d} -> R^k.
//
// z is passed row-major (k rows of d entries). The omega-dependence of every
// generator is through the current Brownian value only.
// ---------------------------------------------------------------------------

struct ZeroGenerator {};

/// g = a y + b |z| 1_k + W vec(z) + c
struct LinearGenerator {
    Eigen::MatrixXd a;       ///< k x k
    double b = 0.0;          ///< coefficient on |z| (Frobenius), added to every component
    Eigen::MatrixXd z_form;  ///< k x (k d) or empty
    Eigen::VectorXd c;       ///< k
};

/// g = h(|y|) + |z| + |B_t| with h the Example1H modulus (k = 1).
struct Example1Generator {
    double p = 2.0;
    double delta = 0.1353352832366127;  // e^{-2}
};

using GeneratorFn = std::function<void(double t, std::span<const double> brownian,
                                       std::span<const double> y, std::span<const double> z,
                                       std::span<double> out)>;

struct CustomGenerator {
    std::string name;
    GeneratorFn fn;
    std::optional<double> lipschitz_z;
};

using GeneratorFamily = std::variant<ZeroGenerator, LinearGenerator, Example1Generator, CustomGenerator>;

class Generator {
public:
    Generator(GeneratorFamily family, std::size_t k, std::size_t d);

    static Generator zero(std::size_t k, std::size_t d);
    /// Scalar a, |z| coefficient b and constant c applied to every component.
    static Generator linear(double a, double b, double c, std::size_t k, std::size_t d);
    static Generator example1(double p, double delta, std::size_t d);
    /// Looks up a callback registered with register_generator().
    static Generator custom(const std::string& name, std::size_t k, std::size_t d);

    void eval(double t, std::span<const double> brownian, std::span<const double> y,
              std::span<const double> z, std::span<double> out) const;

    [[nodiscard]] std::size_t k() const noexcept { return k_; }
    [[nodiscard]] std::size_t d() const noexcept { return d_; }
    [[nodiscard]] const GeneratorFamily& family() const noexcept { return family_; }
    [[nodiscard]] bool is_builtin() const noexcept
    {
        return !std::holds_alternative<CustomGenerator>(family_);
    }
    /// True when g does not depend on y.
    [[nodiscard]] bool y_independent() const;

    /// Lipschitz constant in z for builtin families; custom ones only if registered with it.
    [[nodiscard]] std::optional<double> analytic_lipschitz_z() const;

    [[nodiscard]] std::string describe() const;

private:
    GeneratorFamily family_;
    std::size_t k_;
    std::size_t d_;
    std::optional<Modulus> h_;  // Example1 only
};

/// Checked evaluation: throws DimensionError on mismatched spans.
[[nodiscard]] std::vector<double> eval_generator(const Generator& gen, double t,
                                                 std::span<const double> brownian,
                                                 std::span<const double> y,
                                                 std::span<const double> z);

// Named-callback table for custom generators. Thread-safe.
void register_generator(const std::string& name, GeneratorFn fn,
                        std::optional<double> lipschitz_z = std::nullopt);
[[nodiscard]] bool has_registered_generator(const std::string& name);

// ---------------------------------------------------------------------------
// Hypothesis samplers
// ---------------------------------------------------------------------------

/// Uniform sampling box [0,T] x [-3 sqrt T, 3 sqrt T]^d x [-R,R]^k x [-R,R]^{k x d}.
struct Sampler {
    std::size_t count = 20000;
    double radius = 5.0;
    double horizon = 1.0;
    std::uint64_t seed = 7;
};

struct Witness {
    double t = 0.0;
    std::vector<double> brownian;
    std::vector<double> y1;
    std::vector<double> y2;
    std::vector<double> z1;
    std::vector<double> z2;
};

/// Threshold used for pass/fail: 1e-9 for builtin generators, 1e-6 otherwise.
[[nodiscard]] double check_tolerance(const Generator& gen, const Modulus* mod = nullptr);

struct H1Report {
    double max_ratio = 0.0;
    Witness witness;
    bool passed = false;
    double tol = 0.0;
};

/// max |g(y1,z) - g(y2,z)|^p / mod(|y1 - y2|^p) over sampled tuples.
[[nodiscard]] H1Report check_h1(const Generator& gen, const Modulus& mod, double p,
                                const Sampler& sampler = {});

struct LipschitzReport {
    double sampled = 0.0;
    std::optional<double> analytic;
    Witness witness;
};

[[nodiscard]] LipschitzReport estimate_lipschitz_z(const Generator& gen, const Sampler& sampler = {});

struct H3Report {
    double estimate = 0.0;
    double std_error = 0.0;
    /// Estimate on the first half of the paths, for the stability flag.
    double half_estimate = 0.0;
    bool stable = true;
};

/// Monte Carlo estimate of E[(int_0^T |g(t, B_t, 0, 0)| dt)^p] with a trapezoid in time.
[[nodiscard]] H3Report check_h3(const Generator& gen, const PathEnsemble& ens, double p);

// ---------------------------------------------------------------------------
// Growth envelope |g| <= psi^{1/p}(|y|^p) + lambda |z| + phi_t + f_t
// ---------------------------------------------------------------------------

struct ZeroProcess {};
struct ConstantProcess {
    double value = 0.0;
};
struct AbsBrownianCoordinate {
    std::size_t index = 0;
};
/// mod(|y_frozen(t)|^e)^{1/e} along a frozen path array.
struct ModulusOfFrozenPath {
    Modulus mod;
    double exponent = 2.0;
};

using ProcessKind = std::variant<ZeroProcess, ConstantProcess, AbsBrownianCoordinate, ModulusOfFrozenPath>;

/// Value of a nonnegative process given B_t and the frozen y at the same
/// (path, step); frozen_y is only read by ModulusOfFrozenPath.
[[nodiscard]] double process_value(const ProcessKind& kind, std::span<const double> brownian,
                                   std::span<const double> frozen_y);

struct EnvelopeA {
    Modulus psi;
    double lambda = 0.0;
    ProcessKind phi = ZeroProcess{};
    ProcessKind f = ZeroProcess{};

    /// Throws ParameterError when psi fails check_shape or lambda < 0.
    void validate() const;
};

struct EnvelopeReport {
    double max_defect = 0.0;
    Witness witness;
    std::size_t path = 0;
    std::size_t step = 0;
    bool passed = false;
    double tol = 0.0;
};

/// Samples (step, path, y, z) and records max |g| - envelope. frozen_y may be
/// empty unless a process is ModulusOfFrozenPath.
[[nodiscard]] EnvelopeReport verify_envelope(const Generator& gen, const EnvelopeA& env, double p,
                                             const PathEnsemble& ens, const Sampler& sampler = {},
                                             std::span<const double> frozen_y = {});

}  // namespace bsde
