#include "bsde/generator.hpp"

#include "bsde/errors.hpp"
#include "bsde/paths.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>

namespace bsde {

namespace {

double norm2(std::span<const double> x)
{
    double s = 0.0;
    for (double v : x) {
        s += v * v;
    }
    return std::sqrt(s);
}

struct Registered {
    GeneratorFn fn;
    std::optional<double> lipschitz_z;
};

std::mutex& registry_mutex()
{
    static std::mutex m;
    return m;
}

std::map<std::string, Registered>& registry()
{
    static std::map<std::string, Registered> r;
    return r;
}

}  // namespace

void register_generator(const std::string& name, GeneratorFn fn, std::optional<double> lipschitz_z)
{
    if (name.empty() || !fn) {
        throw ParameterError("custom generator needs a name and a callable");
    }
    std::lock_guard lock(registry_mutex());
    registry()[name] = Registered{std::move(fn), lipschitz_z};
}

bool has_registered_generator(const std::string& name)
{
    std::lock_guard lock(registry_mutex());
    return registry().count(name) != 0;
}

// ---------------------------------------------------------------------------

Generator::Generator(GeneratorFamily family, std::size_t k, std::size_t d)
    : family_(std::move(family)), k_(k), d_(d)
{
    if (k_ < 1 || d_ < 1) {
        throw DimensionError("generator needs k >= 1 and d >= 1");
    }
    if (auto* lin = std::get_if<LinearGenerator>(&family_)) {
        const auto kk = static_cast<Eigen::Index>(k_);
        if (lin->a.size() == 0) {
            lin->a = Eigen::MatrixXd::Zero(kk, kk);
        }
        if (lin->c.size() == 0) {
            lin->c = Eigen::VectorXd::Zero(kk);
        }
        if (lin->a.rows() != kk || lin->a.cols() != kk) {
            throw DimensionError("linear generator: a must be k x k");
        }
        if (lin->c.size() != kk) {
            throw DimensionError("linear generator: c must have k entries");
        }
        if (lin->z_form.size() != 0 &&
            (lin->z_form.rows() != kk || lin->z_form.cols() != static_cast<Eigen::Index>(k_ * d_))) {
            throw DimensionError("linear generator: z_form must be k x (k d)");
        }
        if (!lin->a.allFinite() || !lin->c.allFinite() || !std::isfinite(lin->b)) {
            throw ParameterError("linear generator coefficients must be finite");
        }
    } else if (const auto* ex = std::get_if<Example1Generator>(&family_)) {
        if (k_ != 1) {
            throw DimensionError("Example1 generator is scalar: k must be 1");
        }
        h_ = Modulus::example1_h(ex->p, ex->delta);
    } else if (const auto* cu = std::get_if<CustomGenerator>(&family_)) {
        if (!cu->fn) {
            throw ParameterError("custom generator '" + cu->name + "' has no callable");
        }
    }
}

Generator Generator::zero(std::size_t k, std::size_t d) { return Generator(ZeroGenerator{}, k, d); }

Generator Generator::linear(double a, double b, double c, std::size_t k, std::size_t d)
{
    const auto kk = static_cast<Eigen::Index>(k);
    LinearGenerator lin;
    lin.a = a * Eigen::MatrixXd::Identity(kk, kk);
    lin.b = b;
    lin.c = Eigen::VectorXd::Constant(kk, c);
    return Generator(std::move(lin), k, d);
}

Generator Generator::example1(double p, double delta, std::size_t d)
{
    return Generator(Example1Generator{p, delta}, 1, d);
}

Generator Generator::custom(const std::string& name, std::size_t k, std::size_t d)
{
    std::lock_guard lock(registry_mutex());
    const auto it = registry().find(name);
    if (it == registry().end()) {
        throw ParameterError("no custom generator registered under '" + name + "'");
    }
    return Generator(CustomGenerator{name, it->second.fn, it->second.lipschitz_z}, k, d);
}

void Generator::eval(double t, std::span<const double> brownian, std::span<const double> y,
                     std::span<const double> z, std::span<double> out) const
{
    std::visit(
        [&](const auto& f) {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, ZeroGenerator>) {
                std::fill(out.begin(), out.end(), 0.0);
            } else if constexpr (std::is_same_v<F, LinearGenerator>) {
                const double zn = f.b != 0.0 ? norm2(z) : 0.0;
                for (std::size_t r = 0; r < k_; ++r) {
                    const auto rr = static_cast<Eigen::Index>(r);
                    double acc = f.c[rr] + f.b * zn;
                    for (std::size_t s = 0; s < k_; ++s) {
                        acc += f.a(rr, static_cast<Eigen::Index>(s)) * y[s];
                    }
                    if (f.z_form.size() != 0) {
                        for (std::size_t s = 0; s < k_ * d_; ++s) {
                            acc += f.z_form(rr, static_cast<Eigen::Index>(s)) * z[s];
                        }
                    }
                    out[r] = acc;
                }
            } else if constexpr (std::is_same_v<F, Example1Generator>) {
                out[0] = (*h_)(std::abs(y[0])) + norm2(z) + norm2(brownian);
            } else {
                f.fn(t, brownian, y, z, out);
            }
        },
        family_);
}

bool Generator::y_independent() const
{
    return std::visit(
        [](const auto& f) {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, ZeroGenerator>) {
                return true;
            } else if constexpr (std::is_same_v<F, LinearGenerator>) {
                return f.a.isZero(0.0);
            } else {
                return false;
            }
        },
        family_);
}

std::optional<double> Generator::analytic_lipschitz_z() const
{
    return std::visit(
        [this](const auto& f) -> std::optional<double> {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, ZeroGenerator>) {
                return 0.0;
            } else if constexpr (std::is_same_v<F, LinearGenerator>) {
                double c = std::abs(f.b) * std::sqrt(static_cast<double>(k_));
                if (f.z_form.size() != 0) {
                    Eigen::JacobiSVD<Eigen::MatrixXd> svd(f.z_form);
                    c += svd.singularValues()(0);
                }
                return c;
            } else if constexpr (std::is_same_v<F, Example1Generator>) {
                return 1.0;
            } else {
                return f.lipschitz_z;
            }
        },
        family_);
}

std::string Generator::describe() const
{
    return std::visit(
        [this](const auto& f) -> std::string {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, ZeroGenerator>) {
                return fmt::format("Zero(k={}, d={})", k_, d_);
            } else if constexpr (std::is_same_v<F, LinearGenerator>) {
                return fmt::format("Linear(k={}, d={}, b={})", k_, d_, f.b);
            } else if constexpr (std::is_same_v<F, Example1Generator>) {
                return fmt::format("Example1(p={}, delta={}, d={})", f.p, f.delta, d_);
            } else {
                return fmt::format("Custom({}, k={}, d={})", f.name, k_, d_);
            }
        },
        family_);
}

std::vector<double> eval_generator(const Generator& gen, double t, std::span<const double> brownian,
                                   std::span<const double> y, std::span<const double> z)
{
    if (brownian.size() != gen.d() || y.size() != gen.k() || z.size() != gen.k() * gen.d()) {
        throw DimensionError(fmt::format(
            "generator expects B in R^{}, y in R^{}, z in R^{}x{}; got sizes {}, {}, {}", gen.d(),
            gen.k(), gen.k(), gen.d(), brownian.size(), y.size(), z.size()));
    }
    std::vector<double> out(gen.k());
    gen.eval(t, brownian, y, z, out);
    return out;
}

// ---------------------------------------------------------------------------

double check_tolerance(const Generator& gen, const Modulus* mod)
{
    const bool analytic = gen.is_builtin() && (mod == nullptr || !mod->is_tabulated());
    return analytic ? 1e-9 : 1e-6;
}

namespace {

struct BoxSampler {
    std::mt19937_64 rng;
    std::uniform_real_distribution<double> unit{-1.0, 1.0};
    std::uniform_real_distribution<double> time;
    double b_half;
    double radius;

    BoxSampler(const Sampler& s)
        : rng(s.seed), time(0.0, s.horizon), b_half(3.0 * std::sqrt(s.horizon)), radius(s.radius)
    {
        if (s.count < 1 || !(s.radius > 0.0) || !(s.horizon > 0.0)) {
            throw ParameterError("sampler needs count >= 1, radius > 0 and horizon > 0");
        }
    }

    double t() { return time(rng); }
    void fill(std::vector<double>& v, double half)
    {
        for (double& x : v) {
            x = half * unit(rng);
        }
    }
};

double diff_norm(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(s);
}

}  // namespace

H1Report check_h1(const Generator& gen, const Modulus& mod, double p, const Sampler& sampler)
{
    if (!(p > 1.0)) {
        throw ParameterError("check_h1 requires p > 1");
    }
    const auto shape = check_shape(mod, 2000, 1e-9);
    if (!shape.concave_modulus()) {
        throw ParameterError("check_h1 requires a nondecreasing concave modulus: " + mod.describe());
    }
    const std::size_t k = gen.k();
    const std::size_t d = gen.d();
    BoxSampler box(sampler);
    std::vector<double> B(d), y1(k), y2(k), z(k * d), g1(k), g2(k);

    H1Report rep;
    rep.tol = check_tolerance(gen, &mod);
    for (std::size_t n = 0; n < sampler.count; ++n) {
        const double t = box.t();
        box.fill(B, box.b_half);
        box.fill(y1, box.radius);
        box.fill(y2, box.radius);
        box.fill(z, box.radius);
        const double dy = diff_norm(y1, y2);
        if (dy == 0.0) {
            continue;
        }
        gen.eval(t, B, y1, z, g1);
        gen.eval(t, B, y2, z, g2);
        const double num = std::pow(diff_norm(g1, g2), p);
        const double den = mod(std::pow(dy, p));
        double ratio = 0.0;
        if (den > 0.0) {
            ratio = num / den;
        } else if (num > 0.0) {
            ratio = std::numeric_limits<double>::infinity();
        }
        if (!std::isfinite(num)) {
            throw NumericalError("generator returned a non-finite value in check_h1");
        }
        if (rep.witness.y1.empty() || ratio > rep.max_ratio) {
            rep.max_ratio = std::max(rep.max_ratio, ratio);
            rep.witness = Witness{t, B, y1, y2, z, z};
        }
    }
    rep.passed = rep.max_ratio <= 1.0 + rep.tol;
    return rep;
}

LipschitzReport estimate_lipschitz_z(const Generator& gen, const Sampler& sampler)
{
    const std::size_t k = gen.k();
    const std::size_t d = gen.d();
    BoxSampler box(sampler);
    std::vector<double> B(d), y(k), z1(k * d), z2(k * d), g1(k), g2(k);

    LipschitzReport rep;
    rep.analytic = gen.analytic_lipschitz_z();
    for (std::size_t n = 0; n < sampler.count; ++n) {
        const double t = box.t();
        box.fill(B, box.b_half);
        box.fill(y, box.radius);
        box.fill(z1, box.radius);
        box.fill(z2, box.radius);
        const double dz = diff_norm(z1, z2);
        if (dz == 0.0) {
            continue;
        }
        gen.eval(t, B, y, z1, g1);
        gen.eval(t, B, y, z2, g2);
        const double ratio = diff_norm(g1, g2) / dz;
        if (!std::isfinite(ratio)) {
            throw NumericalError("generator returned a non-finite value in estimate_lipschitz_z");
        }
        if (rep.witness.y1.empty() || ratio > rep.sampled) {
            rep.sampled = std::max(rep.sampled, ratio);
            rep.witness = Witness{t, B, y, y, z1, z2};
        }
    }
    return rep;
}

H3Report check_h3(const Generator& gen, const PathEnsemble& ens, double p)
{
    if (!(p > 1.0)) {
        throw ParameterError("check_h3 requires p > 1");
    }
    if (ens.dim() != gen.d()) {
        throw DimensionError("check_h3: ensemble dimension differs from generator d");
    }
    const std::size_t M = ens.paths();
    const std::size_t N = ens.grid().steps();
    const double dt = ens.grid().dt();
    std::vector<double> zero_y(gen.k(), 0.0), zero_z(gen.k() * gen.d(), 0.0), g(gen.k());
    std::vector<double> per_path(M);
    for (std::size_t m = 0; m < M; ++m) {
        double integral = 0.0;
        for (std::size_t i = 0; i <= N; ++i) {
            gen.eval(ens.grid().time(i), ens.value(m, i), zero_y, zero_z, g);
            double gn = 0.0;
            for (double v : g) {
                gn += v * v;
            }
            gn = std::sqrt(gn);
            if (!std::isfinite(gn)) {
                throw NumericalError(fmt::format("check_h3: non-finite g(t,0,0) at path {}, step {}", m, i));
            }
            integral += (i == 0 || i == N ? 0.5 : 1.0) * gn * dt;
        }
        per_path[m] = std::pow(integral, p);
    }
    auto mean_of = [&](std::size_t n) {
        double s = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            s += per_path[m];
        }
        return s / static_cast<double>(n);
    };
    H3Report rep;
    rep.estimate = mean_of(M);
    double var = 0.0;
    for (double v : per_path) {
        var += (v - rep.estimate) * (v - rep.estimate);
    }
    var = M > 1 ? var / static_cast<double>(M - 1) : 0.0;
    rep.std_error = std::sqrt(var / static_cast<double>(M));
    rep.half_estimate = M >= 2 ? mean_of(M / 2) : rep.estimate;
    // the half-sample mean differs from the full mean by ~ se; heavy tails show up as larger jumps
    rep.stable = std::abs(rep.half_estimate - rep.estimate) <=
                 5.0 * rep.std_error + 1e-12 * std::abs(rep.estimate);
    return rep;
}

// ---------------------------------------------------------------------------

double process_value(const ProcessKind& kind, std::span<const double> brownian,
                     std::span<const double> frozen_y)
{
    return std::visit(
        [&](const auto& f) -> double {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, ZeroProcess>) {
                return 0.0;
            } else if constexpr (std::is_same_v<F, ConstantProcess>) {
                return f.value;
            } else if constexpr (std::is_same_v<F, AbsBrownianCoordinate>) {
                if (f.index >= brownian.size()) {
                    throw DimensionError("AbsBrownianCoordinate index out of range");
                }
                return std::abs(brownian[f.index]);
            } else {
                if (frozen_y.empty()) {
                    throw ParameterError("ModulusOfFrozenPath needs a frozen path");
                }
                const double yn = norm2(frozen_y);
                return std::pow(f.mod(std::pow(yn, f.exponent)), 1.0 / f.exponent);
            }
        },
        kind);
}

void EnvelopeA::validate() const
{
    if (!(lambda >= 0.0)) {
        throw ParameterError("envelope lambda must be >= 0");
    }
    if (!check_shape(psi, 2000, 1e-9).concave_modulus()) {
        throw ParameterError("envelope psi must be nondecreasing, concave and vanish at 0: " +
                             psi.describe());
    }
    for (const ProcessKind* pk : {&phi, &f}) {
        if (const auto* c = std::get_if<ConstantProcess>(pk); c != nullptr && !(c->value >= 0.0)) {
            throw ParameterError("envelope constant processes must be nonnegative");
        }
    }
}

EnvelopeReport verify_envelope(const Generator& gen, const EnvelopeA& env, double p,
                               const PathEnsemble& ens, const Sampler& sampler,
                               std::span<const double> frozen_y)
{
    if (!(p > 1.0)) {
        throw ParameterError("verify_envelope requires p > 1");
    }
    env.validate();
    if (ens.dim() != gen.d()) {
        throw DimensionError("verify_envelope: ensemble dimension differs from generator d");
    }
    const std::size_t k = gen.k();
    const std::size_t d = gen.d();
    const std::size_t M = ens.paths();
    const std::size_t N = ens.grid().steps();
    if (!frozen_y.empty() && frozen_y.size() != M * (N + 1) * k) {
        throw DimensionError("verify_envelope: frozen path has the wrong shape");
    }
    BoxSampler box(sampler);
    std::uniform_int_distribution<std::size_t> pick_path(0, M - 1);
    std::uniform_int_distribution<std::size_t> pick_step(0, N);
    std::vector<double> y(k), z(k * d), g(k);

    EnvelopeReport rep;
    rep.tol = check_tolerance(gen, &env.psi);
    rep.max_defect = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < sampler.count; ++n) {
        const std::size_t m = pick_path(box.rng);
        const std::size_t i = pick_step(box.rng);
        box.fill(y, box.radius);
        box.fill(z, box.radius);
        const double t = ens.grid().time(i);
        const auto B = ens.value(m, i);
        gen.eval(t, B, y, z, g);
        const auto fy = frozen_y.empty() ? std::span<const double>{}
                                         : frozen_y.subspan((m * (N + 1) + i) * k, k);
        const double yn = norm2(y);
        const double bound = std::pow(env.psi(std::pow(yn, p)), 1.0 / p) + env.lambda * norm2(z) +
                             process_value(env.phi, B, fy) + process_value(env.f, B, fy);
        const double defect = norm2(g) - bound;
        if (defect > rep.max_defect) {
            rep.max_defect = defect;
            rep.witness = Witness{t, std::vector<double>(B.begin(), B.end()), y, y, z, z};
            rep.path = m;
            rep.step = i;
        }
    }
    rep.passed = rep.max_defect <= rep.tol;
    return rep;
}

}  // namespace bsde
