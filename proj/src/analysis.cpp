#include "bsde/analysis.hpp"

#include "bsde/csv.hpp"
#include "bsde/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bsde {

namespace {

double norm2(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

// Path-ordered sums, independent of the worker count.
MeanSe mean_se(const std::vector<double>& v)
{
    const auto n = static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += x;
    const double mean = s / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = v.size() > 1 ? ss / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

void require_p(double p)
{
    if (!(p >= 1.0) || !std::isfinite(p)) {
        throw ParameterError(fmt::format("p must be >= 1, got {}", p));
    }
}

void require_t_index(const DiscreteSolution& sol, std::size_t t_index)
{
    if (t_index > sol.steps()) {
        throw ParameterError(fmt::format("time index {} exceeds N = {}", t_index, sol.steps()));
    }
}

}  // namespace

// ---------------------------------------------------------------------------

LpNorms lp_norms(const DiscreteSolution& sol, double p)
{
    require_p(p);
    if (!sol.all_finite()) {
        throw NumericalError("lp_norms: solution has non-finite entries");
    }
    const std::size_t M = sol.paths();
    const std::size_t N = sol.steps();
    const double dt = sol.grid().dt();
    std::vector<double> sup(M), quad(M);
    for (std::size_t m = 0; m < M; ++m) {
        double s = 0.0;
        for (std::size_t i = 0; i <= N; ++i) {
            s = std::max(s, norm2(sol.y(m, i)));
        }
        double q = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double zn = norm2(sol.z(m, i));
            q += zn * zn * dt;
        }
        sup[m] = std::pow(s, p);
        quad[m] = std::pow(q, p / 2.0);
    }
    const MeanSe a = mean_se(sup);
    const MeanSe b = mean_se(quad);
    return {std::pow(a.mean, 1.0 / p), std::pow(b.mean, 1.0 / p), a.se, b.se};
}

PicardDistance picard_distance(const DiscreteSolution& a, const DiscreteSolution& b, double p,
                               std::size_t first_step, std::size_t last_step)
{
    require_p(p);
    require_same_shape(a, b);
    const std::size_t N = a.steps();
    const std::size_t last = std::min(last_step, N);
    if (first_step > last) {
        throw ParameterError("picard_distance: first step after last step");
    }
    const std::size_t M = a.paths();
    const std::size_t k = a.k();
    const std::size_t kd = a.k() * a.d();
    const double dt = a.grid().dt();
    double sy = 0.0;
    double sz = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        double sup = 0.0;
        for (std::size_t i = first_step; i <= last; ++i) {
            const auto ya = a.y(m, i);
            const auto yb = b.y(m, i);
            double s = 0.0;
            for (std::size_t c = 0; c < k; ++c) s += (ya[c] - yb[c]) * (ya[c] - yb[c]);
            sup = std::max(sup, s);
        }
        double q = 0.0;
        for (std::size_t i = first_step; i < last; ++i) {
            const auto za = a.z(m, i);
            const auto zb = b.z(m, i);
            for (std::size_t c = 0; c < kd; ++c) q += (za[c] - zb[c]) * (za[c] - zb[c]);
        }
        sy += std::pow(sup, p / 2.0);
        sz += std::pow(q * dt, p / 2.0);
    }
    return {sy / static_cast<double>(M), sz / static_cast<double>(M)};
}

// ---------------------------------------------------------------------------

BihariCurve bihari_recursion(const Modulus& mod, double m_bound, double horizon, double t1, int n_max,
                             std::size_t quad_steps)
{
    if (!check_shape(mod).concave_modulus()) {
        throw ParameterError("bihari_recursion needs a nondecreasing concave modulus with mod(0) = 0");
    }
    if (!(m_bound >= 0.0) || !std::isfinite(m_bound)) {
        throw ParameterError("M_bound must be finite and >= 0");
    }
    if (!(horizon > 0.0) || !(t1 >= 0.0) || !(t1 < horizon)) {
        throw ParameterError(fmt::format("need 0 <= T1 < T, got T1 = {}, T = {}", t1, horizon));
    }
    if (n_max < 0 || quad_steps < 1) {
        throw ParameterError("n_max must be >= 0 and quad_steps >= 1");
    }
    BihariCurve c;
    c.m_bound = m_bound;
    c.t.resize(quad_steps + 1);
    const double h = (horizon - t1) / static_cast<double>(quad_steps);
    for (std::size_t i = 0; i <= quad_steps; ++i) {
        c.t[i] = i == quad_steps ? horizon : t1 + h * static_cast<double>(i);
    }
    const double rm = mod(m_bound);
    std::vector<double> phi(quad_steps + 1);
    for (std::size_t i = 0; i <= quad_steps; ++i) {
        phi[i] = (horizon - c.t[i]) * rm;
    }
    c.phi.push_back(phi);
    const double tol = 1e-9 * std::max(1.0, phi.front());
    std::vector<double> r(quad_steps + 1);
    for (int n = 1; n <= n_max; ++n) {
        const auto& prev = c.phi.back();
        for (std::size_t i = 0; i <= quad_steps; ++i) {
            r[i] = mod(prev[i]);
        }
        std::vector<double> next(quad_steps + 1, 0.0);
        for (std::size_t i = quad_steps; i-- > 0;) {
            next[i] = next[i + 1] + 0.5 * (c.t[i + 1] - c.t[i]) * (r[i] + r[i + 1]);
        }
        for (std::size_t i = 0; i <= quad_steps; ++i) {
            if (next[i] < -tol || next[i] > prev[i] + tol) {
                throw ConsistencyError(fmt::format(
                    "Bihari ordering violated at n = {}, t = {}: phi_n = {}, phi_(n-1) = {}", n, c.t[i], next[i],
                    prev[i]));
            }
        }
        c.phi.push_back(std::move(next));
    }
    return c;
}

void write_bihari_csv(const BihariCurve& curve, const std::filesystem::path& path)
{
    std::vector<std::string> header{"t"};
    for (std::size_t n = 0; n < curve.phi.size(); ++n) {
        header.push_back(fmt::format("phi_{}", n));
    }
    CsvWriter w(path, header);
    for (std::size_t i = 0; i < curve.t.size(); ++i) {
        w.cell(curve.t[i]);
        for (const auto& phi : curve.phi) {
            w.cell(phi[i]);
        }
        w.end_row();
    }
}

// ---------------------------------------------------------------------------

double c_of_p(double p)
{
    return p * std::min(p - 1.0, 1.0) / 2.0;
}

ConstantsBundle compute_constants(const ConstantsInput& in)
{
    if (!(in.p > 1.0) || !std::isfinite(in.p)) {
        throw ParameterError(fmt::format("compute_constants needs p > 1, got {}", in.p));
    }
    if (!(in.lambda >= 0.0) || !(in.horizon > 0.0) || !(in.a >= 0.0)) {
        throw ParameterError("compute_constants needs lambda >= 0, T > 0, A >= 0");
    }
    if (!(in.k_prime_p > 0.0) || !(in.k_doubleprime_p > 0.0)) {
        throw ParameterError("k'_p and k''_p must be > 0");
    }
    if (!(in.terminal_moment >= 0.0) || !(in.h3_moment >= 0.0)) {
        throw ParameterError("moments must be >= 0");
    }
    if ((in.c1 && !(*in.c1 > 0.0)) || (in.c3 && !(*in.c3 > 0.0))) {
        throw ParameterError("c1 and c3 must be > 0");
    }
    if (in.c2 && !(*in.c2 > 0.0)) {
        throw ParameterError("c2 must be > 0");
    }
    const double p = in.p;
    const double T = in.horizon;
    ConstantsBundle cb;
    cb.p = p;
    cb.lambda = in.lambda;
    cb.horizon = T;
    cb.a = in.a;
    cb.k_prime_p = in.k_prime_p;
    cb.k_doubleprime_p = in.k_doubleprime_p;
    cb.c_p = c_of_p(p);
    cb.c_lambda_p_t = std::pow(2.0, p + 4.0) * (3.0 + 2.0 * in.lambda * in.lambda * T + std::pow(T, p));
    cb.theta = std::pow(2.0, p + 2.0) * in.k_prime_p;
    cb.d_lambda_p_theta = (p - 1.0) * std::pow(cb.theta, 1.0 / (p - 1.0)) +
                          p * in.lambda * in.lambda / std::min(1.0, p - 1.0);
    cb.m_p = 2.0 * in.k_prime_p;
    cb.k_lambda_p = 2.0 * in.k_prime_p * cb.d_lambda_p_theta;
    cb.c1 = in.c1.value_or(cb.k_lambda_p);
    cb.c3 = in.c3.value_or(cb.k_lambda_p);
    cb.c2 = in.c2.value_or(std::max(2.0 * in.k_prime_p, in.k_doubleprime_p));
    cb.mu0 = cb.c2 * std::exp(cb.c3 * T) * (in.terminal_moment + in.h3_moment);
    cb.m_bound = 2.0 * cb.mu0 + 2.0 * in.a * T;
    double t1 = std::max({T - std::numbers::ln2 / cb.c1, T - std::numbers::ln2 / cb.c3, 0.0});
    if (in.a > 0.0) {
        t1 = std::max(t1, T - 1.0 / (2.0 * in.a));
    }
    cb.t1 = t1;
    return cb;
}

void write_constants_csv(const ConstantsBundle& cb, const std::filesystem::path& path)
{
    CsvWriter w(path, {"name", "value"});
    const std::pair<const char*, double> rows[] = {
        {"p", cb.p},
        {"lambda", cb.lambda},
        {"T", cb.horizon},
        {"A", cb.a},
        {"k_prime_p", cb.k_prime_p},
        {"k_doubleprime_p", cb.k_doubleprime_p},
        {"theta", cb.theta},
        {"c_p", cb.c_p},
        {"c_lambda_p_T", cb.c_lambda_p_t},
        {"d_lambda_p_theta", cb.d_lambda_p_theta},
        {"m_p", cb.m_p},
        {"K_lambda_p", cb.k_lambda_p},
        {"c1", cb.c1},
        {"c2", cb.c2},
        {"c3", cb.c3},
        {"mu0", cb.mu0},
        {"M_bound", cb.m_bound},
        {"T1", cb.t1},
    };
    for (const auto& [name, value] : rows) {
        w.cell(name).cell(value);
        w.end_row();
    }
}

// ---------------------------------------------------------------------------

Lemma1Report check_lemma1(const DiscreteSolution& sol, const PathEnsemble& ens, const Generator& gen, double p,
                          std::size_t t_index)
{
    require_p(p);
    require_t_index(sol, t_index);
    if (gen.k() != sol.k() || gen.d() != sol.d() || ens.paths() != sol.paths() || !(ens.grid() == sol.grid())) {
        throw DimensionError("check_lemma1: solution, generator and ensemble shapes differ");
    }
    const std::size_t M = sol.paths();
    const std::size_t N = sol.steps();
    const std::size_t k = sol.k();
    const double dt = sol.grid().dt();
    const double cp = c_of_p(p);
    std::vector<double> lhs(M), rhs(M), slack(M);
    std::vector<double> g(k);
    for (std::size_t m = 0; m < M; ++m) {
        double zterm = 0.0;
        double gterm = 0.0;
        for (std::size_t i = t_index; i < N; ++i) {
            const auto y = sol.y(m, i);
            const double yn = norm2(y);
            if (yn == 0.0) {
                continue;
            }
            const auto z = sol.z(m, i);
            const double w = std::pow(yn, p - 2.0);
            const double zn = norm2(z);
            gen.eval(sol.grid().time(i), ens.value(m, i), y, z, g);
            double inner = 0.0;
            for (std::size_t a = 0; a < k; ++a) inner += y[a] * g[a];
            zterm += w * zn * zn * dt;
            gterm += w * inner * dt;
        }
        lhs[m] = std::pow(norm2(sol.y(m, t_index)), p) + cp * zterm;
        rhs[m] = std::pow(norm2(sol.y(m, N)), p) + p * gterm;
        slack[m] = rhs[m] - lhs[m];
    }
    const MeanSe s = mean_se(slack);
    return {t_index, mean_se(lhs).mean, mean_se(rhs).mean, s.mean, s.se};
}

AprioriReport check_apriori_bounds(const DiscreteSolution& sol, const PathEnsemble& ens, const EnvelopeA& env,
                                   const ConstantsBundle& cb, double p, std::size_t t_index)
{
    require_p(p);
    require_t_index(sol, t_index);
    env.validate();
    if (ens.paths() != sol.paths() || !(ens.grid() == sol.grid()) || ens.dim() != sol.d()) {
        throw DimensionError("check_apriori_bounds: solution and ensemble shapes differ");
    }
    const std::size_t M = sol.paths();
    const std::size_t N = sol.steps();
    const double dt = sol.grid().dt();
    const double T = sol.grid().horizon();
    const double t = sol.grid().time(t_index);
    const auto Md = static_cast<double>(M);

    double sup_mean = 0.0;
    double z_mean = 0.0;
    double phi_mean = 0.0;
    double f_mean = 0.0;
    double xi_mean = 0.0;
    std::vector<double> y_moment(N + 1, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
        double sup = 0.0;
        double zq = 0.0;
        double phi_int = 0.0;
        double f_int = 0.0;
        for (std::size_t i = t_index; i <= N; ++i) {
            const double yn = norm2(sol.y(m, i));
            sup = std::max(sup, std::pow(yn, p));
            y_moment[i] += std::pow(yn, p);
            if (i < N) {
                const double zn = norm2(sol.z(m, i));
                zq += zn * zn * dt;
                const auto B = ens.value(m, i);
                phi_int += std::pow(process_value(env.phi, B, sol.y(m, i)), p) * dt;
                f_int += process_value(env.f, B, sol.y(m, i)) * dt;
            }
        }
        sup_mean += sup;
        z_mean += std::pow(zq, p / 2.0);
        phi_mean += phi_int;
        f_mean += std::pow(f_int, p);
        xi_mean += std::pow(norm2(sol.y(m, N)), p);
    }
    sup_mean /= Md;
    z_mean /= Md;
    phi_mean /= Md;
    f_mean /= Md;
    xi_mean /= Md;
    double psi_int = 0.0;
    for (std::size_t i = t_index; i < N; ++i) {
        psi_int += env.psi(y_moment[i] / Md) * dt;
    }

    AprioriReport r;
    r.t_index = t_index;
    r.prop1_lhs = z_mean;
    r.prop1_rhs = cb.c_lambda_p_t * (sup_mean + env.psi(sup_mean) + phi_mean + f_mean);
    r.prop1_holds = r.prop1_lhs <= r.prop1_rhs;
    r.prop2_lhs = sup_mean;
    r.prop2_rhs = std::exp(cb.k_lambda_p * (T - t)) *
                  (cb.m_p * xi_mean + cb.m_p * f_mean + 0.5 * phi_mean + 0.5 * psi_int);
    r.prop2_holds = r.prop2_lhs <= r.prop2_rhs;
    return r;
}

}  // namespace bsde
