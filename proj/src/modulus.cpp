#include "bsde/modulus.hpp"

#include "bsde/csv.hpp"
#include "bsde/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace bsde {

namespace {

struct Example1HEval {
    double p;
    double delta;
    double h_delta;
    double slope_delta;

    explicit Example1HEval(const Example1HFamily& f) : p(f.p), delta(f.delta)
    {
        const double a = 1.0 / p;
        const double L = -std::log(delta);
        h_delta = delta * std::pow(L, a);
        slope_delta = std::pow(L, a) - a * std::pow(L, a - 1.0);
    }

    double operator()(double x) const
    {
        if (x == 0.0) {
            return 0.0;
        }
        if (x <= delta) {
            return x * std::pow(-std::log(x), 1.0 / p);
        }
        return slope_delta * (x - delta) + h_delta;
    }
};

double eval_tabulated(const TabulatedFamily& tab, double u)
{
    const auto& us = tab.u;
    const auto& vs = tab.v;
    const std::size_t n = us.size();
    if (u >= us[n - 1]) {
        const double slope = (vs[n - 1] - vs[n - 2]) / (us[n - 1] - us[n - 2]);
        return vs[n - 1] + slope * (u - us[n - 1]);
    }
    // first breakpoint strictly greater than u; always >= 1 since u >= 0 = u_0
    const auto it = std::upper_bound(us.begin(), us.end(), u);
    const std::size_t hi = static_cast<std::size_t>(it - us.begin());
    const std::size_t lo = hi - 1;
    const double w = (u - us[lo]) / (us[hi] - us[lo]);
    return vs[lo] + w * (vs[hi] - vs[lo]);
}

void validate(const ModulusFamily& family, double cap)
{
    if (!(cap > 0.0) || !std::isfinite(cap)) {
        throw ParameterError("modulus domain_cap must be a positive finite number");
    }
    std::visit(
        [](const auto& f) {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, LinearFamily>) {
                if (!(f.mu >= 0.0) || !std::isfinite(f.mu)) {
                    throw ParameterError("Linear modulus requires mu >= 0");
                }
            } else if constexpr (std::is_same_v<F, PowerFamily>) {
                if (!(f.c > 0.0) || !std::isfinite(f.c)) {
                    throw ParameterError("Power modulus requires c > 0");
                }
                if (!(f.alpha > 0.0 && f.alpha <= 2.0)) {
                    throw ParameterError("Power modulus requires alpha in (0, 2]");
                }
            } else if constexpr (std::is_same_v<F, Example1HFamily>) {
                if (!(f.p > 1.0) || !std::isfinite(f.p)) {
                    throw ParameterError("Example1H modulus requires p > 1");
                }
                if (!(f.delta > 0.0 && f.delta < 1.0)) {
                    throw ParameterError("Example1H modulus requires delta in (0, 1)");
                }
                // h'(delta-) > 0 iff |ln delta| > 1/p; below that h is not increasing.
                if (!(-std::log(f.delta) > 1.0 / f.p)) {
                    throw ParameterError(fmt::format(
                        "Example1H delta={} too large: h is not increasing on (0, delta]", f.delta));
                }
            } else {
                const auto& u = f.u;
                const auto& v = f.v;
                if (u.size() != v.size() || u.size() < 2) {
                    throw ParameterError("Tabulated modulus needs >= 2 (u, v) pairs of equal length");
                }
                if (u[0] != 0.0 || v[0] != 0.0) {
                    throw ParameterError("Tabulated modulus must start at (0, 0)");
                }
                for (std::size_t i = 0; i < u.size(); ++i) {
                    if (!std::isfinite(u[i]) || !std::isfinite(v[i]) || v[i] < 0.0) {
                        throw ParameterError("Tabulated modulus values must be finite and >= 0");
                    }
                    if (i > 0 && !(u[i] > u[i - 1])) {
                        throw ParameterError("Tabulated modulus breakpoints must be strictly increasing");
                    }
                }
            }
        },
        family);
}

}  // namespace

Modulus::Modulus(ModulusFamily family, double domain_cap)
    : family_(std::move(family)), domain_cap_(domain_cap)
{
    validate(family_, domain_cap_);
}

Modulus Modulus::linear(double mu, double domain_cap)
{
    return Modulus(LinearFamily{mu}, domain_cap);
}

Modulus Modulus::power(double c, double alpha, double domain_cap)
{
    return Modulus(PowerFamily{c, alpha}, domain_cap);
}

Modulus Modulus::example1_h(double p, double delta, double domain_cap)
{
    return Modulus(Example1HFamily{p, delta}, domain_cap);
}

Modulus Modulus::tabulated(std::vector<double> u, std::vector<double> v)
{
    const double cap = u.empty() ? 0.0 : u.back();
    return Modulus(TabulatedFamily{std::move(u), std::move(v)}, cap);
}

double Modulus::operator()(double u) const
{
    if (!(u >= 0.0)) {
        throw ParameterError(fmt::format("modulus evaluated at negative argument {}", u));
    }
    return std::visit(
        [u](const auto& f) -> double {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, LinearFamily>) {
                return f.mu * u;
            } else if constexpr (std::is_same_v<F, PowerFamily>) {
                return u == 0.0 ? 0.0 : f.c * std::pow(u, f.alpha);
            } else if constexpr (std::is_same_v<F, Example1HFamily>) {
                return Example1HEval(f)(u);
            } else {
                return eval_tabulated(f, u);
            }
        },
        family_);
}

std::string Modulus::describe() const
{
    return std::visit(
        [this](const auto& f) -> std::string {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, LinearFamily>) {
                return fmt::format("Linear(mu={})", f.mu);
            } else if constexpr (std::is_same_v<F, PowerFamily>) {
                return fmt::format("Power(c={}, alpha={})", f.c, f.alpha);
            } else if constexpr (std::is_same_v<F, Example1HFamily>) {
                return fmt::format("Example1H(p={}, delta={})", f.p, f.delta);
            } else {
                return fmt::format("Tabulated({} breakpoints, cap={})", f.u.size(), domain_cap_);
            }
        },
        family_);
}

// ---------------------------------------------------------------------------

std::vector<double> shape_grid(double cap, std::size_t grid_size)
{
    const std::size_t n_geo = grid_size / 2;
    const std::size_t n_uni = grid_size - n_geo;
    std::vector<double> g;
    g.reserve(grid_size);
    const double lo = cap * 1e-12;
    for (std::size_t i = 0; i < n_geo; ++i) {
        const double f = n_geo > 1 ? static_cast<double>(i) / static_cast<double>(n_geo - 1) : 1.0;
        g.push_back(lo * std::pow(cap / lo, f));
    }
    for (std::size_t i = 1; i <= n_uni; ++i) {
        g.push_back(cap * static_cast<double>(i) / static_cast<double>(n_uni));
    }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

ShapeReport check_shape(const Modulus& mod, std::size_t grid_size, double tol)
{
    if (grid_size < 3) {
        throw ParameterError("check_shape requires grid_size >= 3");
    }
    if (!(tol > 0.0)) {
        throw ParameterError("check_shape requires tol > 0");
    }
    const auto grid = shape_grid(mod.domain_cap(), grid_size);
    std::vector<double> pts;
    pts.reserve(grid.size() + 1);
    pts.push_back(0.0);
    pts.insert(pts.end(), grid.begin(), grid.end());
    std::vector<double> vals(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        vals[i] = mod(pts[i]);
    }

    ShapeReport rep;
    rep.grid_size = grid.size();
    rep.zero_at_zero = vals[0] == 0.0;
    rep.positive_on_positive =
        std::all_of(vals.begin() + 1, vals.end(), [](double v) { return v > 0.0; });

    double mono_defect = -std::numeric_limits<double>::infinity();
    double conc_defect = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < grid.size(); ++i) {
        // adjacent pair (a, b) of the positive grid
        const std::size_t ia = i;
        const std::size_t ib = i + 1;
        const double a = pts[ia];
        const double b = pts[ib];
        mono_defect = std::max(mono_defect, vals[ia] - vals[ib]);
        const double mid = mod(0.5 * (a + b));
        conc_defect = std::max(conc_defect, 0.5 * (vals[ia] + vals[ib]) - mid);
    }
    // three-point chords catch convexity at the spacing of a nonuniform grid
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
        const double a = pts[i - 1];
        const double b = pts[i];
        const double c = pts[i + 1];
        const double w = (b - a) / (c - a);
        const double chord = (1.0 - w) * vals[i - 1] + w * vals[i + 1];
        conc_defect = std::max(conc_defect, chord - vals[i]);
    }
    rep.is_nondecreasing = mono_defect <= tol;
    rep.is_concave = conc_defect <= tol;
    rep.worst_violation = std::max(mono_defect, conc_defect) - tol;
    return rep;
}

// ---------------------------------------------------------------------------

const char* to_string(OsgoodVerdict v) noexcept
{
    switch (v) {
    case OsgoodVerdict::Divergent:
        return "Divergent";
    case OsgoodVerdict::Convergent:
        return "Convergent";
    case OsgoodVerdict::Inconclusive:
        break;
    }
    return "Inconclusive";
}

OsgoodResult osgood_classify(const Modulus& mod, double weight_exponent, double u0, int eps_decades,
                             const OsgoodOptions& opts)
{
    if (!(weight_exponent >= 1.0)) {
        throw ParameterError("osgood_classify requires weight_exponent >= 1");
    }
    if (!(u0 > 0.0) || u0 > mod.domain_cap() * (1.0 + 1e-12)) {
        throw ParameterError("osgood_classify requires u0 in (0, domain_cap]");
    }
    if (eps_decades < 3) {
        throw ParameterError("osgood_classify requires eps_decades >= 3");
    }

    OsgoodResult res;
    const double w = weight_exponent;
    bool unbounded = false;
    // In s = ln u the integrand u^{w-1}/mod(u)^w du becomes (u/mod(u))^w ds.
    auto integrand = [&](double s) {
        const double u = std::exp(s);
        const double m = mod(u);
        if (!(m > 0.0)) {
            unbounded = true;
            return std::numeric_limits<double>::infinity();
        }
        return std::pow(u / m, w);
    };

    std::vector<double> decade(static_cast<std::size_t>(eps_decades));
    double running = 0.0;
    double upper = u0;
    for (int j = 1; j <= eps_decades; ++j) {
        const double lower = u0 * std::pow(10.0, -j);
        double piece = std::numeric_limits<double>::infinity();
        if (mod(lower) > 0.0) {
            try {
                double err = 0.0;
                piece = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                    integrand, std::log(lower), std::log(upper), 15, opts.quadrature_tol, &err);
            } catch (const std::exception&) {
                piece = std::numeric_limits<double>::infinity();
            }
        } else {
            unbounded = true;
        }
        if (!std::isfinite(piece)) {
            unbounded = true;
        }
        decade[static_cast<std::size_t>(j - 1)] = piece;
        running += piece;
        res.eps.push_back(lower);
        res.integral.push_back(running);
        upper = lower;
    }
    res.increments.assign(decade.begin() + 1, decade.end());

    if (unbounded) {
        res.integrand_unbounded = true;
        res.verdict = OsgoodVerdict::Divergent;
        return res;
    }

    const std::size_t n = res.increments.size();
    const std::size_t start = std::min(n / 2, n - 2);
    const double first = res.increments.front();
    double tail_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = start; i < n; ++i) {
        tail_min = std::min(tail_min, res.increments[i]);
    }
    res.tail_ratio = first > 0.0 ? tail_min / first : 0.0;

    // Fit log(increment) against log log(1/u) over the tail. Increments of
    // 1/(u |ln u|^a) decay like |ln u|^{-a}: summable iff a > 1.
    bool fit_ok = tail_min > 0.0;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t m = 0;
    for (std::size_t i = start; i < n && fit_ok; ++i) {
        // increments[i] covers decade j = i + 2 with geometric midpoint u0 10^{-(j - 1/2)}
        const double j = static_cast<double>(i + 2);
        const double L = -(std::log(u0) - (j - 0.5) * std::log(10.0));
        if (!(L > 0.0)) {
            fit_ok = false;
            break;
        }
        const double x = std::log(L);
        const double y = std::log(res.increments[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    const double denom = static_cast<double>(m) * sxx - sx * sx;
    if (fit_ok && m >= 2 && denom > 0.0) {
        res.decay_exponent = (static_cast<double>(m) * sxy - sx * sy) / denom;
        if (res.decay_exponent >= opts.divergent_above) {
            res.verdict = OsgoodVerdict::Divergent;
        } else if (res.decay_exponent <= opts.convergent_below && res.increments.back() < first) {
            res.verdict = OsgoodVerdict::Convergent;
        }
    } else if (res.tail_ratio >= opts.tail_ratio_threshold) {
        res.verdict = OsgoodVerdict::Divergent;
    }
    return res;
}

double linear_growth_coefficient(const Modulus& mod, std::size_t grid_size)
{
    if (grid_size < 2) {
        throw ParameterError("linear_growth_coefficient requires grid_size >= 2");
    }
    const auto shape = check_shape(mod, std::max<std::size_t>(grid_size, 3), 1e-9);
    if (!shape.concave_modulus()) {
        throw ParameterError("linear_growth_coefficient requires a nondecreasing concave modulus with "
                             "mod(0) = 0, got " + mod.describe());
    }
    const double cap = mod.domain_cap();
    double best = 0.0;
    for (std::size_t i = 0; i < grid_size; ++i) {
        const double u = cap * static_cast<double>(i) / static_cast<double>(grid_size - 1);
        best = std::max(best, mod(u) / (u + 1.0));
    }
    return best;
}

// ---------------------------------------------------------------------------

std::vector<double> transform_grid(double cap, const TransformGrid& grid)
{
    if (!(cap > 0.0) || !std::isfinite(cap)) {
        throw ParameterError("transform grid needs a positive finite cap");
    }
    std::vector<double> raw;
    const int n_geo = grid.decades * grid.points_per_decade;
    const double lo = cap * std::pow(10.0, -grid.decades);
    for (int i = 0; i <= n_geo; ++i) {
        raw.push_back(lo * std::pow(10.0, static_cast<double>(i) / grid.points_per_decade));
    }
    for (int i = 1; i <= grid.uniform_points; ++i) {
        raw.push_back(cap * static_cast<double>(i) / grid.uniform_points);
    }
    raw.push_back(cap);
    std::sort(raw.begin(), raw.end());
    std::vector<double> out{0.0};
    for (double u : raw) {
        if (u > 0.0 && u <= cap && u > out.back() * (1.0 + 1e-9)) {
            out.push_back(u);
        }
    }
    out.back() = cap;
    return out;
}

namespace {

Modulus tabulate(const std::vector<double>& grid, const std::vector<double>& vals)
{
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(vals[i])) {
            throw NumericalError(fmt::format("non-finite transformed value at u={}", grid[i]));
        }
        if (i == 0 || grid[i] > grid[i - 1]) {
            ++distinct;
        }
    }
    if (distinct < 3) {
        throw ParameterError("transform grid degenerate: fewer than 3 distinct samples");
    }
    return Modulus::tabulated(grid, vals);
}

Modulus power_root(const Modulus& mod, double r, const TransformGrid& g)
{
    if (!(r > 0.0) || !std::isfinite(r)) {
        throw ParameterError("PowerRoot requires r > 0");
    }
    const auto grid = transform_grid(std::pow(mod.domain_cap(), r), g);
    std::vector<double> vals(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        vals[i] = grid[i] == 0.0 ? 0.0 : std::pow(mod(std::pow(grid[i], 1.0 / r)), r);
    }
    return tabulate(grid, vals);
}

}  // namespace

TransformResult transform_modulus(const Modulus& mod, const TransformKind& kind,
                                  const TransformGrid& grid)
{
    return std::visit(
        [&](const auto& k) -> TransformResult {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, PowerRoot>) {
                return {power_root(mod, k.r, grid), std::nullopt};
            } else if constexpr (std::is_same_v<K, H1StarToH1>) {
                if (!(k.p > 1.0)) {
                    throw ParameterError("H1StarToH1 requires p > 1");
                }
                return {power_root(mod, k.p, grid), std::nullopt};
            } else {
                if (!(k.p > 1.0)) {
                    throw ParameterError("H1ppToH1 requires p > 1");
                }
                if (!(k.q >= k.p)) {
                    throw ParameterError("H1ppToH1 requires q >= p");
                }
                const double p = k.p;
                const double q = k.q;
                // rho1(u) = kappa(u^q)^{1/q}
                const auto g1 = transform_grid(std::pow(mod.domain_cap(), 1.0 / q), grid);
                std::vector<double> rho1(g1.size());
                for (std::size_t i = 0; i < g1.size(); ++i) {
                    rho1[i] = g1[i] == 0.0 ? 0.0 : std::pow(mod(std::pow(g1[i], q)), 1.0 / q);
                }
                const Modulus rho2 = concave_majorant(g1, rho1);

                const auto g2 = transform_grid(std::pow(g1.back(), p), grid);
                std::vector<double> bar(g2.size());
                for (std::size_t i = 0; i < g2.size(); ++i) {
                    bar[i] = g2[i] == 0.0 ? 0.0 : std::pow(rho2(std::pow(g2[i], 1.0 / p)), p) + g2[i];
                }
                Modulus out = tabulate(g2, bar);

                DominationReport dom;
                for (std::size_t i = 1; i < g1.size(); ++i) {
                    if (rho1[i] > 0.0) {
                        dom.majorant_ratio = std::max(dom.majorant_ratio, rho2(g1[i]) / rho1[i]);
                    }
                }
                const double r21 = rho2(1.0);
                if (std::abs(r21) <= 1e-12) {
                    dom.note = "rho2(1) = 0: domination check skipped, rho_bar(u) = u near 0";
                } else {
                    dom.evaluated = true;
                    dom.K = 1.0 + 1.0 / std::pow(r21, p);
                    for (std::size_t i = 1; i < g2.size() && g2[i] <= 1.0; ++i) {
                        const double rhs = dom.K * std::pow(2.0, p) *
                                           std::pow(mod(std::pow(g2[i], q / p)), p / q);
                        const double ratio = rhs > 0.0 ? bar[i] / rhs
                                                       : std::numeric_limits<double>::infinity();
                        dom.max_ratio = std::max(dom.max_ratio, ratio);
                    }
                    dom.holds = dom.max_ratio <= 1.0 + 1e-9;
                }
                return {std::move(out), dom};
            }
        },
        kind);
}

Modulus concave_majorant(const std::vector<double>& u, const std::vector<double>& v)
{
    if (u.size() != v.size() || u.size() < 2) {
        throw ParameterError("concave_majorant needs >= 2 samples of equal length");
    }
    if (u[0] != 0.0 || v[0] != 0.0) {
        throw ParameterError("concave_majorant samples must start at (0, 0)");
    }
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!std::isfinite(u[i]) || !std::isfinite(v[i]) || v[i] < 0.0) {
            throw ParameterError("concave_majorant samples must be finite with v >= 0");
        }
        if (i > 0 && !(u[i] > u[i - 1])) {
            throw ParameterError("concave_majorant samples must be strictly ascending in u");
        }
    }

    // Upper hull, left to right; a point on or below the chord of its
    // neighbours is dropped.
    std::vector<std::size_t> hull;
    hull.reserve(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        while (hull.size() >= 2) {
            const std::size_t a = hull[hull.size() - 2];
            const std::size_t b = hull[hull.size() - 1];
            const double cross = (v[b] - v[a]) * (u[i] - u[a]) - (v[i] - v[a]) * (u[b] - u[a]);
            if (cross > 0.0) {
                break;
            }
            hull.pop_back();
        }
        hull.push_back(i);
    }

    // Monotonize: hold the maximum flat to the right end.
    std::size_t peak = 0;
    for (std::size_t i = 1; i < hull.size(); ++i) {
        if (v[hull[i]] > v[hull[peak]]) {
            peak = i;
        }
    }
    std::vector<double> hu, hv;
    for (std::size_t i = 0; i <= peak; ++i) {
        hu.push_back(u[hull[i]]);
        hv.push_back(v[hull[i]]);
    }
    if (hu.back() < u.back()) {
        hu.push_back(u.back());
        hv.push_back(hv.back());
    }
    return Modulus::tabulated(std::move(hu), std::move(hv));
}

// ---------------------------------------------------------------------------

void write_modulus_csv(const Modulus& mod, const std::filesystem::path& path)
{
    const auto* tab = std::get_if<TabulatedFamily>(&mod.family());
    if (tab == nullptr) {
        throw ParameterError("only tabulated moduli serialize to CSV");
    }
    CsvWriter w(path, {"u", "v"});
    for (std::size_t i = 0; i < tab->u.size(); ++i) {
        w.cell(tab->u[i]).cell(tab->v[i]).end_row();
    }
}

Modulus read_modulus_csv(const std::filesystem::path& path)
{
    const auto rows = read_csv(path);
    if (rows.empty() || rows[0].size() != 2 || rows[0][0] != "u" || rows[0][1] != "v") {
        throw FormatError("modulus CSV must start with header 'u,v': " + path.string());
    }
    std::vector<double> u, v;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2) {
            throw FormatError(fmt::format("modulus CSV row {} does not have 2 columns", i + 1));
        }
        try {
            u.push_back(std::stod(rows[i][0]));
            v.push_back(std::stod(rows[i][1]));
        } catch (const std::exception&) {
            throw FormatError(fmt::format("modulus CSV row {} is not numeric", i + 1));
        }
    }
    return Modulus::tabulated(std::move(u), std::move(v));
}

}  // namespace bsde
