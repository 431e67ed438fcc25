// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "bsde/analysis.hpp"
#include "bsde/commands.hpp"
#include "bsde/config.hpp"
#include "bsde/modulus.hpp"
#include "bsde/oracle.hpp"
#include "bsde/solver.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace bsde;

namespace {

constexpr std::size_t kM = 1 << 14;
constexpr std::size_t kN = 50;
constexpr double kT = 1.0;
constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
    bool pass = false;
    std::string detail;
};

const PathEnsemble& ensemble()
{
    static const PathEnsemble ens = generate_ensemble(kM, kN, 1, kT, kSeed);
    return ens;
}

BasisSpec basis()
{
    return {3, default_ridge(kM)};
}

double s2_se(const LpNorms& n, double p)
{
    // delta method: se of m^{1/p} from the se of the mean m
    const double m = std::pow(n.sp, p);
    return std::pow(m, 1.0 / p - 1.0) / p * n.sp_moment_se;
}

Outcome criterion1()
{
    const auto start = std::chrono::steady_clock::now();
    const PathEnsemble& ens = ensemble();
    const OracleInstance inst{MartingaleCoordinate{0}, kT, 1};
    const PicardResult r = picard_solve(Generator::zero(1, 1), inst.terminal(), ens, basis());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const OracleErrors e = compare_to_oracle(r.solution, inst, ens, 2.0);
    return {e.sp_error <= 0.05 && e.z_rms_error <= 0.10 && secs <= 60.0,
            fmt::format("S2 error {:.4g} (<= 0.05), z RMS {:.4g} (<= 0.10), {:.2f} s (<= 60)", e.sp_error,
                        e.z_rms_error, secs)};
}

Outcome criterion2()
{
    const PathEnsemble& ens = ensemble();
    const OracleInstance inst{MartingaleSquare{}, kT, 1};
    const PicardResult r = picard_solve(Generator::zero(1, 1), inst.terminal(), ens, basis());
    const OracleErrors e = compare_to_oracle(r.solution, inst, ens, 2.0);
    const double ref = lp_norms(oracle_discrete(inst, ens), 2.0).sp;
    const double rel = e.sp_error / ref;
    return {rel <= 0.05, fmt::format("relative S2 error {:.4g} (<= 0.05)", rel)};
}

Outcome criterion3()
{
    const PathEnsemble& ens = ensemble();
    PicardOptions o;
    o.tol = 1e-4;
    const PicardResult r =
        picard_solve(Generator::linear(0.5, 0.0, 0.2, 1, 1), TerminalSpec::constant(1.0), ens, basis(), o);
    double y0 = 0.0;
    for (std::size_t m = 0; m < kM; ++m) y0 += r.solution.y(m, 0)[0];
    y0 /= static_cast<double>(kM);
    const double ref = std::exp(0.5) + 0.4 * (std::exp(0.5) - 1.0);
    const double rel = std::abs(y0 - ref) / ref;
    const bool ok = rel <= 0.02 && r.report.converged && r.report.iterations <= 10;
    return {ok, fmt::format("y0 {:.6f} vs {:.6f} (rel {:.3g} <= 0.02), {} iterations, converged={}", y0, ref, rel,
                            r.report.iterations, r.report.converged)};
}

PicardResult example1_run(PicardInit init, double tol, int max_iter)
{
    PicardOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    o.init = init;
    return picard_solve(Generator::example1(2.0, std::exp(-2.0), 1), TerminalSpec::coordinate(0), ensemble(),
                        basis(), o);
}

Outcome criterion4()
{
    // tol below the reachable noise floor so that at least five distances are recorded
    const PicardResult r = example1_run(ZeroInit{}, 1e-300, 8);
    const auto& d = r.report.dist_y;
    if (d.size() < 5) {
        return {false, fmt::format("only {} Picard distances recorded", d.size())};
    }
    bool mono = true;
    for (std::size_t n = 2; n < d.size(); ++n) {
        mono = mono && d[n] <= d[n - 1];
    }
    const double ratio = d[4] / d[0];
    std::string seq;
    for (std::size_t n = 0; n < std::min<std::size_t>(d.size(), 6); ++n) seq += fmt::format(" {:.3g}", d[n]);
    return {mono && ratio <= 0.1,
            fmt::format("dist_y nonincreasing from n=2: {}, dist_y(5)/dist_y(1) = {:.3g} (<= 0.1); dist_y:{}",
                        mono, ratio, seq)};
}

Outcome criterion5()
{
    const PicardResult a = example1_run(ZeroInit{}, 1e-10, 25);
    const PicardResult b = example1_run(ConstantFieldInit{1.0}, 1e-10, 25);
    const double dist = std::sqrt(picard_distance(a.solution, b.solution, 2.0).dy);
    const double se = std::max(s2_se(lp_norms(a.solution, 2.0), 2.0), s2_se(lp_norms(b.solution, 2.0), 2.0));
    const bool ok = a.report.converged && b.report.converged && dist <= 3.0 * se;
    return {ok, fmt::format("S2 distance {:.3g} <= 3 x se {:.3g}; converged {}/{}", dist, se, a.report.converged,
                            b.report.converged)};
}

Outcome criterion6()
{
    const BihariCurve lin = bihari_recursion(Modulus::linear(1.0), 1.0, 1.0, 0.0, 10);
    double worst = 0.0;
    double fact = 1.0;
    for (int n = 0; n <= 10; ++n) {
        fact *= n + 1;
        worst = std::max(worst, std::abs(lin.phi[static_cast<std::size_t>(n)].front() - 1.0 / fact));
    }

    // rho(u) = h(u^{1/2})^2 for the Example1 generator, constants from a Monte Carlo run
    const Modulus rho = transform_modulus(Modulus::example1_h(2.0, std::exp(-2.0), 10.0), H1StarToH1{2.0}).modulus;
    const Generator gen = Generator::example1(2.0, std::exp(-2.0), 1);
    ConstantsInput in;
    in.p = 2.0;
    in.lambda = 1.0;
    in.horizon = kT;
    in.a = linear_growth_coefficient(rho);
    double xi = 0.0;
    for (std::size_t m = 0; m < kM; ++m) xi += std::pow(ensemble().value(m, kN)[0], 2.0);
    in.terminal_moment = xi / static_cast<double>(kM);
    in.h3_moment = check_h3(gen, ensemble(), 2.0).estimate;
    const ConstantsBundle cb = compute_constants(in);
    const BihariCurve ex = bihari_recursion(rho, cb.m_bound, kT, cb.t1, 60);
    bool mono = true;
    for (std::size_t n = 1; n < ex.phi.size(); ++n) {
        mono = mono && ex.phi[n].front() <= ex.phi[n - 1].front();
    }
    const double last = ex.phi.back().front();
    return {worst <= 1e-6 && mono && last <= 1e-3,
            fmt::format("linear max error {:.3g} (<= 1e-6); chain M={:.3g} T1={:.6g}: phi_60(T1) = {:.3g} "
                        "(<= 1e-3), monotone {}",
                        worst, cb.m_bound, cb.t1, last, mono)};
}

Outcome criterion7()
{
    struct Case {
        const char* name;
        Modulus mod;
        double w;
        OsgoodVerdict want;
    };
    const Case cases[] = {
        {"Linear w=1", Modulus::linear(1.0), 1.0, OsgoodVerdict::Divergent},
        {"Power(1/2) w=1", Modulus::power(1.0, 0.5), 1.0, OsgoodVerdict::Convergent},
        {"Example1H w=p", Modulus::example1_h(2.0), 2.0, OsgoodVerdict::Divergent},
        {"Example1H w=p+1", Modulus::example1_h(2.0), 3.0, OsgoodVerdict::Convergent},
    };
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
        const OsgoodResult r = osgood_classify(c.mod, c.w, 0.1, 8);
        ok = ok && r.verdict == c.want;
        detail += fmt::format("{} -> {}; ", c.name, to_string(r.verdict));
    }
    return {ok, detail};
}

Modulus random_concave(std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> count(3, 12);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = count(rng);
    std::vector<double> gaps(static_cast<std::size_t>(n));
    std::vector<double> slopes(static_cast<std::size_t>(n));
    for (auto& g : gaps) g = 0.05 + unit(rng);
    double s = 0.5 + 4.0 * unit(rng);
    for (auto& sl : slopes) {
        sl = s;
        s *= 0.2 + 0.8 * unit(rng);
    }
    std::vector<double> u{0.0}, v{0.0};
    for (int i = 0; i < n; ++i) {
        u.push_back(u.back() + gaps[static_cast<std::size_t>(i)]);
        v.push_back(v.back() + gaps[static_cast<std::size_t>(i)] * slopes[static_cast<std::size_t>(i)]);
    }
    return Modulus::tabulated(u, v);
}

Outcome criterion8()
{
    std::mt19937_64 rng(8);
    int shape_fail = 0;
    int osgood_fail = 0;
    int inputs = 0;
    for (int i = 0; i < 50; ++i) {
        const Modulus mod = random_concave(rng);
        if (!check_shape(mod).all()) {
            return {false, "generated modulus failed check_shape"};
        }
        for (double r : {1.5, 2.0, 3.0}) {
            const Modulus out = transform_modulus(mod, PowerRoot{r}).modulus;
            if (!check_shape(out, 10000, 1e-9).all()) ++shape_fail;
        }
        if (osgood_classify(mod, 1.0, 0.1 * mod.domain_cap(), 8).verdict != OsgoodVerdict::Divergent) {
            continue;
        }
        ++inputs;
        for (double r : {0.5, 0.75}) {
            const Modulus out = transform_modulus(mod, PowerRoot{r}).modulus;
            if (osgood_classify(out, 1.0, 0.1 * out.domain_cap(), 8).verdict != OsgoodVerdict::Divergent) {
                ++osgood_fail;
            }
        }
    }
    return {shape_fail == 0 && osgood_fail == 0 && inputs == 50,
            fmt::format("{} of 150 PowerRoot(r >= 1.5) outputs fail check_shape; {} of {} PowerRoot(r < 1) "
                        "outputs not Divergent ({} divergent inputs)",
                        shape_fail, osgood_fail, 2 * inputs, inputs)};
}

Outcome criterion9()
{
    const PathEnsemble& ens = ensemble();
    const Generator zero = Generator::zero(1, 1);
    const PicardResult m = picard_solve(zero, TerminalSpec::coordinate(0), ens, basis());
    bool ok = true;
    std::string detail;
    for (std::size_t ti : {std::size_t{0}, kN / 2}) {
        const Lemma1Report r = check_lemma1(m.solution, ens, zero, 2.0, ti);
        ok = ok && std::abs(r.slack) <= 3.0 * r.std_error;
        detail += fmt::format("martingale t={}: slack {:.3g} (se {:.3g}); ", ens.grid().time(ti), r.slack, r.std_error);
    }
    const Generator ex = Generator::example1(2.0, std::exp(-2.0), 1);
    const PicardResult e = example1_run(ZeroInit{}, 1e-10, 25);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t ti = 0; ti <= kN; ++ti) {
        const Lemma1Report r = check_lemma1(e.solution, ens, ex, 2.0, ti);
        const double z = r.std_error > 0.0 ? r.slack / r.std_error : (r.slack >= 0.0 ? 0.0 : -INFINITY);
        worst = std::min(worst, z);
    }
    ok = ok && worst >= -3.0;
    detail += fmt::format("Example1: min slack/se over grid = {:.3g} (>= -3)", worst);
    return {ok, detail};
}

Outcome criterion10()
{
    ConstantsInput a;
    a.p = 2.0;
    a.lambda = 0.0;
    a.horizon = 1.0;
    const ConstantsBundle ca = compute_constants(a);
    ConstantsInput b;
    b.p = 2.0;
    b.horizon = 2.0;
    b.a = 0.5;
    b.c1 = std::log(2.0);
    b.c3 = std::log(2.0);
    const ConstantsBundle cb = compute_constants(b);
    const bool ok = ca.c_p == 1.0 && ca.c_lambda_p_t == 256.0 && cb.t1 == 1.0;
    return {ok, fmt::format("c(2) = {}, c_(0,2,1) = {}, T1 = {}", ca.c_p, ca.c_lambda_p_t, cb.t1)};
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome criterion11()
{
    const auto root = std::filesystem::temp_directory_path() / "bsde_lab_acceptance_c11";
    std::filesystem::remove_all(root);
    const std::string doc = fmt::format(
        R"({{"paths": {{"M": {}, "N": {}, "d": 1, "T": {}, "seed": {}}},
            "solver": {{"basis_degree": 3, "deterministic_reduction": true}},
            "generator": "Zero", "terminal": {{"kind": "Coordinate", "index": 0}}}})",
        kM, kN, kT, kSeed);
    std::vector<std::filesystem::path> dirs{root / "a", root / "b"};
    for (const auto& dir : dirs) {
        RunConfig cfg = parse_config(doc);
        cfg.output_dir = dir;
        std::ostringstream log;
        if (run(Command::Solve, cfg, log) != kExitOk) {
            return {false, "solve failed"};
        }
    }
    bool ok = true;
    std::string detail;
    for (const char* f : {"solution.csv", "picard_report.csv", "solve_summary.csv"}) {
        const std::string a = slurp(dirs[0] / f);
        const std::string b = slurp(dirs[1] / f);
        const bool same = !a.empty() && a == b;
        ok = ok && same;
        detail += fmt::format("{} {} ({} bytes); ", f, same ? "identical" : "DIFFERS", a.size());
    }
    std::filesystem::remove_all(root);
    return {ok, detail};
}

}  // namespace

int main()
{
    const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                         criterion5, criterion6, criterion7, criterion8,
                                                         criterion9, criterion10, criterion11};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << fmt::format("CRITERION {:>2}: {}  {}", i + 1, o.pass ? "PASS" : "FAIL", o.detail) << std::endl;
    }
    std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failed, criteria.size()) << std::endl;
    return failed == 0 ? 0 : 1;
}
