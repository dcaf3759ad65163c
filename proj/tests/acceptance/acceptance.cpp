// Acceptance checks: one PASS/FAIL line per criterion.
//
// Exit status is 0 when every criterion passes or fails only where the README lists a known gap;
// --strict turns every FAIL into a non-zero exit.

#include "oracles.hpp"

#include "epinomic/calibrate.hpp"
#include "epinomic/config.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <set>

using namespace epinomic;
using namespace epinomic::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

CountryDataset& country(const std::string& code) {
    static std::map<std::string, CountryDataset> cache;
    auto it = cache.find(code);
    if (it == cache.end()) it = cache.emplace(code, load_country_dataset(packaged(code))).first;
    return it->second;
}

ScenarioSpec factual_2020(const CountryDataset& ds, const CountryConfig& cfg) {
    ScenarioFile f;
    f.spec.name = "factual_" + ds.code;
    f.spec.start = cfg.seed_date;
    f.spec.end = make_date(2021, 1, 1);
    f.factual_policy = true;
    return resolve_scenario(f, ds, cfg);
}

Outcome joint_fixed_point() {
    const auto& ds = country("BE");
    CountryConfig cfg = country_config_for(ds);
    ScenarioSpec spec;
    spec.country = ds.code;
    spec.start = make_date(2020, 1, 1);
    spec.end = spec.start + std::chrono::days{365};
    spec.exogenous = false;
    auto t0 = Clock::now();
    RunContext ctx = make_context(spec, ds, cfg);
    RunState st = initial_state(spec, ctx);
    const RunState first = st;
    double econ_drift = 0.0;
    auto drift = [&](const Vec& a, const Vec& b) {
        return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
    };
    for (int d = 0; d < 365; ++d) {
        step_day(st, ctx);
        econ_drift = std::max({econ_drift, drift(st.econ.x, first.econ.x), drift(st.econ.l, first.econ.l),
                               drift(st.econ.d, first.econ.d), drift(st.econ.c, first.econ.c),
                               drift(st.econ.f, first.econ.f)});
        econ_drift = std::max(econ_drift, (st.econ.S - first.econ.S).cwiseAbs().maxCoeff() /
                                              first.econ.S.cwiseAbs().maxCoeff());
    }
    double secs = seconds_since(t0);
    bool epi_exact = true;
    for (auto m : EpiState::members) epi_exact = epi_exact && st.epi.*m == first.epi.*m;
    return {epi_exact && econ_drift <= 1e-9 && secs < 10.0,
            fmt::format("BE 365 d: epi exact={}, econ max rel drift {:.2e}, {:.2f} s", epi_exact, econ_drift, secs)};
}

/// Worst relative drift of per-(age, patch) totals while stepping a run day by day.
double conservation_drift(const ScenarioSpec& spec, const CountryDataset& ds, const CountryConfig& cfg) {
    RunContext ctx = make_context(spec, ds, cfg);
    RunState st = initial_state(spec, ctx);
    const Mat start = st.epi.total();
    double worst = 0.0;
    for (Date d = spec.start; d < spec.end; d += std::chrono::days{1}) {
        step_day(st, ctx);
        worst = std::max(worst, (st.epi.total() - start).cwiseQuotient(start).cwiseAbs().maxCoeff());
    }
    return worst;
}

Outcome conservation() {
    double worst = 0.0;
    std::string detail;
    for (const char* code : {"BE", "SWE"}) {
        const auto& ds = country(code);
        CountryConfig cfg = country_config_for(ds);
        double w = conservation_drift(factual_2020(ds, cfg), ds, cfg);
        ScenarioVariant v;
        v.nu = 7.0;
        w = std::max(w, conservation_drift(scenario_library("scenario3", v, ds, cfg), ds, cfg));
        detail += fmt::format("{} {:.1e}  ", code, w);
        worst = std::max(worst, w);
    }
    return {worst < 1e-8, "factual 2020 + scenario3 runs, max rel drift: " + detail};
}

Outcome r0_machinery() {
    auto ds = synthetic_dataset(2, 3);
    EpiParams p = EpiParams::defaults();
    p.beta = calibrate_beta(3.0, p, ds);
    double r = next_generation_R0(p, ds);
    const double b1 = 0.013, b2 = 0.047;
    p.beta = b1;
    double r1 = next_generation_R0(p, ds);
    p.beta = b2;
    double r2 = next_generation_R0(p, ds);
    double lin = rel_diff(r2 / r1, b2 / b1);
    return {std::abs(r - 3.0) <= 1e-6 && lin < 1e-10,
            fmt::format("round trip R0 = {:.10f}, two-point linearity rel err {:.1e}", r, lin)};
}

Outcome production_ordering() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int violations = 0, strict = 0;
    const int K = 5;
    for (int trial = 0; trial < 100; ++trial) {
        Mat A(K, K), crit(K, K), S(K, K);
        Vec x0(K);
        for (int k = 0; k < K; ++k) x0(k) = 50.0 + 100.0 * u(rng);
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j) {
                A(i, j) = u(rng) < 0.2 ? 0.0 : 0.2 * u(rng);
                double r = u(rng);
                crit(i, j) = A(i, j) == 0.0 ? 0.0 : (r < 0.4 ? 1.0 : (r < 0.7 ? 0.5 : 0.0));
                S(i, j) = A(i, j) * x0(j) * 3.0 * u(rng);
            }
        // Output can never exceed x0, so capacity is compared where it can bind.
        Vec pbl = input_capacity(S, A, crit, x0).cwiseMin(x0);
        Vec leo = leontief_capacity(S, A).cwiseMin(x0);
        violations += int(((pbl.array() < leo.array() - 1e-12)).count());
        strict += int((pbl.array() > leo.array() + 1e-12).count());
    }
    return {violations == 0,
            fmt::format("100 fixtures x 5 sectors: {} violations, {} sectors strictly above Leontief", violations,
                        strict)};
}

Outcome hysteresis() {
    // 120-day pulse peaking at 50 per 100k, about the spring 2020 Belgian hospital peak.
    BehaviorParams p;
    p.nu = 20.8;
    p.willingness = Vec::Ones(1);
    HospitalMemory mem(1);
    const int peak = 60, end = 120, days = 365;
    std::vector<double> ml, me, mw;
    for (int d = 0; d < days; ++d) {
        double load = d <= end ? 50.0 * (1.0 - std::abs(d - peak) / double(peak)) : 0.0;
        mem.push_normalized(Vec::Constant(1, load));
        auto s = gompertz_response(perceived_load(ema_load(mem, p.nu), p.mu, Mat::Ones(1, 1), 1.0), p, true);
        ml.push_back(s.m_leisure(0));
        me.push_back(s.m_eff(0));
        mw.push_back(s.m_work(0, 0));
    }
    auto before = gompertz_response(Vec::Zero(1), p, true);
    int argmin = int(std::min_element(ml.begin(), ml.end()) - ml.begin());
    auto recovery = [&](const std::vector<double>& m, double pre) {
        for (int d = peak; d < days; ++d)
            if (m[std::size_t(d)] > 0.99 * pre) return d;
        return days;
    };
    int rl = recovery(ml, before.m_leisure(0)), re = recovery(me, before.m_eff(0)),
        rw = recovery(mw, before.m_work(0, 0));
    int first = std::min({rl, re, rw});
    return {argmin - peak >= 5 && first - end >= 30,
            fmt::format("M_leisure minimum {} d after load peak; back above 99% of pre-pulse {} d after load "
                        "reached 0 (leisure {}, eff {}, work {})",
                        argmin - peak, first - end, rl - end, re - end, rw - end)};
}

Outcome oscillations() {
    bool ok = true;
    std::string detail;
    double slowest = 0.0;
    for (const char* code : {"BE", "SWE"}) {
        const auto& ds = country(code);
        CountryConfig cfg = country_config_for(ds);
        int maxima[2];
        double amp[2], late = 0.0;
        for (int i = 0; i < 2; ++i) {
            ScenarioVariant v;
            v.nu = i == 0 ? 7.0 : 62.0;
            auto t0 = Clock::now();
            SimulationRecord rec = run(scenario_library("scenario3", v, ds, cfg), ds, cfg);
            slowest = std::max(slowest, seconds_since(t0));
            Vec ic = national_ic_load(rec);
            maxima[i] = count_local_maxima(ic);
            amp[i] = ic.maxCoeff();
            if (i == 0) late = ic.tail(180).mean(); // last quarter of the run, as in the scenario3 summary
        }
        double target = 0.5 * cfg.ic_beds;
        bool c = maxima[0] >= 3 && std::abs(late - target) <= 0.25 * target && maxima[1] < maxima[0] &&
                 amp[1] > amp[0];
        ok = ok && c;
        detail += fmt::format("{}: nu=7 {} maxima, late load {:.0f} (target {:.0f}); nu=62 {} maxima, peak {:.0f} "
                              "vs {:.0f}. ",
                              code, maxima[0], late, target, maxima[1], amp[1], amp[0]);
    }
    ok = ok && slowest < 300.0;
    return {ok, detail + fmt::format("slowest run {:.1f} s", slowest)};
}

Outcome scenario1_ordering() {
    const auto& ds = country("BE");
    CountryConfig cfg = country_config_for(ds);
    const std::vector<std::string> policies{"P1", "P2", "P3", "P4a", "P4b"};
    const std::vector<double> table_ic{3416, 4066, 4495, 6487, 7559}, table_labor{-20.2, -17.3, -11.2, -11.2};
    const Date q2a = make_date(2020, 4, 1), q2b = make_date(2020, 6, 30);
    std::vector<double> ic, labor;
    for (const auto& pol : policies) {
        ScenarioVariant v;
        v.policy = pol;
        v.date = make_date(2020, 3, 15);
        SimulationRecord rec = run(scenario_library("scenario1", v, ds, cfg), ds, cfg);
        ic.push_back(cumulative_ic_patients(rec, q2a, q2b));
        labor.push_back(labor_change_pct(rec, q2a, q2b));
    }
    bool ordered = true;
    for (std::size_t i = 0; i + 1 < ic.size(); ++i) ordered = ordered && ic[i] < ic[i + 1];
    // Reduction P1 > P2 > P3 > P4a means the signed change increases.
    for (std::size_t i = 0; i + 1 < 4; ++i) ordered = ordered && labor[i] < labor[i + 1];
    int within = 0;
    for (std::size_t i = 0; i < 5; ++i) within += rel_diff(ic[i], table_ic[i]) <= 0.3 ? 1 : 0;
    for (std::size_t i = 0; i < 4; ++i) within += std::abs(labor[i] / table_labor[i] - 1.0) <= 0.3 ? 1 : 0;
    return {ordered, fmt::format("IC {:.0f} < {:.0f} < {:.0f} < {:.0f} < {:.0f}; labor {:.1f} < {:.1f} < {:.1f} < "
                                 "{:.1f}; stretch magnitudes within 30%: {}/9",
                                 ic[0], ic[1], ic[2], ic[3], ic[4], labor[0], labor[1], labor[2], labor[3], within)};
}

Outcome replication_2020() {
    struct Target {
        const char* code;
        double output, labor, tol;
    };
    bool ok = true;
    std::string detail;
    for (Target t : {Target{"BE", -14.1, -12.8, 3.0}, Target{"SWE", -4.5, -3.7, 2.0}}) {
        const auto& ds = country(t.code);
        CountryConfig cfg = country_config_for(ds);
        SimulationRecord rec = run(factual_2020(ds, cfg), ds, cfg);
        double x = output_change_pct(rec, make_date(2020, 1, 1), make_date(2020, 12, 31));
        double l = labor_change_pct(rec, make_date(2020, 1, 1), make_date(2020, 12, 31));
        ok = ok && std::abs(x - t.output) <= t.tol && std::abs(l - t.labor) <= t.tol;
        detail += fmt::format("{} output {:.2f}% ({} +/- {}), labor {:.2f}% ({} +/- {}). ", t.code, x, t.output,
                              t.tol, l, t.labor, t.tol);
    }
    return {ok, detail};
}

Outcome sampler() {
    auto log_density = [](const Vec& x) { return -0.5 * x.squaredNorm(); };
    const int walkers = 20, burn = 250, kept = 5000;
    auto t0 = Clock::now();
    Mat init = perturbed_ensemble(Vec::Constant(2, 0.5), walkers, 1.0, 1);
    EnsembleOptions o;
    o.steps = burn + kept;
    o.seed = 2;
    auto chain = ensemble_mcmc(log_density, init, o);
    Mat draws = chain.flat(burn);
    Vec mean = draws.colwise().mean();
    Mat centered = draws.rowwise() - mean.transpose();
    Mat cov = centered.transpose() * centered / double(draws.rows() - 1);
    double rhat = gelman_rubin(chain, burn).maxCoeff();
    double secs = seconds_since(t0);
    double mean_err = mean.cwiseAbs().maxCoeff();
    double cov_err = (cov - Mat::Identity(2, 2)).cwiseAbs().maxCoeff();
    return {draws.rows() >= 100000 && mean_err < 0.05 && cov_err < 0.1 && rhat < 1.05 && secs < 30.0,
            fmt::format("{} draws: max |mean| {:.3f}, max |cov - I| {:.3f}, R-hat {:.4f}, {:.2f} s", draws.rows(),
                        mean_err, cov_err, rhat, secs)};
}

Outcome optimizer() {
    auto rosen = [](const Vec& x) { return 100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2); };
    Vec x0(2);
    x0 << -1.2, 1.0;
    auto r = nelder_mead(rosen, x0);
    double err = (r.x - Vec::Ones(2)).cwiseAbs().maxCoeff();
    return {err < 1e-6 && r.evaluations < 5000,
            fmt::format("minimum ({:.9f}, {:.9f}), max err {:.1e}, {} evaluations", r.x(0), r.x(1), err,
                        r.evaluations)};
}

Outcome step_halving() {
    auto f = fixture30();
    EpiState a = run30(f, 4), b = run30(f, 8);
    double worst = 0.0;
    for (auto m : EpiState::members)
        for (Eigen::Index i = 0; i < (a.*m).size(); ++i) {
            double x = (a.*m).data()[i], y = (b.*m).data()[i];
            // Entries below a millionth of a person carry no relative information.
            if (std::max(std::abs(x), std::abs(y)) < 1e-6) continue;
            worst = std::max(worst, rel_diff(x, y));
        }
    return {worst < 1e-6, fmt::format("30-day fixture, 4 vs 8 substeps per day: max rel change {:.1e}", worst)};
}

Outcome oracle_equivalence() {
    double foi = 0.0;
    for (unsigned seed = 1; seed <= 5; ++seed) {
        const int n = 2, G = 2;
        Mat T(n, G);
        T << 1200, 800, 1500, 950;
        auto c = random_contacts(n, G, seed);
        EpiState x = random_state(T, seed + 10);
        Mat P(G, G);
        P << 0.55, 0.12, 0.2, 0.6;
        Vec s(n);
        s << 0.56, 1.0;
        foi = std::max(foi, max_rel(force_of_infection(x, c, P, 0.037, s, T), loop_oracle(x, c, P, 0.037, s, T)));
    }
    Mini m = mini3();
    ShockSet sh = ShockSet::zero(3);
    sh.kappa_d << 0.3, 0.0, 0.1;
    sh.kappa_s << 0.05, 0.2, 0.0;
    sh.kappa_f << 0.0, 0.1, 0.25;
    Sheet ref = sheet_for(m);
    ref.step(to_v(sh.kappa_d), to_v(sh.kappa_s), to_v(sh.kappa_f));
    EconState n = step_econ_day(m.s, m.p, sh);
    double econ = 0.0;
    for (int k = 0; k < 3; ++k) {
        auto kk = std::size_t(k);
        econ = std::max({econ, rel(n.x(k), ref.out_x[kk]), rel(n.l(k), ref.l[kk]), rel(n.d(k), ref.d[kk]),
                         rel(n.c(k), ref.out_c[kk])});
        for (int j = 0; j < 3; ++j) econ = std::max(econ, rel(n.S(k, j), ref.S[kk][std::size_t(j)]));
    }
    return {foi < 1e-12 && econ < 1e-9,
            fmt::format("force of infection vs loop oracle {:.1e}; econ day vs cell sheet {:.1e}", foi, econ)};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"epinomic acceptance checks"};
    std::vector<int> only;
    bool strict = false;
    app.add_option("--only", only, "criterion numbers to run (default: all)");
    app.add_flag("--strict", strict, "exit non-zero on any FAIL, including known gaps");
    CLI11_PARSE(app, argc, argv);

    // Failures analysed in the README "Known gaps" section.
    const std::set<int> known_gaps{5, 6};

    const std::vector<Criterion> criteria{
        {1, "joint fixed point", joint_fixed_point},
        {2, "conservation", conservation},
        {3, "R0 machinery", r0_machinery},
        {4, "production-function ordering", production_ordering},
        {5, "behavioral hysteresis", hysteresis},
        {6, "scenario-3 oscillations", oscillations},
        {7, "scenario-1 ordering", scenario1_ordering},
        {8, "2020 replication", replication_2020},
        {9, "sampler validation", sampler},
        {10, "optimizer validation", optimizer},
        {11, "integrator convergence", step_halving},
        {12, "oracle equivalence", oracle_equivalence},
    };

    int passed = 0, failed = 0, unexpected = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        Outcome o;
        auto t0 = Clock::now();
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        fmt::print("{} {:>2} {}: {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail,
                   seconds_since(t0));
        std::fflush(stdout);
        if (o.pass) {
            ++passed;
        } else {
            ++failed;
            if (!known_gaps.count(c.id)) ++unexpected;
        }
    }
    fmt::print("{} passed, {} failed ({} outside known gaps)\n", passed, failed, unexpected);
    return (strict ? failed : unexpected) == 0 ? 0 : 1;
}
