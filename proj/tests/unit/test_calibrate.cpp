#include "fixtures.hpp"

#include "epinomic/calibrate.hpp"
#include "epinomic/config.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace epinomic;
using namespace epinomic::testing;
namespace fs = std::filesystem;

namespace {

const double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double std_normal_2d(const Vec& x) { return -0.5 * x.squaredNorm(); }

/// Synthetic 2-patch economy with an epidemic large enough to drive behavior.
struct Fixture {
    CountryDataset ds = synthetic_dataset(2, 3);
    CountryConfig cfg = synthetic_config(ds);
    ScenarioSpec spec;

    Fixture() {
        cfg.ic_beds = 10.0;
        cfg.beta = 0.05;
        spec.country = ds.code;
        spec.start = make_date(2020, 2, 1);
        spec.end = make_date(2020, 7, 1);
        spec.seasonality = false;
        spec.holidays = false;
        spec.exogenous = false;
        spec.awareness = AwarenessMode::pre_triggered;
        spec.seeds = {{"P1", 5.0}, {"P2", 5.0}};
    }

    /// Daily national incidence of a run as an observation series.
    ObservationSet observe(const ScenarioSpec& s, const std::string& stratum = "total") const {
        auto rec = run(s, ds, cfg);
        ObservationSeries o;
        o.country = ds.code;
        o.variable = "hospital_incidence";
        o.stratum = stratum;
        o.dates = rec.dates;
        int col = stratum == "total" ? -1 : ds.geo.index_of(stratum);
        o.values = col < 0 ? Vec(rec.incidence.rowwise().sum()) : Vec(rec.incidence.col(col));
        ObservationSet set;
        set.series.push_back(o);
        return set;
    }
};

} // namespace

TEST(Prior, ClosedForms) {
    auto space = ParameterSpace::standard();
    EXPECT_EQ(space.dim(), 12);
    double at_mode = log_prior(space.means(), space);
    EXPECT_TRUE(std::isfinite(at_mode));
    for (int i = 0; i < space.dim(); ++i) {
        Vec t = space.means();
        t(i) += 0.5 * space[i].sd;
        EXPECT_LT(log_prior(t, space), at_mode);
        t(i) = space[i].upper + 1.0;
        EXPECT_EQ(log_prior(t, space), kNegInf);
    }
    auto nu = space.subset({"nu"});
    EXPECT_NEAR(log_prior(Vec::Constant(1, 23.0), nu), std::log(10.0) - 0.5 - 0.5 * kLog2Pi, 1e-14);
    // +10σ strictly lowers the prior term.
    Vec far = space.initial();
    double base = log_prior(far, space);
    far(0) += 10.0 * space[0].sd;
    EXPECT_LT(log_prior(far, space), base);
}

TEST(Prior, PublishedTable) {
    auto s = ParameterSpace::standard();
    const std::vector<std::tuple<std::string, double, double, double, double>> rows{
        {"nu", 18.0, 10, 22.0, 1.0},       {"xi_eff", 0.40, 10, 0.45, 0.01},  {"pi_eff", 0.060, 25, 0.0, 0.015},
        {"pi_work", 0.035, 25, 0.035, 0.004}, {"pi_leisure", 0.060, 15, 0.060, 0.006}, {"mu", 0.72, 10, 1.0, 0.1},
        {"A_BE", 0.16, 20, 0.18, 0.03},    {"dt_BE", -14.0, 15, 0.0, 3.5},    {"A_SWE", 0.23, 20, 0.22, 0.03},
        {"dt_SWE", 14.0, 15, 0.0, 3.5},    {"iota_h", 7.0, 10, 7.0, 2.0},     {"iota_f", 7.0, 10, 7.0, 2.0}};
    for (const auto& [name, init, lambda, mean, sd] : rows) {
        const auto& p = s[s.index_of(name)];
        EXPECT_DOUBLE_EQ(p.initial, init) << name;
        EXPECT_DOUBLE_EQ(p.lambda, lambda) << name;
        EXPECT_DOUBLE_EQ(p.mean, mean) << name;
        EXPECT_DOUBLE_EQ(p.sd, sd) << name;
    }
}

TEST(Likelihood, PoissonMaximumAtObserved) {
    Vec y(4);
    y << 3, 10, 0, 25;
    double at = log_likelihood(y, y, Family::poisson);
    for (double shift : {-2.0, -1.0, 1.0, 2.0}) {
        Vec alt = (y.array() + shift).cwiseMax(0.0);
        EXPECT_LT(log_likelihood(alt, y, Family::poisson), at);
    }
    EXPECT_NEAR(poisson_logpmf(2.0, 3.0), 2.0 * std::log(3.0) - 3.0 - std::log(2.0), 1e-14);
}

TEST(Likelihood, NegativeBinomialPoissonLimit) {
    Vec mean(5), obs(5);
    mean << 0.5, 4.0, 12.0, 40.0, 150.0;
    obs << 0, 6, 9, 44, 139;
    double p = log_likelihood(mean, obs, Family::poisson);
    double nb = 0.0;
    for (int i = 0; i < 5; ++i) nb += negbin_logpmf(obs(i), mean(i), 1e-9);
    EXPECT_NEAR(nb, p, 1e-6);
    EXPECT_NEAR(negbin_logpmf(3.0, 5.0, 0.0), poisson_logpmf(3.0, 5.0), 1e-14);
    EXPECT_LT(log_likelihood(mean, obs, Family::negative_binomial, 0.1), 0.0);
}

TEST(Likelihood, GaussianResidual) {
    EXPECT_NEAR(gaussian_logpdf(102.0, 100.0, 2.0), -0.5 - std::log(2.0 * std::sqrt(2.0 * std::numbers::pi)), 1e-14);
    Vec sim = Vec::Constant(3, 100.0), obs = Vec::Constant(3, 98.0);
    EXPECT_NEAR(log_likelihood(sim, obs, Family::gaussian, 0.1, 2.0),
                3.0 * (-0.5 - std::log(2.0 * std::sqrt(2.0 * std::numbers::pi))), 1e-13);
}

TEST(Observations, ReportingWindows) {
    auto w = reporting_window(make_date(2020, 4, 8), Cadence::weekly); // a Wednesday
    EXPECT_EQ(w.first, make_date(2020, 4, 6));
    EXPECT_EQ(w.second, make_date(2020, 4, 12));
    auto q = reporting_window(make_date(2020, 6, 30), Cadence::quarterly);
    EXPECT_EQ(q.first, make_date(2020, 4, 1));
    EXPECT_EQ(q.second, make_date(2020, 6, 30));
    auto m = reporting_window(make_date(2020, 2, 10), Cadence::monthly);
    EXPECT_EQ(m.second, make_date(2020, 2, 29));
    auto b = reporting_window(make_date(2020, 4, 14), Cadence::biweekly);
    EXPECT_EQ(b.first, make_date(2020, 4, 1));
}

TEST(Observations, WeeklyAggregationIsExact) {
    Fixture f;
    auto rec = run(f.spec, f.ds, f.cfg);
    ObservationSeries s;
    s.variable = "hospital_incidence";
    s.cadence = Cadence::weekly;
    for (Date d = make_date(2020, 2, 9); d < make_date(2020, 6, 28); d += std::chrono::days{7}) s.dates.push_back(d);
    s.values = Vec::Constant(Eigen::Index(s.dates.size()), 5.0);
    Vec sim = simulated_series(rec, s);
    Vec daily = rec.incidence.rowwise().sum();
    for (std::size_t i = 0; i < s.dates.size(); ++i) {
        long end = days_between(rec.dates.front(), s.dates[i]);
        double sum = 0.0;
        for (long d = end - 6; d <= end; ++d) sum += daily(d);
        EXPECT_EQ(sim(Eigen::Index(i)), sum);
    }
    ObservationSet set;
    set.series.push_back(s);
    EXPECT_EQ(log_likelihood(rec, set), log_likelihood(sim, s.values, Family::poisson));
}

TEST(Observations, UncoveredWindowIsAnError) {
    Fixture f;
    auto rec = run(f.spec, f.ds, f.cfg);
    ObservationSeries s;
    s.variable = "hospital_incidence";
    s.dates = {make_date(2020, 8, 1)};
    s.values = Vec::Ones(1);
    EXPECT_THROW(simulated_series(rec, s), Error);
    s.stratum = "nowhere";
    s.dates = {make_date(2020, 3, 1)};
    EXPECT_THROW(simulated_series(rec, s), Error);
}

TEST(Observations, LoadAndFilter) {
    auto dir = scratch_dir("obs");
    {
        std::ofstream o(dir / "obs.csv");
        o << "date,country,variable,stratum,value,family,cadence,sigma\n"
             "2020-03-01,TST,hospital_incidence,total,4,poisson,daily,\n"
             "2020-03-02,TST,hospital_incidence,total,6,poisson,daily,\n"
             "2020-06-30,TST,output_pct,total,88,gaussian,quarterly,2\n"
             "2020-12-31,TST,output_pct,total,92,gaussian,yearly,2\n"
             "2020-03-01,OTH,hospital_incidence,total,1,poisson,daily,\n";
    }
    auto set = ObservationSet::load(dir / "obs.csv");
    EXPECT_EQ(set.points(), 5u);
    EXPECT_EQ(set.for_country("TST").points(), 4u);
    EXPECT_EQ(set.for_country("TST").between(make_date(2020, 3, 1), make_date(2020, 6, 30)).points(), 3u);
    {
        std::ofstream o(dir / "bad.csv");
        o << "date,country,variable,stratum,value,family\n2020-03-01,TST,hospital_incidence,total,4,lognormal\n";
    }
    EXPECT_THROW(ObservationSet::load(dir / "bad.csv"), Error);
    EXPECT_THROW(ObservationSet::load(dir / "absent.csv"), Error);
}

TEST(Posterior, DecomposesIntoPriorAndLikelihood) {
    Fixture f;
    auto space = ParameterSpace::standard().subset({"pi_eff", "nu"});
    Vec theta(2);
    theta << 0.05, 20.0;
    CalibrationProblem prob{space, {{&f.ds, f.cfg, f.spec, f.observe(f.spec)}}};
    double lp = log_prior(theta, space);
    double ll = log_likelihood(run(apply_parameters(f.spec, f.ds.code, space, theta), f.ds, f.cfg), prob.countries[0].obs);
    EXPECT_EQ(log_posterior(theta, prob), lp + ll);
    prob.countries[0].obs = ObservationSet{};
    EXPECT_EQ(log_posterior(theta, prob), lp);
    theta(0) = -1.0;
    EXPECT_EQ(log_posterior(theta, prob), kNegInf);
}

TEST(Posterior, CountrySpecificSeasonality) {
    auto space = ParameterSpace::standard();
    ScenarioSpec s;
    Vec theta = space.initial();
    auto be = apply_parameters(s, "BE", space, theta);
    EXPECT_DOUBLE_EQ(be.overrides.at("seasonal_amplitude"), 0.16);
    EXPECT_DOUBLE_EQ(be.overrides.at("seasonal_shift"), -14.0);
    auto swe = apply_parameters(s, "SWE", space, theta);
    EXPECT_DOUBLE_EQ(swe.overrides.at("seasonal_amplitude"), 0.23);
    EXPECT_DOUBLE_EQ(swe.overrides.at("nu"), 18.0);
}

TEST(Optimizer, Quadratic) {
    auto r = nelder_mead([](const Vec& x) { return (x.array() - 1.0).square().sum(); }, Vec::Zero(4));
    EXPECT_TRUE(r.converged);
    EXPECT_LT((r.x.array() - 1.0).abs().maxCoeff(), 1e-8);
}

TEST(Optimizer, Rosenbrock) {
    auto rosen = [](const Vec& x) { return 100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2); };
    Vec x0(2);
    x0 << -1.2, 1.0;
    auto r = nelder_mead(rosen, x0);
    EXPECT_LT(r.evaluations, 5000);
    EXPECT_LT((r.x - Vec::Ones(2)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Optimizer, MaximizeWrapperAndScaleInvariance) {
    auto f = [](const Vec& x) { return std::pow(x(0) - 0.3, 2) + 2.0 * std::pow(x(1) + 0.7, 2); };
    Vec x0 = Vec::Zero(2);
    auto lo = nelder_mead(f, x0);
    auto hi = nelder_mead_max([&](const Vec& x) { return -f(x); }, x0);
    EXPECT_TRUE(lo.x.isApprox(hi.x, 1e-12));
    EXPECT_DOUBLE_EQ(hi.f, -lo.f);
    auto scaled = nelder_mead_max([&](const Vec& x) { return -1000.0 * f(x); }, x0);
    EXPECT_LT((scaled.x - hi.x).cwiseAbs().maxCoeff(), 1e-7);
    auto nan_wall = nelder_mead([&](const Vec& x) { return x(0) < 0.0 ? std::nan("") : f(x); }, Vec::Constant(2, 0.1));
    EXPECT_NEAR(nan_wall.x(0), 0.3, 1e-6);
}

TEST(Sampler, Deterministic) {
    Mat init = perturbed_ensemble(Vec::Ones(2), 8, 0.5, 3);
    EnsembleOptions o;
    o.steps = 200;
    o.seed = 11;
    auto a = ensemble_mcmc(std_normal_2d, init, o), b = ensemble_mcmc(std_normal_2d, init, o);
    for (int s = 0; s <= a.steps(); ++s) EXPECT_TRUE(a.positions[std::size_t(s)] == b.positions[std::size_t(s)]);
    o.seed = 12;
    auto c = ensemble_mcmc(std_normal_2d, init, o);
    EXPECT_FALSE(c.positions.back() == a.positions.back());
}

TEST(Sampler, ResumeAndWorkersMatchSingleRun) {
    Mat init = perturbed_ensemble(Vec::Ones(3), 10, 0.5, 4);
    EnsembleOptions o;
    o.steps = 60;
    o.seed = 5;
    auto whole = ensemble_mcmc(std_normal_2d, init, o);
    o.steps = 25;
    auto part = ensemble_mcmc(std_normal_2d, init, o);
    extend_chain(part, std_normal_2d, 35);
    ASSERT_EQ(part.steps(), 60);
    EXPECT_TRUE(part.positions.back() == whole.positions.back());
    EXPECT_TRUE(part.accepted == whole.accepted);
    o.steps = 60;
    o.workers = 3;
    EXPECT_TRUE(ensemble_mcmc(std_normal_2d, init, o).positions.back() == whole.positions.back());

    auto file = scratch_dir("chain") / "chain.csv";
    write_chain_csv(part, file);
    auto back = read_chain_csv(file, 5);
    ASSERT_EQ(back.steps(), 60);
    extend_chain(back, std_normal_2d, 10);
    extend_chain(whole, std_normal_2d, 10);
    EXPECT_TRUE(back.positions.back() == whole.positions.back());
}

TEST(Sampler, AffineInvariance) {
    Mat L(2, 2);
    L << 2.0, 0.0, 1.2, 0.5;
    Mat Linv = L.inverse();
    Mat Sinv = (L * L.transpose()).inverse();
    auto correlated = [&](const Vec& x) { return -0.5 * x.dot(Sinv * x); };
    Mat init = perturbed_ensemble(Vec::Ones(2), 12, 0.8, 9);
    EnsembleOptions o;
    o.steps = 300;
    o.seed = 21;
    auto white = ensemble_mcmc(std_normal_2d, init, o);
    auto mapped = ensemble_mcmc(correlated, init * L.transpose(), o);
    // Same accept decisions; positions agree up to rounding amplified by repeated stretches.
    for (int s = 0; s <= o.steps; s += 50) {
        Mat back = mapped.positions[std::size_t(s)] * Linv.transpose();
        const Mat& w = white.positions[std::size_t(s)];
        EXPECT_LT((back - w).cwiseAbs().maxCoeff(), 1e-4 * (1.0 + w.cwiseAbs().maxCoeff())) << "step " << s;
    }
    EXPECT_TRUE(mapped.accepted == white.accepted);
}

TEST(Sampler, StandardNormalMoments) {
    Mat init = perturbed_ensemble(Vec::Constant(2, 0.5), 20, 1.0, 1);
    EnsembleOptions o;
    o.steps = 2000;
    o.seed = 2;
    auto c = ensemble_mcmc(std_normal_2d, init, o);
    Mat draws = c.flat(200);
    Vec mean = draws.colwise().mean();
    Mat centered = draws.rowwise() - mean.transpose();
    Mat cov = centered.transpose() * centered / double(draws.rows() - 1);
    EXPECT_LT(mean.cwiseAbs().maxCoeff(), 0.1);
    EXPECT_NEAR(cov(0, 0), 1.0, 0.15);
    EXPECT_NEAR(cov(1, 1), 1.0, 0.15);
    EXPECT_NEAR(cov(0, 1), 0.0, 0.15);
    EXPECT_LT(gelman_rubin(c, 200).maxCoeff(), 1.05);
    auto acc = c.acceptance_fraction();
    EXPECT_GT(acc.minCoeff(), 0.3);
    EXPECT_LT(acc.maxCoeff(), 0.9);
    auto tau = integrated_autocorr_time(c, 200);
    EXPECT_GT(tau.minCoeff(), 1.0);
    EXPECT_LT(tau.maxCoeff(), 40.0);
}

TEST(Sampler, RejectsSmallEnsembles) {
    EnsembleOptions o;
    EXPECT_THROW(ensemble_mcmc(std_normal_2d, Mat::Zero(3, 2), o), Error);
    EXPECT_THROW(ensemble_mcmc(std_normal_2d, Mat::Zero(5, 2), o), Error);
}

TEST(Recovery, SeedsConcentrateInSourcePatch) {
    CountryDataset ds = synthetic_dataset(3, 3, 17);
    CountryConfig cfg = synthetic_config(ds);
    cfg.beta = 0.05;
    ScenarioSpec truth;
    truth.country = ds.code;
    truth.start = make_date(2020, 2, 1);
    truth.end = make_date(2020, 5, 1);
    truth.seasonality = truth.holidays = truth.exogenous = false;
    truth.awareness = AwarenessMode::off;
    truth.seeds = {{"P3", 10.0}};
    auto rec = run(truth, ds, cfg);
    ObservationSet obs;
    for (int g = 0; g < 3; ++g) {
        ObservationSeries s;
        s.country = ds.code;
        s.variable = "hospital_incidence";
        s.stratum = ds.geo.patch_ids[std::size_t(g)];
        s.dates = rec.dates;
        s.values = rec.incidence.col(g);
        obs.series.push_back(s);
    }
    ScenarioSpec start = truth;
    start.seeds = {{"P1", 3.0}, {"P2", 3.0}, {"P3", 3.0}};
    CountryFit fit{&ds, cfg, start, obs};
    auto space = ParameterSpace::standard().subset({"nu"});
    NelderMeadOptions o{600, 1e-4, 0.0, std::nullopt};
    auto seeds = fit_seeds(fit, space, Vec::Constant(1, 20.8), truth.end, o);
    double total = seeds.at("P1") + seeds.at("P2") + seeds.at("P3");
    EXPECT_GE(seeds.at("P3") / total, 0.9);
    EXPECT_NEAR(total, 10.0, 1.0);

    for (auto& s : fit.obs.series) s.values.setZero();
    auto none = fit_seeds(fit, space, Vec::Constant(1, 20.8), truth.end, o);
    EXPECT_LT(none.at("P1") + none.at("P2") + none.at("P3"), 0.05);
}

TEST(Recovery, BehaviorParametersFromSyntheticData) {
    Fixture f;
    std::vector<ParameterPrior> wide{{"pi_eff", 0.0, 1.0, 1.0, 0.05, 1.0, 0.05},
                                     {"pi_leisure", 0.0, 0.5, 1.0, 0.05, 1.0, 0.05}};
    ParameterSpace space(wide);
    Vec truth(2);
    truth << 0.08, 0.04;
    ScenarioSpec gen = apply_parameters(f.spec, f.ds.code, space, truth);
    CalibrationProblem prob{space, {{&f.ds, f.cfg, f.spec, f.observe(gen)}}};
    Vec start(2);
    start << 0.05, 0.06;
    NelderMeadOptions o{400, 1e-7, 0.0, std::nullopt};
    auto r = nelder_mead_max([&](const Vec& t) { return log_posterior(t, prob); }, start, o);
    // Two prior σ of the calibrated values (0.015, 0.006).
    EXPECT_NEAR(r.x(0), truth(0), 2 * 0.015);
    EXPECT_NEAR(r.x(1), truth(1), 2 * 0.006);
}

TEST(Reduced, TwoPatchAggregate) {
    auto ds = load_country_dataset(packaged("BE"));
    auto cfg = country_config_for(ds);
    auto [rds, rcfg] = reduce_country(ds, cfg);
    EXPECT_EQ(rds.patches(), 2);
    EXPECT_NEAR(rds.geo.population.sum(), ds.geo.population.sum(), 1e-3);
    double seeds = 0.0, rseeds = 0.0;
    for (const auto& [k, v] : cfg.seeds) seeds += v;
    for (const auto& [k, v] : rcfg.seeds) rseeds += v;
    EXPECT_NEAR(rseeds, seeds, 1e-9);
    EXPECT_EQ(rds.geo.index_of(rcfg.capital), 0);
}
