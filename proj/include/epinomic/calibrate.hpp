#pragma once

#include "epinomic/coupler.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace epinomic {

// ---------------------------------------------------------------- priors

struct ParameterPrior {
    std::string name;
    double lower = 0.0, upper = 0.0;
    double lambda = 1.0, mean = 0.0, sd = 1.0;
    double initial = 0.0;
};

class ParameterSpace {
public:
    ParameterSpace() = default;
    explicit ParameterSpace(std::vector<ParameterPrior> params);

    /// The twelve calibrated parameters with the published L2 priors and initial estimates.
    static ParameterSpace standard();

    int dim() const { return int(params_.size()); }
    const ParameterPrior& operator[](int i) const { return params_[std::size_t(i)]; }
    const std::vector<ParameterPrior>& params() const { return params_; }
    std::vector<std::string> names() const;
    int index_of(const std::string& name) const;
    bool in_bounds(const Vec& theta) const;
    Vec initial() const;
    Vec means() const;
    /// Keeps only the listed parameters, in the given order.
    ParameterSpace subset(const std::vector<std::string>& names) const;

private:
    std::vector<ParameterPrior> params_;
};

/// Σ log[λ_k N(θ_k; μ_k, σ_k)]; −∞ outside bounds.
double log_prior(const Vec& theta, const ParameterSpace& space);

// ---------------------------------------------------------------- likelihoods

enum class Family { negative_binomial, poisson, gaussian };
enum class Cadence { daily, weekly, biweekly, monthly, quarterly, yearly };

Family parse_family(const std::string& s);
Cadence parse_cadence(const std::string& s);
std::string to_string(Family f);
std::string to_string(Cadence c);

double poisson_logpmf(double k, double mean);
/// Variance mean + α·mean²; α = 0 is the Poisson limit.
double negbin_logpmf(double k, double mean, double alpha);
double gaussian_logpdf(double y, double mean, double sigma);

/// Sum over points; simulated means below 1e-12 are floored (count families) with a warning.
double log_likelihood(const Vec& simulated, const Vec& observed, Family family, double dispersion = 0.1,
                      double sigma = 2.0);

struct ObservationSeries {
    std::string country;
    std::string variable; ///< hospital_incidence | output_pct | labor_pct
    std::string stratum = "total";
    Cadence cadence = Cadence::daily;
    Family family = Family::poisson;
    double dispersion = 0.1; ///< negative binomial α
    double sigma = 2.0;      ///< gaussian, points on the % retained scale
    std::vector<Date> dates;
    Vec values;
};

struct ObservationSet {
    std::vector<ObservationSeries> series;

    /// CSV columns: date,country,variable,stratum,value,family[,cadence][,dispersion][,sigma]
    static ObservationSet load(const std::filesystem::path& file);
    ObservationSet for_country(const std::string& code) const;
    ObservationSet between(Date from, Date to) const;
    std::size_t points() const;
    bool empty() const { return points() == 0; }
};

/// Inclusive reporting window of an observation dated `d`.
std::pair<Date, Date> reporting_window(Date d, Cadence c);
/// Simulated counterpart of every point of `s` (sums for counts, means for percentages).
Vec simulated_series(const SimulationRecord& rec, const ObservationSeries& s);
double log_likelihood(const SimulationRecord& rec, const ObservationSet& obs);

// ---------------------------------------------------------------- posterior

struct CountryFit {
    const CountryDataset* ds = nullptr;
    CountryConfig cfg;
    ScenarioSpec spec; ///< factual run; parameters are overridden per evaluation
    ObservationSet obs;
};

/// Writes θ into a copy of the spec: shared names as overrides, A_<code>/dt_<code> only for that country.
ScenarioSpec apply_parameters(const ScenarioSpec& spec, const std::string& country, const ParameterSpace& space,
                              const Vec& theta);

struct CalibrationProblem {
    ParameterSpace space;
    std::vector<CountryFit> countries;
};

/// log prior + Σ log likelihood; simulation failures give −∞.
double log_posterior(const Vec& theta, const CalibrationProblem& problem);

// ---------------------------------------------------------------- optimizer

struct NelderMeadOptions {
    int max_evaluations = 5000;
    double xtol = 1e-10; ///< simplex diameter
    double ftol = 0.0;   ///< spread of vertex values; 0 disables
    std::optional<Vec> initial_step;
};

struct NelderMeadResult {
    Vec x;
    double f = 0.0;
    int evaluations = 0;
    bool converged = false;
};

using Objective = std::function<double(const Vec&)>;

/// Minimizes f with coefficients (1, 2, 0.5, 0.5); non-finite values count as +∞.
NelderMeadResult nelder_mead(const Objective& f, const Vec& x0, const NelderMeadOptions& options = {});
/// Maximizes f.
NelderMeadResult nelder_mead_max(const Objective& f, const Vec& x0, const NelderMeadOptions& options = {});

// ---------------------------------------------------------------- sampler

struct EnsembleOptions {
    int steps = 1000;
    double a = 2.0;
    std::uint64_t seed = 1;
    int workers = 1;
};

struct PosteriorChain {
    std::vector<std::string> names;
    std::vector<Mat> positions; ///< per stored step, walkers × dim; entry 0 is the initial ensemble
    std::vector<Vec> log_prob;  ///< per stored step, walkers
    Vec accepted;               ///< accepted moves per walker
    std::uint64_t seed = 1;
    double a = 2.0;

    int walkers() const { return positions.empty() ? 0 : int(positions.front().rows()); }
    int dim() const { return positions.empty() ? 0 : int(positions.front().cols()); }
    int steps() const { return int(positions.size()) - 1; }
    Vec acceptance_fraction() const;
    /// Draws after `discard` steps, every `thin`-th step, flattened to (draws × dim).
    Mat flat(int discard = 0, int thin = 1) const;
    /// Series of one parameter for one walker over stored steps 1..steps().
    Vec trace(int walker, int parameter) const;
};

using LogDensity = std::function<double(const Vec&)>;

/// Initial ensemble: θ perturbed uniformly by ±fraction (relative; absolute for zero entries).
Mat perturbed_ensemble(const Vec& theta, int walkers, double fraction, std::uint64_t seed);

/// Stretch-move ensemble sampler. Walker random streams depend only on (seed, step, walker).
PosteriorChain ensemble_mcmc(const LogDensity& log_density, const Mat& initial, const EnsembleOptions& options,
                             const std::vector<std::string>& names = {});
/// Continues an existing chain for `steps` more steps; identical to a single longer run.
void extend_chain(PosteriorChain& chain, const LogDensity& log_density, int steps, int workers = 1);

/// Integrated autocorrelation time per parameter (walker-averaged autocorrelation, automatic window c = 5).
Vec integrated_autocorr_time(const PosteriorChain& chain, int discard = 0, double c = 5.0);
/// Gelman–Rubin potential scale reduction per parameter, walkers as chains.
Vec gelman_rubin(const PosteriorChain& chain, int discard = 0);

struct ChainDiagnostics {
    Vec tau, acceptance, rhat;
    int discard = 0, thin = 1;
    bool long_enough = false; ///< steps ≥ 50 · max τ
};
ChainDiagnostics diagnose(const PosteriorChain& chain);

void write_chain_csv(const PosteriorChain& chain, const std::filesystem::path& file);
PosteriorChain read_chain_csv(const std::filesystem::path& file, std::uint64_t seed, double a = 2.0);

// ---------------------------------------------------------------- initial condition

struct IterativeOptions {
    Date seed_fit_end = make_date(2020, 5, 1);
    Date parameter_start = make_date(2020, 3, 1);
    Date parameter_end = make_date(2021, 1, 1);
    int max_iterations = 5;
    double tolerance = 0.01; ///< relative parameter change
    NelderMeadOptions seed_options{400, 1e-3, 0.0, std::nullopt};
    NelderMeadOptions parameter_options{600, 1e-4, 0.0, std::nullopt};
};

struct IterativeResult {
    Vec theta;
    std::vector<std::map<std::string, double>> seeds; ///< per country
    int iterations = 0;
    bool converged = false;
};

/// Per-patch exposed counts maximizing the likelihood of observations in [spec.start, fit_end].
std::map<std::string, double> fit_seeds(const CountryFit& fit, const ParameterSpace& space, const Vec& theta,
                                        Date fit_end, const NelderMeadOptions& options);
/// Alternates seed and parameter fits until the parameters move less than the tolerance.
IterativeResult iterative_initial_condition(CalibrationProblem problem, const Vec& theta0,
                                            const IterativeOptions& options = {});

/// Scales all seeds by one factor so national hospital incidence per 100k on `date` equals `target`.
double fit_seed_scale(const CountryDataset& ds, const CountryConfig& cfg, const ScenarioSpec& spec, Date date,
                      double target_per_100k);

// ---------------------------------------------------------------- reduced fidelity

/// Two patches: the capital and the rest. Seeds are summed and patch-keyed policy values dropped.
std::pair<CountryDataset, CountryConfig> reduce_country(const CountryDataset& ds, const CountryConfig& cfg);

} // namespace epinomic
