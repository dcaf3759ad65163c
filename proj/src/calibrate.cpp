#include "epinomic/calibrate.hpp"
#include "epinomic/csv.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <mutex>
#include <thread>

namespace epinomic {

namespace fs = std::filesystem;
using std::chrono::days;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

} // namespace

// ---------------------------------------------------------------- priors

ParameterSpace::ParameterSpace(std::vector<ParameterPrior> params) : params_(std::move(params)) {
    for (const auto& p : params_) {
        if (!std::isfinite(p.lower) || !std::isfinite(p.upper) || !(p.lower < p.upper))
            throw Error(fmt::format("parameter '{}': bounds must be finite and ordered", p.name));
        if (!(p.sd > 0.0)) throw Error(fmt::format("parameter '{}': prior sd must be positive", p.name));
        if (!(p.lambda > 0.0)) throw Error(fmt::format("parameter '{}': prior weight must be positive", p.name));
    }
}

ParameterSpace ParameterSpace::standard() {
    // name, lower, upper, λ, μ, σ, initial
    return ParameterSpace({
        {"nu", 1.0, 100.0, 10.0, 22.0, 1.0, 18.0},
        {"xi_eff", 0.0, 1.0, 10.0, 0.45, 0.01, 0.40},
        {"pi_eff", 0.0, 1.0, 25.0, 0.0, 0.015, 0.060},
        {"pi_work", 0.0, 0.5, 25.0, 0.035, 0.004, 0.035},
        {"pi_leisure", 0.0, 0.5, 15.0, 0.060, 0.006, 0.060},
        {"mu", 0.0, 5.0, 10.0, 1.0, 0.1, 0.72},
        {"A_BE", 0.0, 1.0, 20.0, 0.18, 0.03, 0.16},
        {"dt_BE", -60.0, 60.0, 15.0, 0.0, 3.5, -14.0},
        {"A_SWE", 0.0, 1.0, 20.0, 0.22, 0.03, 0.23},
        {"dt_SWE", -60.0, 60.0, 15.0, 0.0, 3.5, 14.0},
        {"iota_h", 1.0, 30.0, 10.0, 7.0, 2.0, 7.0},
        {"iota_f", 1.0, 30.0, 10.0, 7.0, 2.0, 7.0},
    });
}

std::vector<std::string> ParameterSpace::names() const {
    std::vector<std::string> n;
    for (const auto& p : params_) n.push_back(p.name);
    return n;
}

int ParameterSpace::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return int(i);
    return -1;
}

bool ParameterSpace::in_bounds(const Vec& theta) const {
    if (theta.size() != dim()) return false;
    for (int i = 0; i < dim(); ++i)
        if (!(theta(i) >= params_[std::size_t(i)].lower && theta(i) <= params_[std::size_t(i)].upper)) return false;
    return true;
}

Vec ParameterSpace::initial() const {
    Vec v(dim());
    for (int i = 0; i < dim(); ++i) v(i) = params_[std::size_t(i)].initial;
    return v;
}

Vec ParameterSpace::means() const {
    Vec v(dim());
    for (int i = 0; i < dim(); ++i) v(i) = params_[std::size_t(i)].mean;
    return v;
}

ParameterSpace ParameterSpace::subset(const std::vector<std::string>& names) const {
    std::vector<ParameterPrior> out;
    for (const auto& n : names) {
        int i = index_of(n);
        if (i < 0) throw Error(fmt::format("unknown calibration parameter '{}'", n));
        out.push_back(params_[std::size_t(i)]);
    }
    return ParameterSpace(std::move(out));
}

double log_prior(const Vec& theta, const ParameterSpace& space) {
    if (!space.in_bounds(theta)) return kNegInf;
    double lp = 0.0;
    for (int i = 0; i < space.dim(); ++i) {
        const auto& p = space[i];
        double z = (theta(i) - p.mean) / p.sd;
        lp += std::log(p.lambda) - 0.5 * z * z - std::log(p.sd) - kLogSqrt2Pi;
    }
    return lp;
}

// ---------------------------------------------------------------- likelihoods

Family parse_family(const std::string& s) {
    if (s == "negative_binomial" || s == "negbin" || s == "nb") return Family::negative_binomial;
    if (s == "poisson") return Family::poisson;
    if (s == "gaussian" || s == "normal") return Family::gaussian;
    throw Error(fmt::format("unknown likelihood family '{}'", s));
}

Cadence parse_cadence(const std::string& s) {
    if (s == "daily") return Cadence::daily;
    if (s == "weekly") return Cadence::weekly;
    if (s == "biweekly") return Cadence::biweekly;
    if (s == "monthly") return Cadence::monthly;
    if (s == "quarterly") return Cadence::quarterly;
    if (s == "yearly") return Cadence::yearly;
    throw Error(fmt::format("unknown cadence '{}'", s));
}

std::string to_string(Family f) {
    switch (f) {
    case Family::negative_binomial: return "negative_binomial";
    case Family::poisson: return "poisson";
    case Family::gaussian: return "gaussian";
    }
    return "?";
}

std::string to_string(Cadence c) {
    static const char* n[] = {"daily", "weekly", "biweekly", "monthly", "quarterly", "yearly"};
    return n[int(c)];
}

double poisson_logpmf(double k, double mean) { return k * std::log(mean) - mean - std::lgamma(k + 1.0); }

double negbin_logpmf(double k, double mean, double alpha) {
    if (alpha == 0.0) return poisson_logpmf(k, mean);
    double r = 1.0 / alpha;
    // For integer k and large r the lgamma difference cancels badly; sum log(r + j) directly.
    double ratio = 0.0;
    if (k == std::floor(k) && k < 1e5 && r > 1e3)
        for (double j = 0.0; j < k; j += 1.0) ratio += std::log(r + j);
    else
        ratio = std::lgamma(k + r) - std::lgamma(r);
    return ratio - std::lgamma(k + 1.0) - r * std::log1p(mean / r) + k * std::log(mean / (r + mean));
}

double gaussian_logpdf(double y, double mean, double sigma) {
    double z = (y - mean) / sigma;
    return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

double log_likelihood(const Vec& sim, const Vec& obs, Family family, double dispersion, double sigma) {
    if (sim.size() != obs.size()) throw Error("log_likelihood: simulated and observed lengths differ");
    double ll = 0.0;
    bool floored = false;
    for (Eigen::Index i = 0; i < sim.size(); ++i) {
        double m = sim(i);
        if (!std::isfinite(m) || !std::isfinite(obs(i))) return kNegInf;
        if (family == Family::gaussian) {
            ll += gaussian_logpdf(obs(i), m, sigma);
            continue;
        }
        if (m < 1e-12) {
            floored |= m < 0.0;
            m = 1e-12;
        }
        ll += family == Family::poisson ? poisson_logpmf(obs(i), m) : negbin_logpmf(obs(i), m, dispersion);
    }
    if (floored) spdlog::warn("log_likelihood: negative simulated means floored at 1e-12");
    return ll;
}

ObservationSet ObservationSet::load(const fs::path& file) {
    if (!fs::exists(file)) throw Error(fmt::format("observations file not found: {}", file.string()));
    CsvTable t = read_csv(file);
    int cd = t.col("date"), cc = t.col("country"), cv = t.col("variable"), cs = t.col("stratum"),
        cx = t.col("value"), cf = t.col("family");
    int ck = t.has_col("cadence") ? t.col("cadence") : -1;
    int ca = t.has_col("dispersion") ? t.col("dispersion") : -1;
    int cg = t.has_col("sigma") ? t.col("sigma") : -1;
    ObservationSet set;
    // One series per (country, variable, stratum, cadence).
    std::map<std::tuple<std::string, std::string, std::string, std::string>, std::size_t> where;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        auto key = std::make_tuple(t.str(r, cc), t.str(r, cv), t.str(r, cs), ck >= 0 ? t.str(r, ck) : "daily");
        auto it = where.find(key);
        if (it == where.end()) {
            ObservationSeries s;
            s.country = t.str(r, cc);
            s.variable = t.str(r, cv);
            s.stratum = t.str(r, cs);
            s.family = parse_family(t.str(r, cf));
            if (ck >= 0) s.cadence = parse_cadence(t.str(r, ck));
            if (ca >= 0 && !t.str(r, ca).empty()) s.dispersion = t.num(r, ca);
            if (cg >= 0 && !t.str(r, cg).empty()) s.sigma = t.num(r, cg);
            static const std::vector<std::string> known{"hospital_incidence", "output_pct", "labor_pct"};
            if (std::find(known.begin(), known.end(), s.variable) == known.end())
                throw DataError(t.path, t.line(r), "known-variable", s.variable);
            it = where.emplace(key, set.series.size()).first;
            set.series.push_back(std::move(s));
        }
        auto& s = set.series[it->second];
        double v = t.num(r, cx);
        if (!std::isfinite(v)) throw DataError(t.path, t.line(r), "finite-value", "");
        Date d = parse_date(t.str(r, cd));
        if (!s.dates.empty() && !(d > s.dates.back()))
            throw DataError(t.path, t.line(r), "increasing-dates", "dates within a series must increase");
        s.dates.push_back(d);
        s.values.conservativeResize(s.values.size() + 1);
        s.values(s.values.size() - 1) = v;
    }
    return set;
}

ObservationSet ObservationSet::for_country(const std::string& code) const {
    ObservationSet out;
    for (const auto& s : series)
        if (s.country == code) out.series.push_back(s);
    return out;
}

ObservationSet ObservationSet::between(Date from, Date to) const {
    ObservationSet out;
    for (const auto& s : series) {
        ObservationSeries c = s;
        c.dates.clear();
        std::vector<double> v;
        for (std::size_t i = 0; i < s.dates.size(); ++i) {
            auto [a, b] = reporting_window(s.dates[i], s.cadence);
            if (a >= from && b <= to) {
                c.dates.push_back(s.dates[i]);
                v.push_back(s.values(Eigen::Index(i)));
            }
        }
        if (v.empty()) continue;
        c.values = Eigen::Map<Vec>(v.data(), Eigen::Index(v.size()));
        out.series.push_back(std::move(c));
    }
    return out;
}

std::size_t ObservationSet::points() const {
    std::size_t n = 0;
    for (const auto& s : series) n += s.dates.size();
    return n;
}

std::pair<Date, Date> reporting_window(Date d, Cadence c) {
    using namespace std::chrono;
    year_month_day ymd(d);
    switch (c) {
    case Cadence::daily: return {d, d};
    case Cadence::weekly: {
        // ISO week: Monday through Sunday.
        unsigned wd = weekday(d).iso_encoding();
        Date mon = d - days{wd - 1};
        return {mon, mon + days{6}};
    }
    case Cadence::biweekly: return {d - days{13}, d};
    case Cadence::monthly: {
        Date a = sys_days(ymd.year() / ymd.month() / 1);
        Date b = sys_days(ymd.year() / ymd.month() / last);
        return {a, b};
    }
    case Cadence::quarterly: {
        unsigned q0 = (unsigned(ymd.month()) - 1) / 3 * 3 + 1;
        Date a = sys_days(ymd.year() / month(q0) / 1);
        Date b = sys_days(ymd.year() / month(q0 + 2) / last);
        return {a, b};
    }
    case Cadence::yearly: return {sys_days(ymd.year() / 1 / 1), sys_days(ymd.year() / 12 / 31)};
    }
    return {d, d};
}

namespace {

int record_index(const SimulationRecord& rec, Date d) {
    if (rec.dates.empty()) return -1;
    long i = days_between(rec.dates.front(), d);
    return i >= 0 && i < rec.days() ? int(i) : -1;
}

} // namespace

Vec simulated_series(const SimulationRecord& rec, const ObservationSeries& s) {
    Vec out(Eigen::Index(s.dates.size()));
    const bool counts = s.variable == "hospital_incidence";
    int col = -1;
    if (s.stratum != "total") {
        const auto& keys = counts ? rec.patch_ids : rec.sector_codes;
        auto it = std::find(keys.begin(), keys.end(), s.stratum);
        if (it == keys.end()) throw Error(fmt::format("observation stratum '{}' not in the simulation", s.stratum));
        col = int(it - keys.begin());
    }
    for (std::size_t i = 0; i < s.dates.size(); ++i) {
        auto [a, b] = reporting_window(s.dates[i], s.cadence);
        if (counts) {
            int ia = record_index(rec, a), ib = record_index(rec, b);
            if (ia < 0 || ib < 0)
                throw Error(fmt::format("observation window {}..{} not covered by the simulation", format_date(a),
                                        format_date(b)));
            double sum = 0.0;
            for (int d = ia; d <= ib; ++d) sum += col < 0 ? rec.incidence.row(d).sum() : rec.incidence(d, col);
            out(Eigen::Index(i)) = sum;
        } else if (col < 0) {
            double pct = s.variable == "output_pct" ? output_change_pct(rec, a, b) : labor_change_pct(rec, a, b);
            out(Eigen::Index(i)) = 100.0 + pct;
        } else {
            const Mat& m = s.variable == "output_pct" ? rec.x : rec.l;
            const Vec& base = s.variable == "output_pct" ? rec.x0 : rec.l0;
            double sum = 0.0;
            long n = 0;
            for (Date d = a; d <= b; d += days{1}, ++n) {
                int r = record_index(rec, d);
                sum += r < 0 ? base(col) : m(r, col);
            }
            out(Eigen::Index(i)) = 100.0 * sum / double(n) / base(col);
        }
    }
    return out;
}

double log_likelihood(const SimulationRecord& rec, const ObservationSet& obs) {
    double ll = 0.0;
    for (const auto& s : obs.series)
        ll += log_likelihood(simulated_series(rec, s), s.values, s.family, s.dispersion, s.sigma);
    return ll;
}

// ---------------------------------------------------------------- posterior

ScenarioSpec apply_parameters(const ScenarioSpec& spec, const std::string& country, const ParameterSpace& space,
                              const Vec& theta) {
    if (theta.size() != space.dim()) throw Error("apply_parameters: θ has the wrong dimension");
    ScenarioSpec s = spec;
    for (int i = 0; i < space.dim(); ++i) {
        const std::string& n = space[i].name;
        if (n.rfind("A_", 0) == 0) {
            if (n.substr(2) == country) s.overrides["seasonal_amplitude"] = theta(i);
        } else if (n.rfind("dt_", 0) == 0) {
            if (n.substr(3) == country) s.overrides["seasonal_shift"] = theta(i);
        } else {
            s.overrides[n] = theta(i);
        }
    }
    return s;
}

double log_posterior(const Vec& theta, const CalibrationProblem& problem) {
    double lp = log_prior(theta, problem.space);
    if (!std::isfinite(lp)) return kNegInf;
    for (const auto& c : problem.countries) {
        if (c.obs.empty()) continue;
        try {
            ScenarioSpec s = apply_parameters(c.spec, c.ds->code, problem.space, theta);
            lp += log_likelihood(run(s, *c.ds, c.cfg), c.obs);
        } catch (const Error& e) {
            spdlog::debug("log_posterior: simulation failed: {}", e.what());
            return kNegInf;
        }
        if (!std::isfinite(lp)) return kNegInf;
    }
    return lp;
}

// ---------------------------------------------------------------- optimizer

NelderMeadResult nelder_mead(const Objective& f, const Vec& x0, const NelderMeadOptions& opt) {
    const Eigen::Index n = x0.size();
    if (n == 0) throw Error("nelder_mead: empty parameter vector");
    auto eval = [&](const Vec& x, int& count) {
        ++count;
        double v = f(x);
        return std::isfinite(v) ? v : kInf;
    };
    int count = 0;
    std::vector<Vec> X(std::size_t(n + 1), x0);
    for (Eigen::Index i = 0; i < n; ++i) {
        double step = opt.initial_step ? (*opt.initial_step)(i) : (x0(i) != 0.0 ? 0.05 * x0(i) : 0.00025);
        X[std::size_t(i + 1)](i) += step;
    }
    std::vector<double> F(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) F[i] = eval(X[i], count);
    if (std::all_of(F.begin(), F.end(), [](double v) { return !std::isfinite(v); }))
        throw Error("nelder_mead: objective is not finite at any initial simplex vertex");

    std::vector<std::size_t> order(X.size());
    NelderMeadResult res;
    while (true) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return F[a] < F[b]; });
        std::vector<Vec> Xs;
        std::vector<double> Fs;
        for (auto i : order) {
            Xs.push_back(X[i]);
            Fs.push_back(F[i]);
        }
        X = std::move(Xs);
        F = std::move(Fs);

        double diameter = 0.0;
        for (std::size_t i = 1; i < X.size(); ++i) diameter = std::max(diameter, (X[i] - X[0]).cwiseAbs().maxCoeff());
        bool fconv = opt.ftol > 0.0 && std::isfinite(F.back()) && F.back() - F.front() <= opt.ftol;
        if (diameter < opt.xtol || fconv) {
            res.converged = true;
            break;
        }
        if (count >= opt.max_evaluations) break;

        Vec centroid = Vec::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) centroid += X[std::size_t(i)];
        centroid /= double(n);
        const Vec& worst = X.back();

        Vec xr = centroid + (centroid - worst);
        double fr = eval(xr, count);
        if (fr < F.front()) {
            Vec xe = centroid + 2.0 * (centroid - worst);
            double fe = eval(xe, count);
            if (fe < fr) {
                X.back() = xe;
                F.back() = fe;
            } else {
                X.back() = xr;
                F.back() = fr;
            }
            continue;
        }
        if (fr < F[std::size_t(n - 1)]) {
            X.back() = xr;
            F.back() = fr;
            continue;
        }
        bool outside = fr < F.back();
        Vec xc = outside ? Vec(centroid + 0.5 * (xr - centroid)) : Vec(centroid + 0.5 * (worst - centroid));
        double fc = eval(xc, count);
        if (outside ? fc <= fr : fc < F.back()) {
            X.back() = xc;
            F.back() = fc;
            continue;
        }
        for (std::size_t i = 1; i < X.size(); ++i) {
            X[i] = X[0] + 0.5 * (X[i] - X[0]);
            F[i] = eval(X[i], count);
        }
    }
    res.x = X.front();
    res.f = F.front();
    res.evaluations = count;
    return res;
}

NelderMeadResult nelder_mead_max(const Objective& f, const Vec& x0, const NelderMeadOptions& options) {
    auto r = nelder_mead([&](const Vec& x) { return -f(x); }, x0, options);
    r.f = -r.f;
    return r;
}

// ---------------------------------------------------------------- sampler

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t step, std::uint64_t walker) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(step), std::uint32_t(step >> 32),
                      std::uint32_t(walker), std::uint32_t(walker >> 32)};
    return std::mt19937_64(seq);
}

template <class Fn>
void parallel_for(int n, int workers, Fn&& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex m;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(m);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

double safe_eval(const LogDensity& f, const Vec& x) {
    double v = f(x);
    return std::isnan(v) ? kNegInf : v;
}

} // namespace

Vec PosteriorChain::acceptance_fraction() const {
    if (steps() <= 0) return Vec::Zero(walkers());
    return accepted / double(steps());
}

Mat PosteriorChain::flat(int discard, int thin) const {
    if (thin < 1) throw Error("flat: thin must be at least 1");
    std::vector<int> keep;
    for (int s = std::max(1, discard + 1); s <= steps(); ++s)
        if ((s - discard - 1) % thin == 0) keep.push_back(s);
    Mat out(Eigen::Index(keep.size()) * walkers(), dim());
    Eigen::Index r = 0;
    for (int s : keep)
        for (int w = 0; w < walkers(); ++w) out.row(r++) = positions[std::size_t(s)].row(w);
    return out;
}

Vec PosteriorChain::trace(int walker, int parameter) const {
    Vec v(steps());
    for (int s = 1; s <= steps(); ++s) v(s - 1) = positions[std::size_t(s)](walker, parameter);
    return v;
}

Mat perturbed_ensemble(const Vec& theta, int walkers, double fraction, std::uint64_t seed) {
    std::mt19937_64 rng = stream(seed, ~0ull, 0);
    std::uniform_real_distribution<double> u(-fraction, fraction);
    Mat out(walkers, theta.size());
    for (int w = 0; w < walkers; ++w)
        for (Eigen::Index i = 0; i < theta.size(); ++i)
            out(w, i) = theta(i) != 0.0 ? theta(i) * (1.0 + u(rng)) : u(rng);
    return out;
}

PosteriorChain ensemble_mcmc(const LogDensity& f, const Mat& initial, const EnsembleOptions& opt,
                             const std::vector<std::string>& names) {
    const int W = int(initial.rows()), D = int(initial.cols());
    if (W < 2 * D) throw Error(fmt::format("ensemble_mcmc: need at least {} walkers, got {}", 2 * D, W));
    if (W % 2 != 0) throw Error("ensemble_mcmc: walker count must be even");
    if (!(opt.a > 1.0)) throw Error("ensemble_mcmc: stretch parameter must exceed 1");
    PosteriorChain c;
    c.names = names.empty() ? std::vector<std::string>() : names;
    if (c.names.empty())
        for (int i = 0; i < D; ++i) c.names.push_back(fmt::format("theta{}", i));
    c.seed = opt.seed;
    c.a = opt.a;
    c.positions.push_back(initial);
    Vec lp(W);
    parallel_for(W, opt.workers, [&](int w) { lp(w) = safe_eval(f, initial.row(w).transpose()); });
    if ((lp.array() == kNegInf).all()) throw Error("ensemble_mcmc: log density is −∞ for every initial walker");
    c.log_prob.push_back(lp);
    c.accepted = Vec::Zero(W);
    extend_chain(c, f, opt.steps, opt.workers);
    return c;
}

void extend_chain(PosteriorChain& c, const LogDensity& f, int steps, int workers) {
    const int W = c.walkers(), D = c.dim(), half = W / 2;
    for (int n = 0; n < steps; ++n) {
        const std::uint64_t step = std::uint64_t(c.steps()) + 1;
        Mat X = c.positions.back();
        Vec lp = c.log_prob.back();
        for (int part = 0; part < 2; ++part) {
            const int first = part * half, other = (1 - part) * half;
            const auto nh = static_cast<std::size_t>(half);
            std::vector<Vec> proposal(nh);
            std::vector<double> zs(nh), us(nh), lps(nh);
            for (int i = 0; i < half; ++i) {
                const int k = first + i;
                auto rng = stream(c.seed, step, std::uint64_t(k));
                std::uniform_real_distribution<double> u01(0.0, 1.0);
                std::uniform_int_distribution<int> pick(0, half - 1);
                double z = std::pow((c.a - 1.0) * u01(rng) + 1.0, 2.0) / c.a;
                int j = other + pick(rng);
                zs[std::size_t(i)] = z;
                us[std::size_t(i)] = u01(rng);
                proposal[std::size_t(i)] = X.row(j).transpose() + z * (X.row(k) - X.row(j)).transpose();
            }
            parallel_for(half, workers, [&](int i) { lps[std::size_t(i)] = safe_eval(f, proposal[std::size_t(i)]); });
            for (int i = 0; i < half; ++i) {
                const int k = first + i;
                double log_ratio = double(D - 1) * std::log(zs[std::size_t(i)]) + lps[std::size_t(i)] - lp(k);
                if (lps[std::size_t(i)] != kNegInf && std::log(us[std::size_t(i)]) < log_ratio) {
                    X.row(k) = proposal[std::size_t(i)].transpose();
                    lp(k) = lps[std::size_t(i)];
                    c.accepted(k) += 1.0;
                }
            }
        }
        c.positions.push_back(std::move(X));
        c.log_prob.push_back(std::move(lp));
    }
}

namespace {

/// Normalized autocorrelation of a series by direct summation.
Vec autocorr(const Vec& x) {
    const Eigen::Index n = x.size();
    Vec y = x.array() - x.mean();
    Vec acf = Vec::Zero(n);
    double var = y.squaredNorm();
    if (!(var > 0.0)) {
        acf(0) = 1.0;
        return acf;
    }
    for (Eigen::Index t = 0; t < n; ++t) acf(t) = y.head(n - t).dot(y.tail(n - t)) / var;
    return acf;
}

} // namespace

Vec integrated_autocorr_time(const PosteriorChain& c, int discard, double window_c) {
    const int n = c.steps() - discard;
    if (n < 2) throw Error("integrated_autocorr_time: chain too short");
    Vec tau(c.dim());
    for (int p = 0; p < c.dim(); ++p) {
        Vec rho = Vec::Zero(n);
        for (int w = 0; w < c.walkers(); ++w) rho += autocorr(c.trace(w, p).tail(n));
        rho /= double(c.walkers());
        double t = 1.0;
        for (int m = 1; m < n; ++m) {
            t += 2.0 * rho(m);
            if (double(m) >= window_c * t) break;
        }
        tau(p) = std::max(t, 1.0);
    }
    return tau;
}

Vec gelman_rubin(const PosteriorChain& c, int discard) {
    const int n = c.steps() - discard, W = c.walkers();
    if (n < 2) throw Error("gelman_rubin: chain too short");
    Vec out(c.dim());
    for (int p = 0; p < c.dim(); ++p) {
        Vec means(W), vars(W);
        for (int w = 0; w < W; ++w) {
            Vec t = c.trace(w, p).tail(n);
            means(w) = t.mean();
            vars(w) = (t.array() - means(w)).square().sum() / double(n - 1);
        }
        double Wv = vars.mean();
        double B = double(n) * (means.array() - means.mean()).square().sum() / double(W - 1);
        double V = (double(n - 1) / double(n)) * Wv + B / double(n);
        out(p) = Wv > 0.0 ? std::sqrt(V / Wv) : 1.0;
    }
    return out;
}

ChainDiagnostics diagnose(const PosteriorChain& c) {
    ChainDiagnostics d;
    d.acceptance = c.acceptance_fraction();
    d.tau = integrated_autocorr_time(c);
    double tmax = d.tau.maxCoeff();
    d.discard = int(std::ceil(2.0 * tmax));
    d.thin = std::max(1, int(std::floor(0.5 * tmax)));
    d.long_enough = double(c.steps()) >= 50.0 * tmax;
    d.rhat = c.steps() - d.discard >= 2 ? gelman_rubin(c, d.discard) : gelman_rubin(c);
    return d;
}

void write_chain_csv(const PosteriorChain& c, const fs::path& file) {
    CsvWriter w(file);
    w.header({"walker", "step", "parameter", "value", "log_posterior"});
    for (int s = 0; s <= c.steps(); ++s)
        for (int k = 0; k < c.walkers(); ++k)
            for (int p = 0; p < c.dim(); ++p) {
                w.field(double(k)).field(double(s)).field(c.names[std::size_t(p)]);
                w.field(c.positions[std::size_t(s)](k, p)).field(c.log_prob[std::size_t(s)](k));
                w.end_row();
            }
}

PosteriorChain read_chain_csv(const fs::path& file, std::uint64_t seed, double a) {
    CsvTable t = read_csv(file);
    int cw = t.col("walker"), cs = t.col("step"), cp = t.col("parameter"), cv = t.col("value"),
        cl = t.col("log_posterior");
    PosteriorChain c;
    c.seed = seed;
    c.a = a;
    int W = 0, S = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        W = std::max(W, int(t.num(r, cw)) + 1);
        S = std::max(S, int(t.num(r, cs)) + 1);
        const std::string& name = t.str(r, cp);
        if (std::find(c.names.begin(), c.names.end(), name) == c.names.end()) c.names.push_back(name);
    }
    const int D = int(c.names.size());
    if (t.rows.size() != std::size_t(W) * std::size_t(S) * std::size_t(D))
        throw DataError(t.path, -1, "complete-chain", "chain CSV must list every walker, step and parameter");
    c.positions.assign(std::size_t(S), Mat::Constant(W, D, std::nan("")));
    c.log_prob.assign(std::size_t(S), Vec::Constant(W, std::nan("")));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        int k = int(t.num(r, cw)), s = int(t.num(r, cs));
        int p = int(std::find(c.names.begin(), c.names.end(), t.str(r, cp)) - c.names.begin());
        c.positions[std::size_t(s)](k, p) = t.num(r, cv);
        c.log_prob[std::size_t(s)](k) = t.num(r, cl);
    }
    c.accepted = Vec::Zero(W);
    for (int s = 1; s < S; ++s)
        for (int k = 0; k < W; ++k)
            if ((c.positions[std::size_t(s)].row(k) - c.positions[std::size_t(s - 1)].row(k)).cwiseAbs().sum() != 0.0)
                c.accepted(k) += 1.0;
    return c;
}

// ---------------------------------------------------------------- initial condition

std::map<std::string, double> fit_seeds(const CountryFit& fit, const ParameterSpace& space, const Vec& theta,
                                        Date fit_end, const NelderMeadOptions& options) {
    const CountryDataset& ds = *fit.ds;
    const int G = ds.patches();
    ScenarioSpec base = apply_parameters(fit.spec, ds.code, space, theta);
    base.end = fit_end;
    ObservationSet obs = fit.obs.between(base.start, fit_end - days{1});
    Vec y0(G);
    for (int g = 0; g < G; ++g) {
        auto it = fit.spec.seeds.find(ds.geo.patch_ids[std::size_t(g)]);
        double v = it != fit.spec.seeds.end() ? it->second : 0.0;
        if (it == fit.spec.seeds.end())
            for (const auto& [k, val] : fit.spec.seeds)
                if (ds.geo.index_of(k) == g) v = val;
        y0(g) = std::sqrt(std::max(v, 0.0)) + 0.5;
    }
    const Vec pop = ds.geo.population.colwise().sum().transpose();
    auto to_seeds = [&](const Vec& y) {
        std::map<std::string, double> s;
        for (int g = 0; g < G; ++g) s[ds.geo.patch_ids[std::size_t(g)]] = std::min(y(g) * y(g), 0.5 * pop(g));
        return s;
    };
    auto objective = [&](const Vec& y) {
        ScenarioSpec s = base;
        s.seeds = to_seeds(y);
        try {
            return -log_likelihood(run(s, ds, fit.cfg), obs);
        } catch (const Error&) {
            return kInf;
        }
    };
    NelderMeadOptions o = options;
    if (!o.initial_step) o.initial_step = Vec::Constant(G, 1.0);
    auto r = nelder_mead(objective, y0, o);
    return to_seeds(r.x);
}

IterativeResult iterative_initial_condition(CalibrationProblem problem, const Vec& theta0,
                                            const IterativeOptions& opt) {
    IterativeResult res;
    res.theta = theta0;
    res.seeds.resize(problem.countries.size());
    for (int it = 0; it < opt.max_iterations; ++it) {
        // (a) seeds per country with parameters held fixed
        for (std::size_t c = 0; c < problem.countries.size(); ++c) {
            auto& fit = problem.countries[c];
            res.seeds[c] = fit_seeds(fit, problem.space, res.theta, opt.seed_fit_end, opt.seed_options);
            fit.spec.seeds = res.seeds[c];
        }
        // (b) parameters from the state snapshot at parameter_start
        struct Snapshot {
            RunState state;
            ObservationSet obs;
        };
        std::vector<Snapshot> snaps;
        for (auto& fit : problem.countries) {
            ScenarioSpec s = apply_parameters(fit.spec, fit.ds->code, problem.space, res.theta);
            RunContext ctx = make_context(s, *fit.ds, fit.cfg);
            RunState st = initial_state(s, ctx);
            while (st.date < opt.parameter_start) step_day(st, ctx);
            snaps.push_back({st, fit.obs.between(opt.parameter_start, opt.parameter_end - days{1})});
        }
        auto objective = [&](const Vec& theta) {
            double lp = log_prior(theta, problem.space);
            if (!std::isfinite(lp)) return kInf;
            for (std::size_t c = 0; c < problem.countries.size(); ++c) {
                const auto& fit = problem.countries[c];
                try {
                    ScenarioSpec s = apply_parameters(fit.spec, fit.ds->code, problem.space, theta);
                    RunContext ctx = make_context(s, *fit.ds, fit.cfg);
                    lp += log_likelihood(run_from(snaps[c].state, ctx, opt.parameter_end), snaps[c].obs);
                } catch (const Error&) {
                    return kInf;
                }
            }
            return -lp;
        };
        Vec prev = res.theta;
        res.theta = nelder_mead(objective, prev, opt.parameter_options).x;
        res.iterations = it + 1;
        double change = 0.0;
        for (Eigen::Index i = 0; i < prev.size(); ++i)
            change = std::max(change, std::abs(res.theta(i) - prev(i)) / std::max(std::abs(prev(i)), 1e-12));
        spdlog::info("iterative calibration: iteration {} max relative change {:.4f}", it + 1, change);
        if (change < opt.tolerance) {
            res.converged = true;
            break;
        }
    }
    return res;
}

double fit_seed_scale(const CountryDataset& ds, const CountryConfig& cfg, const ScenarioSpec& spec, Date date,
                      double target) {
    if (!(date >= spec.start)) throw Error("fit_seed_scale: anchor date precedes the scenario start");
    if (!(target > 0.0)) throw Error("fit_seed_scale: target must be positive");
    const double pop = ds.geo.population.sum();
    auto incidence = [&](double scale) {
        ScenarioSpec s = spec;
        for (auto& [k, v] : s.seeds) v *= scale;
        s.end = date + days{1};
        auto rec = run(s, ds, cfg);
        return 1e5 * rec.incidence.row(rec.days() - 1).sum() / pop;
    };
    double lo = -8.0, hi = 8.0; // log scale
    for (int i = 0; i < 60; ++i) {
        double mid = 0.5 * (lo + hi);
        (incidence(std::exp(mid)) < target ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

// ---------------------------------------------------------------- reduced fidelity

std::pair<CountryDataset, CountryConfig> reduce_country(const CountryDataset& ds, const CountryConfig& cfg) {
    int cap = ds.geo.index_of(cfg.capital);
    if (cap < 0) throw Error(fmt::format("reduce_country: capital '{}' not in dataset", cfg.capital));
    std::vector<int> rest;
    for (int g = 0; g < ds.patches(); ++g)
        if (g != cap) rest.push_back(g);
    const std::string rest_id = ds.code + "-rest";
    CountryDataset small = aggregate_patches(ds, {{cap}, rest}, {cfg.capital, rest_id});
    CountryConfig c = cfg;
    c.seeds.clear();
    for (const auto& [k, v] : cfg.seeds) {
        int g = ds.geo.index_of(k);
        c.seeds[g == cap ? cfg.capital : rest_id] += v;
    }
    for (auto& cp : c.policy) {
        cp.private_ban.values.clear();
        cp.school_closure.values.clear();
    }
    return {std::move(small), std::move(c)};
}

} // namespace epinomic
