#include "epinomic/coupler.hpp"

#include "epinomic/csv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace epinomic {

using std::chrono::days;

double Keyed::exact(const std::string& key) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

double Keyed::prefix(const std::string& code) const {
    const std::string* best = nullptr;
    double v = fallback;
    for (const auto& [k, x] : values)
        if (code.compare(0, k.size(), k) == 0 && (!best || k.size() > best->size())) {
            best = &k;
            v = x;
        }
    return v;
}

Keyed Keyed::min(const Keyed& a, const Keyed& b, bool by_prefix) {
    Keyed out;
    out.fallback = std::min(a.fallback, b.fallback);
    std::set<std::string> keys;
    for (const auto& [k, _] : a.values) keys.insert(k);
    for (const auto& [k, _] : b.values) keys.insert(k);
    for (const auto& k : keys)
        out.values[k] = by_prefix ? std::min(a.prefix(k), b.prefix(k)) : std::min(a.exact(k), b.exact(k));
    return out;
}

namespace {

void check_unit(double v, const char* what, Date d) {
    if (!(v >= 0.0 && v <= 1.0))
        throw Error(fmt::format("policy {} on {} has value {} outside [0, 1]", what, format_date(d), v));
}

double patch_value(const Keyed& k, const GeoFrame& geo, int g) {
    auto it = k.values.find(geo.patch_ids[std::size_t(g)]);
    if (it != k.values.end()) return it->second;
    it = k.values.find(geo.names[std::size_t(g)]);
    return it != k.values.end() ? it->second : k.fallback;
}

void check_patch_keys(const Keyed& k, const GeoFrame& geo, const char* what) {
    for (const auto& [key, _] : k.values)
        if (geo.index_of(key) < 0) throw Error(fmt::format("policy {}: unknown patch '{}'", what, key));
}

void check_sector_keys(const Keyed& k, const SectorCatalog& s, const char* what) {
    for (const auto& [key, _] : k.values)
        if (s.match(key).empty()) throw Error(fmt::format("policy {}: unknown sector '{}'", what, key));
}

PolicyPoint lerp(const PolicyPoint& a, const PolicyPoint& b, double w) {
    PolicyPoint out;
    out.inputs.closure = a.inputs.closure + w * (b.inputs.closure - a.inputs.closure);
    out.inputs.telework = a.inputs.telework + w * (b.inputs.telework - a.inputs.telework);
    out.inputs.private_ban = a.inputs.private_ban + w * (b.inputs.private_ban - a.inputs.private_ban);
    out.inputs.school_closure = a.inputs.school_closure + w * (b.inputs.school_closure - a.inputs.school_closure);
    for (std::size_t c = 0; c < 4; ++c)
        out.exogenous_scale[c] = a.exogenous_scale[c] + w * (b.exogenous_scale[c] - a.exogenous_scale[c]);
    return out;
}

} // namespace

PolicyPoint resolve_change_point(const ChangePoint& cp, const CountryDataset& ds) {
    const int G = ds.patches(), K = ds.sector_count();
    check_sector_keys(cp.closure, ds.sectors, "closure");
    check_sector_keys(cp.telework, ds.sectors, "telework");
    check_patch_keys(cp.private_ban, ds.geo, "private_ban");
    check_patch_keys(cp.school_closure, ds.geo, "school_closure");
    PolicyPoint p;
    p.inputs = PolicyInputs::none(G, K);
    for (int k = 0; k < K; ++k) {
        const auto& code = ds.sectors.codes[std::size_t(k)];
        double c = cp.closure.prefix(code), t = cp.telework.prefix(code);
        check_unit(c, "closure", cp.date);
        check_unit(t, "telework", cp.date);
        p.inputs.closure.col(k).setConstant(c);
        p.inputs.telework.col(k).setConstant(t);
    }
    for (int g = 0; g < G; ++g) {
        p.inputs.private_ban(g) = patch_value(cp.private_ban, ds.geo, g);
        p.inputs.school_closure(g) = patch_value(cp.school_closure, ds.geo, g);
        check_unit(p.inputs.private_ban(g), "private_ban", cp.date);
        check_unit(p.inputs.school_closure(g), "school_closure", cp.date);
    }
    for (double s : cp.exogenous_scale)
        if (!(s >= 0.0)) throw Error(fmt::format("policy exogenous_scale on {} is negative", format_date(cp.date)));
    p.exogenous_scale = cp.exogenous_scale;
    return p;
}

PolicySchedule::PolicySchedule(const std::vector<ChangePoint>& points, const CountryDataset& ds, int ramp)
    : G_(ds.patches()), K_(ds.sector_count()), ramp_(ramp) {
    if (ramp < 0) throw Error("PolicySchedule: ramp length must be non-negative");
    PolicyPoint zero{PolicyInputs::none(G_, K_), {1.0, 1.0, 1.0, 1.0}};
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i > 0 && !(points[i].date > points[i - 1].date))
            throw Error(fmt::format("PolicySchedule: change-point dates must be strictly increasing ({} after {})",
                                    format_date(points[i].date), format_date(points[i - 1].date)));
        dates_.push_back(points[i].date);
        targets_.push_back(resolve_change_point(points[i], ds));
    }
    // Each transition starts from wherever the previous ramp had reached.
    for (std::size_t i = 0; i < dates_.size(); ++i) {
        if (i == 0) {
            starts_.push_back(zero);
            continue;
        }
        PolicyPoint prev_start = starts_[i - 1];
        long elapsed = days_between(dates_[i - 1], dates_[i]);
        double w = ramp_ == 0 ? 1.0 : std::min(1.0, double(elapsed) / double(ramp_));
        starts_.push_back(lerp(prev_start, targets_[i - 1], w));
    }
}

PolicyPoint PolicySchedule::at(Date t) const {
    if (dates_.empty() || t < dates_.front()) return {PolicyInputs::none(G_, K_), {1.0, 1.0, 1.0, 1.0}};
    auto it = std::upper_bound(dates_.begin(), dates_.end(), t);
    std::size_t i = std::size_t(it - dates_.begin()) - 1;
    long elapsed = days_between(dates_[i], t) + 1;
    double w = ramp_ == 0 ? 1.0 : std::min(1.0, double(elapsed) / double(ramp_));
    return lerp(starts_[i], targets_[i], w);
}

const std::vector<std::string>& ModelParams::names() {
    static const std::vector<std::string> n{
        "alpha", "gamma", "delta", "epsilon", "zeta", "beta", "seasonal_amplitude", "seasonal_shift",
        "nu", "mu", "xi_eff", "pi_eff", "xi_work", "pi_work", "xi_leisure", "pi_leisure",
        "awareness_threshold", "tau", "iota_h", "iota_f", "savings", "ic_fraction"};
    return n;
}

namespace {

double* param_slot(ModelParams& p, const std::string& name) {
    if (name == "alpha") return &p.epi.alpha;
    if (name == "gamma") return &p.epi.gamma;
    if (name == "delta") return &p.epi.delta;
    if (name == "epsilon") return &p.epi.epsilon;
    if (name == "zeta") return &p.epi.zeta;
    if (name == "beta") return &p.epi.beta;
    if (name == "seasonal_amplitude") return &p.epi.seasonal_amplitude;
    if (name == "seasonal_shift") return &p.epi.seasonal_shift;
    if (name == "nu") return &p.behavior.nu;
    if (name == "mu") return &p.behavior.mu;
    if (name == "xi_eff") return &p.behavior.xi_eff;
    if (name == "pi_eff") return &p.behavior.pi_eff;
    if (name == "xi_work") return &p.behavior.xi_work;
    if (name == "pi_work") return &p.behavior.pi_work;
    if (name == "xi_leisure") return &p.behavior.xi_leisure;
    if (name == "pi_leisure") return &p.behavior.pi_leisure;
    if (name == "awareness_threshold") return &p.behavior.awareness_threshold;
    if (name == "tau") return &p.tau;
    if (name == "iota_h") return &p.iota_h;
    if (name == "iota_f") return &p.iota_f;
    if (name == "savings") return &p.savings;
    if (name == "ic_fraction") return &p.ic_fraction;
    return nullptr;
}

} // namespace

void ModelParams::set(const std::string& name, double value) {
    double* slot = param_slot(*this, name);
    if (!slot) throw Error(fmt::format("unknown parameter '{}'", name));
    if (!std::isfinite(value) && name != "nu" && name != "tau")
        throw Error(fmt::format("parameter '{}' must be finite", name));
    *slot = value;
}

double ModelParams::get(const std::string& name) const {
    double* slot = param_slot(const_cast<ModelParams&>(*this), name);
    if (!slot) throw Error(fmt::format("unknown parameter '{}'", name));
    return *slot;
}

CountryConfig CountryConfig::defaults_for(const std::string& code) {
    CountryConfig c;
    c.code = code;
    if (code == "SWE") {
        c.ic_beds = 600.0;
        c.beta = 0.034;
    }
    return c;
}

EpiState seed_epidemic(const EpiState& state, const Vec& seeds, const Mat& w) {
    const Eigen::Index n = state.S.rows(), G = state.S.cols();
    if (seeds.size() != G || w.rows() != n || w.cols() != G) throw Error("seed_epidemic: dimension mismatch");
    EpiState out = state;
    for (Eigen::Index g = 0; g < G; ++g) {
        double x = seeds(g);
        if (!(x >= 0.0)) throw Error(fmt::format("seed_epidemic: negative seed in patch {}", g));
        if (x == 0.0) continue;
        if (x > state.S.col(g).sum())
            throw Error(fmt::format("seed_epidemic: seed {} exceeds susceptible population of patch {}", x, g));
        double total = w.col(g).sum();
        if (!(total > 0.0)) throw Error("seed_epidemic: age weights sum to zero");
        Vec add = x * w.col(g) / total;
        if ((add.array() > state.S.col(g).array()).any())
            throw Error(fmt::format("seed_epidemic: seed exceeds an age bin's susceptibles in patch {}", g));
        out.S.col(g) -= add;
        out.E.col(g) += add;
    }
    return out;
}

Mat contact_age_weights(const CountryDataset& ds) {
    auto c = prepandemic_contacts(ds);
    const Mat& T = ds.geo.population;
    Mat w(T.rows(), T.cols());
    for (Eigen::Index g = 0; g < T.cols(); ++g) {
        Vec per_person = c[std::size_t(g)].total.rowwise().sum();
        w.col(g) = T.col(g).cwiseProduct(per_person);
        w.col(g) /= w.col(g).sum();
    }
    return w;
}

RunContext make_context(const ScenarioSpec& spec, const CountryDataset& ds, const CountryConfig& cfg) {
    if (!(spec.end > spec.start)) throw Error("scenario: end must be after start");
    RunContext ctx;
    ctx.ds = &ds;
    ModelParams& p = ctx.params;
    p.epi.beta = cfg.beta;
    p.epi.seasonal_amplitude = cfg.seasonal_amplitude;
    p.epi.seasonal_shift = cfg.seasonal_shift;
    p.ic_fraction = cfg.ic_fraction;
    for (const auto& [k, v] : cfg.parameters) p.set(k, v);
    for (const auto& [k, v] : spec.overrides) p.set(k, v);
    if (!spec.seasonality) p.epi.seasonal_amplitude = 0.0;
    if (spec.target_R0) p.epi.beta = calibrate_beta(*spec.target_R0, p.epi, ds);
    p.behavior.connectivity = connectivity_weights(ds.mobility.normalized);
    p.behavior.willingness = ds.sectors.willingness;
    p.behavior.ic_ratio = ic_ratio(cfg.reference_ic_beds, cfg.reference_population, cfg.ic_beds,
                                   ds.geo.population.sum());
    ctx.econ = EconParams::from_dataset(ds);
    ctx.econ.tau = p.tau;
    ctx.econ.iota_h = p.iota_h;
    ctx.econ.iota_f = p.iota_f;
    ctx.econ.savings = p.savings;
    ctx.schedule = PolicySchedule(spec.schedule, ds, spec.ramp_days);
    if (spec.exogenous) ctx.exogenous = cfg.exogenous;
    if (spec.holidays) ctx.holidays = cfg.holidays;
    ctx.seasonality = spec.seasonality;
    ctx.awareness_date = spec.awareness_date;
    ctx.ic_beds = cfg.ic_beds;
    return ctx;
}

RunState initial_state(const ScenarioSpec& spec, const RunContext& ctx) {
    const CountryDataset& ds = *ctx.ds;
    const int G = ds.patches();
    Vec seeds = Vec::Zero(G);
    for (const auto& [key, v] : spec.seeds) {
        int g = ds.geo.index_of(key);
        if (g < 0) throw Error(fmt::format("scenario seeds: unknown patch '{}'", key));
        if (!(v >= 0.0)) throw Error(fmt::format("scenario seeds: negative seed for '{}'", key));
        seeds(g) += v;
    }
    Mat w;
    if (spec.seed_age_weights.empty()) {
        w = contact_age_weights(ds);
    } else {
        if (int(spec.seed_age_weights.size()) != ds.geo.population.rows())
            throw Error("scenario seed_age_weights: expected one weight per age bin");
        Vec col = Eigen::Map<const Vec>(spec.seed_age_weights.data(), Eigen::Index(spec.seed_age_weights.size()));
        w = col.replicate(1, G);
    }
    RunState st{spec.start,
                seed_epidemic(EpiState::susceptible(ds.geo.population), seeds, w),
                EconState::equilibrium(ds),
                HospitalMemory(G),
                Awareness(spec.awareness, ctx.params.behavior.awareness_threshold),
                0.0};
    return st;
}

DayRow step_day(RunState& st, const RunContext& ctx) {
    const CountryDataset& ds = *ctx.ds;
    const ModelParams& p = ctx.params;
    const Mat& T = ds.geo.population;
    const Mat& P = ds.mobility.normalized;
    const Vec pop = T.colwise().sum().transpose();
    const Date t = st.date;

    // (1) memory and awareness
    st.memory.record_load(st.epi.Q.colwise().sum().transpose(), pop);
    st.awareness.update(st.last_incidence_per_100k);
    if (ctx.awareness_date && t >= *ctx.awareness_date) st.awareness.force(true);

    // (2) behavior
    Vec ema = ema_load(st.memory, p.behavior.nu);
    Vec q = perceived_load(ema, p.behavior.mu, p.behavior.connectivity, p.behavior.ic_ratio);
    BehaviorSignal beh = gompertz_response(q, p.behavior, st.awareness.active());

    // (3) shocks
    PolicyPoint pol = ctx.schedule.at(t);
    for (const auto& [a, b] : ctx.holidays)
        if (t >= a && t <= b) pol.inputs.school_closure.setOnes();
    EpiSummaries sum = symptomatic_summaries(st.epi, T, P);
    ShockSet sh;
    double i_nat = st.epi.Im.sum() / T.sum();
    double a_leisure = beh.a_leisure().dot(pop) / pop.sum();
    sh.kappa_d = household_shock(i_nat, a_leisure, ds.sectors.lav_d, p.household_shock);
    sh.kappa_s = labor_shock(sum.i_tilde, pol.inputs.closure, beh.a_work(), ds.sectors, ds.geo.active_population);
    auto comps = ctx.exogenous.at(t);
    for (std::size_t c = 0; c < 4; ++c) comps[c] *= pol.exogenous_scale[c];
    sh.kappa_f = exogenous_kappa(ds.exogenous.shares, comps);

    // (4) economy
    st.econ = step_econ_day(st.econ, ctx.econ, sh);

    // (5) contacts
    Vec labor_ratio = st.econ.l.cwiseQuotient(ctx.econ.l0);
    auto contacts = compose_all(pol.inputs, beh, sum, labor_ratio, ds);

    // (6) epidemic
    DayResult r = integrate_day(st.epi, p.epi, contacts, P, T, day_of_year(t));
    st.epi = std::move(r.state);
    Vec inc = r.admissions.colwise().sum().transpose();
    st.last_incidence_per_100k = 1e5 * inc.sum() / pop.sum();
    st.date = t + days{1};

    // (7) record row
    DayRow row;
    row.q_hosp = st.epi.Q.colwise().sum().transpose();
    row.incidence = inc;
    row.deaths = st.epi.D.colwise().sum().transpose();
    row.m_eff = beh.m_eff;
    row.m_leisure = beh.m_leisure;
    row.x = st.econ.x;
    row.l = st.econ.l;
    row.d = st.econ.d;
    row.kappa_d = sh.kappa_d;
    row.kappa_s = sh.kappa_s;
    row.kappa_f = sh.kappa_f;
    row.aware = st.awareness.active();
    return row;
}

SimulationRecord run_from(RunState st, const RunContext& ctx, Date end, const std::string& name) {
    const CountryDataset& ds = *ctx.ds;
    const int G = ds.patches(), K = ds.sector_count();
    const long n = std::max(0L, days_between(st.date, end));
    SimulationRecord rec;
    rec.scenario = name;
    rec.country = ds.code;
    rec.patch_ids = ds.geo.patch_ids;
    rec.sector_codes = ds.sectors.codes;
    rec.population = ds.geo.population.sum();
    rec.ic_fraction = ctx.params.ic_fraction;
    rec.ic_beds = ctx.ic_beds;
    rec.x0 = ds.io.x0;
    rec.l0 = ds.io.l0;
    for (Mat* m : {&rec.q_hosp, &rec.incidence, &rec.ic_load, &rec.deaths, &rec.m_eff, &rec.m_leisure})
        m->resize(n, G);
    for (Mat* m : {&rec.x, &rec.l, &rec.d, &rec.kappa_d, &rec.kappa_s, &rec.kappa_f}) m->resize(n, K);
    rec.dates.reserve(std::size_t(n));
    rec.aware.reserve(std::size_t(n));
    for (long i = 0; i < n; ++i) {
        rec.dates.push_back(st.date);
        DayRow row = step_day(st, ctx);
        rec.q_hosp.row(i) = row.q_hosp.transpose();
        rec.incidence.row(i) = row.incidence.transpose();
        rec.ic_load.row(i) = ctx.params.ic_fraction * row.q_hosp.transpose();
        rec.deaths.row(i) = row.deaths.transpose();
        rec.m_eff.row(i) = row.m_eff.transpose();
        rec.m_leisure.row(i) = row.m_leisure.transpose();
        rec.x.row(i) = row.x.transpose();
        rec.l.row(i) = row.l.transpose();
        rec.d.row(i) = row.d.transpose();
        rec.kappa_d.row(i) = row.kappa_d.transpose();
        rec.kappa_s.row(i) = row.kappa_s.transpose();
        rec.kappa_f.row(i) = row.kappa_f.transpose();
        rec.aware.push_back(row.aware ? 1 : 0);
    }
    return rec;
}

SimulationRecord run(const ScenarioSpec& spec, const CountryDataset& ds, const CountryConfig& cfg) {
    RunContext ctx = make_context(spec, ds, cfg);
    return run_from(initial_state(spec, ctx), ctx, spec.end, spec.name);
}

void write_record_csv(const SimulationRecord& rec, const std::filesystem::path& file, RecordLevel level) {
    CsvWriter w(file);
    w.header({"date", "variable", "stratum", "value"});
    auto put = [&](const std::string& date, const char* var, const std::string& stratum, double v) {
        w.field(date).field(std::string(var)).field(stratum).field(v).end_row();
    };
    const int G = int(rec.patch_ids.size()), K = int(rec.sector_codes.size());
    const double x0 = rec.x0.sum(), l0 = rec.l0.sum();
    for (int i = 0; i < rec.days(); ++i) {
        const std::string date = format_date(rec.dates[std::size_t(i)]);
        auto patches = [&](const char* var, const Mat& m, bool total) {
            for (int g = 0; g < G; ++g) put(date, var, rec.patch_ids[std::size_t(g)], m(i, g));
            if (total) put(date, var, "total", m.row(i).sum());
        };
        auto sectors = [&](const char* var, const Mat& m) {
            for (int k = 0; k < K; ++k) put(date, var, rec.sector_codes[std::size_t(k)], m(i, k));
        };
        patches("hospital_load", rec.q_hosp, true);
        patches("hospital_incidence", rec.incidence, true);
        patches("ic_load", rec.ic_load, true);
        patches("deaths", rec.deaths, true);
        patches("M_eff", rec.m_eff, false);
        patches("M_leisure", rec.m_leisure, false);
        put(date, "awareness", "total", rec.aware[std::size_t(i)]);
        put(date, "ic_load_per_100k", "total", 1e5 * rec.ic_load.row(i).sum() / rec.population);
        put(date, "output_pct", "total", 100.0 * rec.x.row(i).sum() / x0);
        put(date, "labor_pct", "total", 100.0 * rec.l.row(i).sum() / l0);
        sectors("x", rec.x);
        sectors("l", rec.l);
        if (level == RecordLevel::full) {
            sectors("d", rec.d);
            sectors("kappa_D", rec.kappa_d);
            sectors("kappa_S", rec.kappa_s);
            sectors("kappa_F", rec.kappa_f);
        }
    }
}

namespace {

double window_mean_ratio(const SimulationRecord& rec, const Mat& series, double base, Date from, Date to) {
    if (to < from) throw Error("summary window: end before start");
    double total = 0.0;
    long n = 0;
    for (Date d = from; d <= to; d += days{1}, ++n) {
        long i = rec.dates.empty() ? -1 : days_between(rec.dates.front(), d);
        total += (i >= 0 && i < rec.days()) ? series.row(i).sum() / base : 1.0;
    }
    return total / double(n);
}

} // namespace

double output_change_pct(const SimulationRecord& rec, Date from, Date to) {
    return 100.0 * (window_mean_ratio(rec, rec.x, rec.x0.sum(), from, to) - 1.0);
}

double labor_change_pct(const SimulationRecord& rec, Date from, Date to) {
    return 100.0 * (window_mean_ratio(rec, rec.l, rec.l0.sum(), from, to) - 1.0);
}

double cumulative_ic_patients(const SimulationRecord& rec, Date from, Date to) {
    double s = 0.0;
    for (int i = 0; i < rec.days(); ++i) {
        Date d = rec.dates[std::size_t(i)];
        if (d >= from && d <= to) s += rec.incidence.row(i).sum();
    }
    return s * rec.ic_fraction;
}

Vec national_ic_load(const SimulationRecord& rec) { return rec.ic_load.rowwise().sum(); }

double peak_ic_load(const SimulationRecord& rec) {
    return rec.days() == 0 ? 0.0 : national_ic_load(rec).maxCoeff();
}

int count_local_maxima(const Vec& s, double min_prominence_fraction) {
    const Eigen::Index n = s.size();
    if (n < 3) return 0;
    const double floor = min_prominence_fraction * s.maxCoeff();
    int count = 0;
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        if (!(s(i) > s(i - 1) && s(i) >= s(i + 1))) continue;
        double left = s(i);
        for (Eigen::Index j = i - 1; j >= 0 && s(j) <= s(i); --j) left = std::min(left, s(j));
        double right = s(i);
        Eigen::Index j = i + 1;
        for (; j < n && s(j) <= s(i); ++j) right = std::min(right, s(j));
        // A plateau or slope running into the end of the record is not a maximum.
        if (j == n && right >= s(i) - floor) continue;
        if (s(i) - std::max(left, right) >= floor) ++count;
    }
    return count;
}

namespace {

const std::vector<std::string>& customer_facing() {
    static const std::vector<std::string> v{"G47", "H49", "H50", "H51", "I55-56", "L68",
                                            "N77", "N79", "R",   "S",   "T97-98"};
    return v;
}

ChangePoint cap(const ChangePoint& a, const ChangePoint& b) {
    ChangePoint out;
    out.date = b.date;
    out.closure = Keyed::min(a.closure, b.closure, true);
    out.telework = Keyed::min(a.telework, b.telework, true);
    out.private_ban = Keyed::min(a.private_ban, b.private_ban, false);
    out.school_closure = Keyed::min(a.school_closure, b.school_closure, false);
    for (std::size_t c = 0; c < 4; ++c) out.exogenous_scale[c] = std::max(a.exogenous_scale[c], b.exogenous_scale[c]);
    return out;
}

/// Change-points of policy P imposed on `date`: schools reopen after 14 days where they close.
std::vector<ChangePoint> policy_sequence(const std::string& policy, Date date, const CountryDataset& ds) {
    std::vector<ChangePoint> out{policy_change_point(policy, date, ds)};
    if (out.front().school_closure.fallback > 0.0) {
        ChangePoint reopen = out.front();
        reopen.date = date + days{14};
        reopen.school_closure = Keyed{};
        out.push_back(reopen);
    }
    return out;
}

ScenarioSpec base_spec(const std::string& name, const CountryDataset& ds) {
    ScenarioSpec s;
    s.name = name;
    s.country = ds.code;
    return s;
}

void require_patch(const CountryDataset& ds, const std::string& key, const char* what) {
    if (ds.geo.index_of(key) < 0) throw Error(fmt::format("{}: unknown patch '{}'", what, key));
}

ScenarioSpec scenario2_spec(const CountryDataset& ds, const CountryConfig& cfg, int day, int release_months) {
    ScenarioSpec s = base_spec("scenario2", ds);
    s.start = make_date(2020, 1, 1);
    s.end = s.start + days{365 + day};
    s.seasonality = s.holidays = s.exogenous = false;
    s.target_R0 = 3.0;
    s.awareness = AwarenessMode::off;
    require_patch(ds, cfg.capital, "scenario2 capital");
    s.seeds = {{cfg.capital, 1.0}};
    Date at = s.start + days{day};
    s.awareness_date = at;
    s.schedule = policy_sequence("P1", at, ds);
    if (release_months > 0) {
        auto ymd = std::chrono::year_month_day(at) + std::chrono::months(release_months);
        ChangePoint release;
        release.date = std::chrono::sys_days(ymd);
        s.schedule.push_back(release);
    }
    return s;
}

} // namespace

ChangePoint policy_change_point(const std::string& policy, Date date, const CountryDataset& ds) {
    ChangePoint cp;
    cp.date = date;
    auto closed = [&](const std::string& code) {
        if (!ds.sectors.match(code).empty()) cp.closure.values[code] = 1.0;
    };
    if (policy == "P1") {
        cp.closure.fallback = 1.0;
        for (const char* c : {"D", "E"})
            if (!ds.sectors.match(c).empty()) cp.closure.values[c] = 0.0;
    } else if (policy == "P2") {
        for (const auto& c : customer_facing()) closed(c);
    } else if (policy == "P3") {
        for (const char* c : {"I55-56", "R", "S94"}) closed(c);
    } else if (policy != "P4a" && policy != "P4b") {
        throw Error(fmt::format("unknown policy '{}' (expected P1, P2, P3, P4a or P4b)", policy));
    }
    const bool restrictive = policy == "P1" || policy == "P2" || policy == "P3";
    cp.telework.fallback = policy == "P4b" ? 0.0 : 1.0;
    cp.private_ban.fallback = restrictive ? 1.0 : 0.0;
    cp.school_closure.fallback = restrictive ? 1.0 : 0.0;
    return cp;
}

int scenario2_intervention_day(const CountryDataset& ds, const CountryConfig& cfg) {
    // Later interventions give higher first peaks; bisect on the day offset.
    auto peak = [&](int day) {
        ScenarioSpec s = scenario2_spec(ds, cfg, day, 0);
        s.end = s.start + days{day + 90};
        return peak_ic_load(run(s, ds, cfg));
    };
    int lo = 0, hi = 365;
    if (peak(hi) < cfg.ic_beds) return hi;
    if (peak(lo) >= cfg.ic_beds) return lo;
    while (hi - lo > 1) {
        int mid = (lo + hi) / 2;
        (peak(mid) < cfg.ic_beds ? lo : hi) = mid;
    }
    return std::abs(peak(lo) - cfg.ic_beds) <= std::abs(peak(hi) - cfg.ic_beds) ? lo : hi;
}

ScenarioSpec scenario_library(const std::string& name, const ScenarioVariant& v, const CountryDataset& ds,
                              const CountryConfig& cfg) {
    if (name == "scenario1") {
        static const std::vector<Date> allowed{make_date(2020, 3, 3),  make_date(2020, 3, 6),
                                               make_date(2020, 3, 9),  make_date(2020, 3, 12),
                                               make_date(2020, 3, 15), make_date(2020, 3, 18)};
        if (!v.date || std::find(allowed.begin(), allowed.end(), *v.date) == allowed.end())
            throw Error("scenario1: date must be one of 2020-03-03, -06, -09, -12, -15, -18");
        if (cfg.policy.empty()) throw Error("scenario1: country config has no factual policy schedule");
        ScenarioSpec s = base_spec(fmt::format("scenario1_{}_{}", v.policy, format_date(*v.date)), ds);
        s.start = cfg.seed_date;
        s.end = make_date(2021, 1, 1);
        s.seeds = cfg.seeds;
        s.schedule = policy_sequence(v.policy, *v.date, ds);
        const Date release = make_date(2020, 5, 4), released = make_date(2020, 7, 1);
        const ChangePoint held = s.schedule.back();
        for (const auto& f : cfg.policy) {
            if (f.date < release) continue;
            s.schedule.push_back(f.date < released ? cap(held, f) : f);
        }
        return s;
    }
    if (name == "scenario2") {
        if (v.release_months < 2 || v.release_months > 5)
            throw Error("scenario2: release_months must be 2, 3, 4 or 5");
        int day = v.intervention_day ? *v.intervention_day : scenario2_intervention_day(ds, cfg);
        ScenarioSpec s = scenario2_spec(ds, cfg, day, v.release_months);
        s.name = fmt::format("scenario2_{}_release{}", ds.code, v.release_months);
        return s;
    }
    if (name == "scenario3") {
        if (!v.nu || !(*v.nu > 0.0)) throw Error("scenario3: nu must be given and positive");
        ScenarioSpec s = base_spec(fmt::format("scenario3_{}_nu{}", ds.code, format_number(*v.nu)), ds);
        s.start = make_date(2020, 1, 1);
        s.end = s.start + days{730};
        s.seasonality = s.holidays = s.exogenous = false;
        s.target_R0 = 3.0;
        s.awareness = AwarenessMode::pre_triggered;
        require_patch(ds, cfg.capital, "scenario3 capital");
        s.seeds = {{cfg.capital, 1.0}};
        s.overrides["nu"] = *v.nu;
        return s;
    }
    if (name == "scenario4") {
        if (v.second_seed.empty()) throw Error("scenario4: second_seed patch required");
        require_patch(ds, cfg.capital, "scenario4 capital");
        require_patch(ds, v.second_seed, "scenario4 second seed");
        ScenarioSpec s = base_spec(fmt::format("scenario4_{}_{}", ds.code, v.second_seed), ds);
        s.start = make_date(2020, 2, 1);
        s.end = s.start + days{150};
        s.seasonality = s.holidays = s.exogenous = false;
        s.target_R0 = 3.0;
        s.awareness = AwarenessMode::threshold;
        s.seeds[cfg.capital] += 1.0;
        s.seeds[v.second_seed] += 1.0;
        return s;
    }
    throw Error(fmt::format("unknown scenario '{}' (expected scenario1..scenario4)", name));
}

} // namespace epinomic
