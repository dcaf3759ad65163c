#pragma once

#include "epinomic/datahub.hpp"
#include "epinomic/econ_network.hpp"
#include "epinomic/epi_core.hpp"
#include "epinomic/memory_feedback.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace epinomic {

/// A value for every patch or sector: a default plus keyed exceptions.
struct Keyed {
    double fallback = 0.0;
    std::map<std::string, double> values;

    /// Exact key, else fallback.
    double exact(const std::string& key) const;
    /// Longest key that is a prefix of `code`, else fallback.
    double prefix(const std::string& code) const;
    /// Pointwise minimum under the given lookup rule.
    static Keyed min(const Keyed& a, const Keyed& b, bool by_prefix);
};

/// One policy change-point as written in configuration.
struct ChangePoint {
    Date date{};
    Keyed closure;        ///< keyed by sector code or prefix ("R" → R90-92, R93)
    Keyed telework;       ///< keyed by sector code or prefix
    Keyed private_ban;    ///< keyed by patch id or name
    Keyed school_closure; ///< keyed by patch id or name
    std::array<double, 4> exogenous_scale{1.0, 1.0, 1.0, 1.0};
};

struct PolicyPoint {
    PolicyInputs inputs;
    std::array<double, 4> exogenous_scale{1.0, 1.0, 1.0, 1.0};
};

/// Piecewise-constant policy with a linear ramp of `ramp_days` at each change-point.
class PolicySchedule {
public:
    PolicySchedule() = default;
    PolicySchedule(const std::vector<ChangePoint>& points, const CountryDataset& ds, int ramp_days = 5);

    PolicyPoint at(Date t) const;
    int ramp_days() const { return ramp_; }
    std::size_t size() const { return dates_.size(); }

private:
    int G_ = 0, K_ = 0, ramp_ = 5;
    std::vector<Date> dates_;
    std::vector<PolicyPoint> targets_, starts_;
};

PolicyPoint resolve_change_point(const ChangePoint& cp, const CountryDataset& ds);

/// Tunable model parameters shared by all submodels.
struct ModelParams {
    EpiParams epi = EpiParams::defaults();
    BehaviorParams behavior;
    double tau = 14.0;
    double iota_h = 7.0;
    double iota_f = 6.1;
    double savings = 0.75;
    double ic_fraction = 1.0;
    HouseholdShockMode household_shock = HouseholdShockMode::avoidance;

    /// Names accepted by `set`.
    static const std::vector<std::string>& names();
    void set(const std::string& name, double value);
    double get(const std::string& name) const;
};

/// Country-level configuration stored next to a dataset (country.toml).
struct CountryConfig {
    std::string code;
    double ic_beds = 1000.0;
    double reference_ic_beds = 1000.0;
    double reference_population = 11431000.0;
    double ic_fraction = 1.0;
    double beta = 0.031;
    double seasonal_amplitude = 0.0;
    double seasonal_shift = 0.0;
    ExogenousSchedule exogenous;
    std::vector<std::pair<Date, Date>> holidays; ///< inclusive ranges with schools off
    std::string capital;                         ///< patch used for single-seed scenarios
    Date seed_date{};
    std::map<std::string, double> seeds;         ///< calibrated initial exposed per patch
    std::vector<ChangePoint> policy;             ///< factual 2020 schedule
    std::map<std::string, double> parameters;    ///< default overrides (calibrated values)

    static CountryConfig defaults_for(const std::string& code);
};

struct ScenarioSpec {
    std::string name = "custom";
    std::string country;
    Date start{};
    Date end{};
    bool seasonality = true;
    bool holidays = true;
    bool exogenous = true;
    AwarenessMode awareness = AwarenessMode::threshold;
    std::optional<Date> awareness_date; ///< force awareness on from this date
    std::map<std::string, double> seeds;
    std::vector<double> seed_age_weights; ///< empty → contact-weighted allocation
    std::vector<ChangePoint> schedule;
    int ramp_days = 5;
    std::map<std::string, double> overrides;
    std::optional<double> target_R0;
};

struct SimulationRecord {
    std::string scenario, country;
    std::vector<Date> dates;
    std::vector<std::string> patch_ids, sector_codes;
    double population = 0.0;
    double ic_fraction = 1.0;
    double ic_beds = 0.0;
    Vec x0, l0;
    Mat q_hosp, incidence, ic_load, deaths; ///< days × G
    Mat m_eff, m_leisure;                   ///< days × G
    Mat x, l, d;                            ///< days × K
    Mat kappa_d, kappa_s, kappa_f;          ///< days × K
    std::vector<int> aware;

    int days() const { return int(dates.size()); }
};

/// Full mutable state of one run.
struct RunState {
    Date date{};
    EpiState epi;
    EconState econ;
    HospitalMemory memory;
    Awareness awareness;
    double last_incidence_per_100k = 0.0;
};

/// Everything a run needs that does not change day to day.
struct RunContext {
    const CountryDataset* ds = nullptr;
    ModelParams params;
    EconParams econ;
    PolicySchedule schedule;
    ExogenousSchedule exogenous;
    std::vector<std::pair<Date, Date>> holidays;
    bool seasonality = true;
    std::optional<Date> awareness_date;
    double ic_beds = 0.0;
};

struct DayRow {
    Vec q_hosp, incidence, m_eff, m_leisure, deaths;
    Vec x, l, d, kappa_d, kappa_s, kappa_f;
    bool aware = false;
};

DayRow step_day(RunState& state, const RunContext& ctx);

/// Moves seeds(g) persons from S to E, split over ages by column g of `age_weights`.
EpiState seed_epidemic(const EpiState& state, const Vec& seeds, const Mat& age_weights);
/// Ages × patches; each column is the age distribution of pre-pandemic contacts.
Mat contact_age_weights(const CountryDataset& ds);

/// Assembles parameters and context for a scenario; exposed for calibration snapshots.
RunContext make_context(const ScenarioSpec& spec, const CountryDataset& ds, const CountryConfig& cfg);
RunState initial_state(const ScenarioSpec& spec, const RunContext& ctx);

SimulationRecord run(const ScenarioSpec& spec, const CountryDataset& ds, const CountryConfig& cfg);
/// Continues from an explicit state until `end` (exclusive).
SimulationRecord run_from(RunState state, const RunContext& ctx, Date end, const std::string& name = "custom");

enum class RecordLevel { standard, full };
void write_record_csv(const SimulationRecord& rec, const std::filesystem::path& file,
                      RecordLevel level = RecordLevel::standard);

/// Summary statistics over [from, to] inclusive; days outside the record count as baseline.
double output_change_pct(const SimulationRecord& rec, Date from, Date to);
double labor_change_pct(const SimulationRecord& rec, Date from, Date to);
double cumulative_ic_patients(const SimulationRecord& rec, Date from, Date to);
double peak_ic_load(const SimulationRecord& rec);
Vec national_ic_load(const SimulationRecord& rec);
int count_local_maxima(const Vec& series, double min_prominence_fraction = 0.05);

struct ScenarioVariant {
    std::string policy;               ///< scenario1: P1..P4b
    std::optional<Date> date;         ///< scenario1 imposition date
    int release_months = 0;           ///< scenario2
    std::optional<double> nu;         ///< scenario3
    std::string second_seed;          ///< scenario4
    std::optional<int> intervention_day; ///< scenario2: days after start, searched when absent
};

ScenarioSpec scenario_library(const std::string& name, const ScenarioVariant& variant,
                              const CountryDataset& ds, const CountryConfig& cfg);
/// The P1–P4b closure sets as change-point content.
ChangePoint policy_change_point(const std::string& policy, Date date, const CountryDataset& ds);
/// Day offset of the scenario-2 intervention bringing peak IC load closest to capacity.
int scenario2_intervention_day(const CountryDataset& ds, const CountryConfig& cfg);

} // namespace epinomic
