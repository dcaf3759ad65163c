#pragma once

#include "epinomic/core.hpp"
#include "epinomic/datahub.hpp"

#include <array>

namespace epinomic {

struct EconState {
    Vec x, d, l, c, f;
    Mat O, S;

    /// Pre-shock equilibrium: x = d = x0, l = l0, O = Z, S = S0.
    static EconState equilibrium(const CountryDataset& ds);
};

struct EconParams {
    Mat A, criticality, S0;
    Vec x0, l0, c0, f0, theta0;
    double c_total = 0.0;
    double tau = 14.0;
    double iota_h = 7.0;
    double iota_f = 6.1;
    double savings = 0.75;

    static EconParams from_dataset(const CountryDataset& ds);
};

struct ShockSet {
    Vec kappa_d, kappa_s, kappa_f;
    static ShockSet zero(int sectors);
};

/// Reading of the household-demand shock formula.
enum class HouseholdShockMode { avoidance, printed };

Vec household_shock(double i_mild, double a_leisure, const Vec& lav_d,
                    HouseholdShockMode mode = HouseholdShockMode::avoidance);

/// Patch-level labor shock for one patch.
Vec labor_shock_patch(double i_tilde, const Vec& closure, const Vec& a_work, const SectorCatalog& sectors);
/// National labor shock: patch shocks weighted by LMC^g_k · T_active^g.
Vec labor_shock(const Vec& i_tilde, const Mat& closure, const Mat& a_work, const SectorCatalog& sectors,
                const Vec& active_population);

/// Linear ramp-in, hold, linear ramp-out of one exogenous component.
struct ShockCourse {
    double magnitude = 0.0;
    Date ramp_in_start{}, ramp_in_end{}, ramp_out_start{}, ramp_out_end{};
    double at(Date t) const;
};

/// Time courses for the four exogenous components (government, investment, goods, services).
struct ExogenousSchedule {
    std::array<ShockCourse, 4> components{};
    std::array<double, 4> at(Date t) const;
};

/// Effective per-sector κ^F from component shocks and the f0 split.
Vec exogenous_kappa(const Mat& split, const std::array<double, 4>& component_shocks);
Vec exogenous_demand(const Vec& f0, const Mat& split, const std::array<double, 4>& component_shocks);

Vec household_demand(const Vec& kappa_d, const Vec& theta0, double savings, double c_total);
Mat intermediate_demand(const Vec& d_prev, const Mat& S, const Mat& S0, const Mat& A, double tau);
Vec labor_capacity(const Vec& l, const Vec& l0, const Vec& x0);
Vec input_capacity(const Mat& S, const Mat& A, const Mat& criticality, const Vec& x0);
/// Every input with 𝒜 > 0 treated as critical.
Vec leontief_capacity(const Mat& S, const Mat& A);

struct Rationed {
    Vec x, c, f;
    Mat O;
};

Rationed produce_and_ration(const Mat& O_d, const Vec& c_d, const Vec& f_d, const Vec& x_cap, const Vec& x_inp);
Mat update_inventories(const Mat& S, const Mat& O, const Mat& A, const Vec& x);
Vec adjust_labor(const Vec& l, const Vec& l0, const Vec& x0, const Vec& x_inp, const Vec& d, const Vec& x_cap,
                 double iota_h, double iota_f, const Vec& l_max);

EconState step_econ_day(const EconState& state, const EconParams& params, const ShockSet& shocks);

} // namespace epinomic
