#pragma once

#include "epinomic/core.hpp"
#include "epinomic/datahub.hpp"
#include "epinomic/memory_feedback.hpp"

#include <array>
#include <vector>

namespace epinomic {

/// SEIQRD compartments, each ages × patches (persons).
struct EpiState {
    Mat S, E, Ip, Ia, Im, Q, R, D;

    static constexpr std::array<Mat EpiState::*, 8> members{
        &EpiState::S, &EpiState::E, &EpiState::Ip, &EpiState::Ia,
        &EpiState::Im, &EpiState::Q, &EpiState::R, &EpiState::D};
    static const std::array<const char*, 8>& names();

    static EpiState susceptible(const Mat& population);
    static EpiState zeros(Eigen::Index ages, Eigen::Index patches);
    Mat total() const;
    double min_coeff() const;
    bool all_finite() const;
};

enum class WorkSusceptible { resident, destination };

struct EpiParams {
    double alpha = 4.5;
    double gamma = 0.7;
    double delta = 7.0;
    double epsilon = 11.4;
    double zeta = 9.2 * 30.44;
    double beta = 0.031;
    Vec a, h, m, s;
    double seasonal_amplitude = 0.0;
    double seasonal_shift = 0.0;
    WorkSusceptible work_susceptible = WorkSusceptible::resident;

    /// Durations above plus the published age-specific fractions.
    static EpiParams defaults();
};

struct PolicyInputs {
    Mat closure;        ///< G × K, 1 = fully prohibited
    Mat telework;       ///< G × K mandate
    Vec private_ban;    ///< G
    Vec school_closure; ///< G

    static PolicyInputs none(int patches, int sectors);
};

struct EpiSummaries {
    Vec i_mild;        ///< prevalence of mild cases
    Vec i_mild_active; ///< same restricted to ages 16–65
    Vec i_tilde;       ///< active prevalence × employed fraction
};

struct ComposedContacts {
    Mat total;
    Mat work;
};

double seasonal_beta(double beta, double amplitude, double shift, double t);

double remaining_work_fraction(double closure, double mandate, double f_workplace, double f_telework,
                               double m_work, double i_mild_active, double labor_ratio);
double remaining_public_leisure(const Vec& closure_row, double m_leisure, double i_mild, const Vec& lav_c);
double remaining_private_leisure(double private_ban, double m_leisure, double i_mild);

ComposedContacts compose_contacts(int g, const PolicyInputs& policy, const BehaviorSignal& behavior,
                                  const EpiSummaries& summaries, const Vec& labor_ratio,
                                  const CountryDataset& ds);
std::vector<ComposedContacts> compose_all(const PolicyInputs& policy, const BehaviorSignal& behavior,
                                          const EpiSummaries& summaries, const Vec& labor_ratio,
                                          const CountryDataset& ds);
/// All factors at their pre-pandemic value.
std::vector<ComposedContacts> prepandemic_contacts(const CountryDataset& ds);

/// New infections per day for every (age, patch).
Mat force_of_infection(const EpiState& state, const std::vector<ComposedContacts>& contacts,
                       const Mat& mobility, double beta_bar, const Vec& s, const Mat& population,
                       WorkSusceptible mode = WorkSusceptible::resident);

EpiState epi_derivatives(const EpiState& state, const Mat& lambda, const EpiParams& params);

struct DayResult {
    EpiState state;
    Mat admissions;               ///< hospital admissions during the day per (age, patch)
    double clip_mass = 0.0;       ///< total mass removed by clipping negatives
    double min_before_clip = 0.0; ///< most negative entry seen before clipping
};

/// Classical RK4 over one day with `substeps` equal steps and contacts held fixed.
DayResult integrate_day(const EpiState& state, const EpiParams& params,
                        const std::vector<ComposedContacts>& contacts, const Mat& mobility,
                        const Mat& population, double t, int substeps = 4);

/// Spectral radius of the next-generation matrix per unit β.
double ngm_radius_per_beta(const EpiParams& params, const std::vector<ComposedContacts>& contacts,
                           const Mat& mobility, const Mat& population, double tol = 1e-10,
                           int max_iter = 10000);
double next_generation_R0(const EpiParams& params, const std::vector<ComposedContacts>& contacts,
                          const Mat& mobility, const Mat& population);
double next_generation_R0(const EpiParams& params, const CountryDataset& ds);
double calibrate_beta(double target_R0, const EpiParams& params,
                      const std::vector<ComposedContacts>& contacts, const Mat& mobility,
                      const Mat& population);
double calibrate_beta(double target_R0, const EpiParams& params, const CountryDataset& ds);

EpiSummaries symptomatic_summaries(const EpiState& state, const Mat& population, const Mat& mobility);

} // namespace epinomic
