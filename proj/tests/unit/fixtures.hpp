#pragma once

#include "epinomic/coupler.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace epinomic::testing {

/// Synthetic dataset with G patches and K sectors; every invariant holds.
inline DatasetParts synthetic_parts(int G = 2, int K = 3, unsigned seed = 7) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DatasetParts p;
    p.code = "TST";
    for (int g = 0; g < G; ++g) {
        p.geo.patch_ids.push_back("P" + std::to_string(g + 1));
        p.geo.names.push_back("Patch " + std::to_string(g + 1));
    }
    p.geo.population = Mat(kAgeGroups, G);
    for (int g = 0; g < G; ++g)
        for (int i = 0; i < kAgeGroups; ++i) p.geo.population(i, g) = 20000.0 + 10000.0 * u(rng) + 5000.0 * g;
    p.geo.active_population = p.geo.population.middleRows(3, 10).colwise().sum().transpose();
    p.geo.area = Vec::Constant(G, 1000.0);

    p.commuters = Mat::Zero(G, G);
    for (int g = 0; g < G; ++g)
        for (int h = 0; h < G; ++h) p.commuters(g, h) = p.geo.active_population(g) * (g == h ? 0.6 : 0.15 / G);

    // Reciprocal matrices: N_ij = w_ij · T_j / T̄ with w symmetric.
    Vec T = p.geo.population.rowwise().sum();
    auto reciprocal = [&](double scale) {
        Mat w(kAgeGroups, kAgeGroups);
        for (int i = 0; i < kAgeGroups; ++i)
            for (int j = 0; j <= i; ++j) w(i, j) = w(j, i) = scale * (0.2 + u(rng)) / (1.0 + std::abs(i - j));
        Mat n(kAgeGroups, kAgeGroups);
        for (int i = 0; i < kAgeGroups; ++i)
            for (int j = 0; j < kAgeGroups; ++j) n(i, j) = w(i, j) * T(j) / T.mean();
        return n;
    };
    p.contacts.home = reciprocal(1.0);
    p.contacts.leisure_public = reciprocal(0.5);
    p.contacts.leisure_private = reciprocal(0.4);
    p.contacts.school = Mat::Zero(kAgeGroups, kAgeGroups);
    p.contacts.school.block(1, 1, 3, 3).setConstant(2.0);

    auto& s = p.sectors;
    for (int k = 0; k < K; ++k) s.codes.push_back("S" + std::to_string(k + 1));
    s.f_workplace = Vec(K);
    s.f_telework = Vec(K);
    s.lav_c = Vec(K);
    s.lav_d = Vec(K);
    s.fp = Vec(K);
    s.inventory_days = Vec(K);
    s.employee_share = Vec(K);
    for (int k = 0; k < K; ++k) {
        s.f_workplace(k) = 0.2 + 0.3 * u(rng);
        s.f_telework(k) = 0.1 + 0.3 * u(rng);
        s.lav_c(k) = u(rng);
        s.lav_d(k) = u(rng);
        s.fp(k) = 0.2 + 0.8 * u(rng);
        s.inventory_days(k) = 5.0 + 20.0 * u(rng);
        s.employee_share(k) = 1.0 + u(rng);
    }
    s.employee_share /= s.employee_share.sum();
    s.criticality = Mat::Zero(K, K);
    for (int l = 0; l < K; ++l)
        for (int k = 0; k < K; ++k) s.criticality(l, k) = (l + k) % 3 == 0 ? 1.0 : ((l + k) % 3 == 1 ? 0.5 : 0.0);
    s.lmc = Mat(G, K);
    for (int g = 0; g < G; ++g) {
        for (int k = 0; k < K; ++k) s.lmc(g, k) = 0.5 + u(rng);
        s.lmc.row(g) /= s.lmc.row(g).sum();
    }
    for (int k = 0; k < K; ++k) {
        Mat m = reciprocal(0.6 + 0.1 * k);
        m.topRows(3).setZero();
        m.leftCols(3).setZero();
        p.contacts.work_source.emplace_back(s.codes[std::size_t(k)], m);
    }

    p.x0 = Vec(K);
    p.Z = Mat(K, K);
    for (int k = 0; k < K; ++k) p.x0(k) = 1000.0 * (1.0 + u(rng));
    for (int l = 0; l < K; ++l)
        for (int k = 0; k < K; ++k) p.Z(k, l) = 0.4 / K * p.x0(l) * (0.5 + u(rng));
    p.c0 = Vec(K);
    p.f0 = Vec(K);
    for (int k = 0; k < K; ++k) {
        double rest = p.x0(k) - p.Z.row(k).sum();
        p.c0(k) = 0.6 * rest;
        p.f0(k) = rest - p.c0(k);
    }
    p.l0 = 0.4 * p.x0;
    return p;
}

inline CountryDataset synthetic_dataset(int G = 2, int K = 3, unsigned seed = 7) {
    return build_dataset(synthetic_parts(G, K, seed));
}

inline CountryConfig synthetic_config(const CountryDataset& ds) {
    CountryConfig cfg = CountryConfig::defaults_for(ds.code);
    cfg.capital = ds.geo.patch_ids.front();
    cfg.ic_beds = 50.0;
    cfg.seed_date = make_date(2020, 2, 1);
    cfg.holidays.clear();
    cfg.policy.clear();
    cfg.parameters.clear();
    cfg.exogenous = ExogenousSchedule{};
    return cfg;
}

inline std::filesystem::path packaged(const std::string& code) {
    return std::filesystem::path(EPINOMIC_DATA_DIR) / code;
}

/// Unique empty directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("epinomic_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline double rel_diff(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

} // namespace epinomic::testing
