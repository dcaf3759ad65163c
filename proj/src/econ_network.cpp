#include "epinomic/econ_network.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace epinomic {

EconState EconState::equilibrium(const CountryDataset& ds) {
    const auto& io = ds.io;
    return {io.x0, io.x0, io.l0, io.c0, io.f0, io.Z, io.S0};
}

EconParams EconParams::from_dataset(const CountryDataset& ds) {
    EconParams p;
    p.A = ds.io.A;
    p.criticality = ds.sectors.criticality;
    p.S0 = ds.io.S0;
    p.x0 = ds.io.x0;
    p.l0 = ds.io.l0;
    p.c0 = ds.io.c0;
    p.f0 = ds.io.f0;
    p.c_total = ds.io.c0.sum();
    p.theta0 = p.c_total > 0.0 ? Vec(ds.io.c0 / p.c_total) : Vec(Vec::Zero(ds.io.c0.size()));
    return p;
}

ShockSet ShockSet::zero(int K) { return {Vec::Zero(K), Vec::Zero(K), Vec::Zero(K)}; }

Vec household_shock(double i_mild, double a_leisure, const Vec& lav_d, HouseholdShockMode mode) {
    if (mode == HouseholdShockMode::printed) {
        double m_leisure = 1.0 - a_leisure;
        return (i_mild + (1.0 - i_mild) * m_leisure) * (Vec::Ones(lav_d.size()) - lav_d);
    }
    return (i_mild + (1.0 - i_mild) * a_leisure) * lav_d;
}

Vec labor_shock_patch(double i_tilde, const Vec& closure, const Vec& a_work, const SectorCatalog& s) {
    const int K = s.size();
    Vec out(K);
    for (int k = 0; k < K; ++k) {
        double furlough = closure(k) * (1.0 - s.f_workplace(k) - s.f_telework(k));
        double absent = std::max(0.0, a_work(k) - s.f_telework(k));
        out(k) = i_tilde + (1.0 - i_tilde) * std::max(furlough, absent);
    }
    return out;
}

Vec labor_shock(const Vec& i_tilde, const Mat& closure, const Mat& a_work, const SectorCatalog& s,
                const Vec& active) {
    const int K = s.size();
    const Eigen::Index G = i_tilde.size();
    Vec num = Vec::Zero(K), den = Vec::Zero(K);
    for (Eigen::Index g = 0; g < G; ++g) {
        Vec kg = labor_shock_patch(i_tilde(g), closure.row(g).transpose(), a_work.row(g).transpose(), s);
        Vec w = s.lmc.row(g).transpose() * active(g);
        num += w.cwiseProduct(kg);
        den += w;
    }
    Vec out(K);
    for (int k = 0; k < K; ++k) out(k) = den(k) > 0.0 ? num(k) / den(k) : 0.0;
    return out;
}

double ShockCourse::at(Date t) const {
    if (magnitude == 0.0) return 0.0;
    auto frac = [](Date a, Date b, Date x) {
        double span = double(days_between(a, b));
        if (span <= 0.0) return x >= b ? 1.0 : 0.0;
        return std::clamp(double(days_between(a, x)) / span, 0.0, 1.0);
    };
    if (t < ramp_in_start || t >= ramp_out_end) return 0.0;
    if (t < ramp_in_end) return magnitude * frac(ramp_in_start, ramp_in_end, t);
    if (t < ramp_out_start) return magnitude;
    return magnitude * (1.0 - frac(ramp_out_start, ramp_out_end, t));
}

std::array<double, 4> ExogenousSchedule::at(Date t) const {
    std::array<double, 4> out{};
    for (std::size_t c = 0; c < 4; ++c) out[c] = components[c].at(t);
    return out;
}

Vec exogenous_kappa(const Mat& split, const std::array<double, 4>& shocks) {
    Vec k = Vec::Zero(split.rows());
    for (Eigen::Index c = 0; c < split.cols(); ++c) k += shocks[std::size_t(c)] * split.col(c);
    return k;
}

Vec exogenous_demand(const Vec& f0, const Mat& split, const std::array<double, 4>& shocks) {
    return (Vec::Ones(f0.size()) - exogenous_kappa(split, shocks)).cwiseProduct(f0);
}

Vec household_demand(const Vec& kappa_d, const Vec& theta0, double savings, double c_total) {
    Vec kept = (Vec::Ones(kappa_d.size()) - kappa_d).cwiseProduct(theta0);
    double denom = kept.sum();
    if (!(denom > 0.0)) return Vec::Zero(kappa_d.size());
    double aggregate = savings * (1.0 - denom);
    return (1.0 - aggregate) * c_total * (kept / denom);
}

Mat intermediate_demand(const Vec& d_prev, const Mat& S, const Mat& S0, const Mat& A, double tau) {
    Mat od = A * d_prev.asDiagonal();
    if (std::isfinite(tau)) od += (S0 - S) / tau;
    return od.cwiseMax(0.0);
}

Vec labor_capacity(const Vec& l, const Vec& l0, const Vec& x0) { return l.cwiseQuotient(l0).cwiseProduct(x0); }

Vec input_capacity(const Mat& S, const Mat& A, const Mat& crit, const Vec& x0) {
    const Eigen::Index K = A.cols();
    Vec out = Vec::Constant(K, kInf);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index l = 0; l < K; ++l) {
            double level = crit(l, k);
            if (level == 0.0) continue;
            if (A(l, k) == 0.0) {
                spdlog::warn("input_capacity: listed input {} of sector {} has zero technical coefficient", l, k);
                continue;
            }
            double ratio = S(l, k) / A(l, k);
            double cap = level == 1.0 ? ratio : 0.5 * (ratio + x0(k));
            out(k) = std::min(out(k), cap);
        }
    return out;
}

Vec leontief_capacity(const Mat& S, const Mat& A) {
    const Eigen::Index K = A.cols();
    Vec out = Vec::Constant(K, kInf);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index l = 0; l < K; ++l)
            if (A(l, k) > 0.0) out(k) = std::min(out(k), S(l, k) / A(l, k));
    return out;
}

Rationed produce_and_ration(const Mat& O_d, const Vec& c_d, const Vec& f_d, const Vec& x_cap, const Vec& x_inp) {
    const Eigen::Index K = c_d.size();
    Vec d = O_d.rowwise().sum() + c_d + f_d;
    Rationed r;
    r.x.resize(K);
    Vec ratio(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        double x = std::min({x_cap(k), x_inp(k), d(k)});
        r.x(k) = std::max(x, 0.0);
        ratio(k) = d(k) > 0.0 ? r.x(k) / d(k) : (d(k) == 0.0 ? 1.0 : 0.0);
    }
    r.c = c_d.cwiseProduct(ratio);
    r.f = f_d.cwiseProduct(ratio);
    r.O = ratio.asDiagonal() * O_d;
    return r;
}

Mat update_inventories(const Mat& S, const Mat& O, const Mat& A, const Vec& x) {
    return (S + O - A * x.asDiagonal()).cwiseMax(0.0);
}

Vec adjust_labor(const Vec& l, const Vec& l0, const Vec& x0, const Vec& x_inp, const Vec& d, const Vec& x_cap,
                 double iota_h, double iota_f, const Vec& l_max) {
    const Eigen::Index K = l.size();
    Vec out(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        double dl = l0(k) / x0(k) * (std::min(x_inp(k), d(k)) - x_cap(k));
        double next = l(k) + dl / (dl >= 0.0 ? iota_h : iota_f);
        out(k) = std::clamp(next, 0.0, l_max(k));
    }
    return out;
}

EconState step_econ_day(const EconState& st, const EconParams& p, const ShockSet& sh) {
    const Eigen::Index K = p.x0.size();
    Mat od = intermediate_demand(st.d, st.S, p.S0, p.A, p.tau);
    Vec cd = household_demand(sh.kappa_d, p.theta0, p.savings, p.c_total);
    Vec fd = (Vec::Ones(K) - sh.kappa_f).cwiseProduct(p.f0);
    Vec d = od.rowwise().sum() + cd + fd;

    Vec l_max = (Vec::Ones(K) - sh.kappa_s).cwiseProduct(p.l0);
    Vec l = st.l.cwiseMin(l_max);
    Vec x_cap = labor_capacity(l, p.l0, p.x0);
    Vec x_inp = input_capacity(st.S, p.A, p.criticality, p.x0);

    Rationed r = produce_and_ration(od, cd, fd, x_cap, x_inp);
    EconState next;
    next.x = r.x;
    next.d = d;
    next.c = r.c;
    next.f = r.f;
    next.O = r.O;
    next.S = update_inventories(st.S, r.O, p.A, r.x);
    next.l = adjust_labor(l, p.l0, p.x0, x_inp, d, x_cap, p.iota_h, p.iota_f, l_max);
    return next;
}

} // namespace epinomic
