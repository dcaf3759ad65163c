#include "epinomic/epi_core.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace epinomic {

const std::array<const char*, 8>& EpiState::names() {
    static const std::array<const char*, 8> n{"S", "E", "I_presy", "I_asy", "I_mild", "Q_hosp", "R", "D"};
    return n;
}

EpiState EpiState::zeros(Eigen::Index n, Eigen::Index G) {
    EpiState s;
    for (auto m : members) s.*m = Mat::Zero(n, G);
    return s;
}

EpiState EpiState::susceptible(const Mat& T) {
    EpiState s = zeros(T.rows(), T.cols());
    s.S = T;
    return s;
}

Mat EpiState::total() const {
    Mat t = Mat::Zero(S.rows(), S.cols());
    for (auto m : members) t += this->*m;
    return t;
}

double EpiState::min_coeff() const {
    double v = kInf;
    for (auto m : members) v = std::min(v, (this->*m).minCoeff());
    return v;
}

bool EpiState::all_finite() const {
    for (auto m : members)
        if (!(this->*m).allFinite()) return false;
    return true;
}

EpiParams EpiParams::defaults() {
    EpiParams p;
    auto pct = [](std::initializer_list<double> v) {
        Vec out(Eigen::Index(v.size()));
        Eigen::Index i = 0;
        for (double x : v) out(i++) = x / 100.0;
        return out;
    };
    p.a = pct({82, 82, 82, 82, 78, 78, 78, 78, 70, 70, 70, 70, 65, 65, 65, 65, 17.8});
    p.h = pct({1.0, 1.0, 1.0, 1.2, 1.5, 2.5, 2.5, 3.0, 3.0, 6.0, 6.0, 12.0, 12.0, 45.0, 45.0, 95.0, 97.0});
    p.m = pct({0.0, 0.0, 1.2, 1.2, 1.5, 1.5, 2.7, 2.7, 4.1, 4.1, 8.0, 8.0, 16.4, 16.4, 26.6, 26.6, 40.4});
    p.s = pct({56, 56, 82, 100, 100, 100, 100, 100, 100, 100, 100, 100, 100, 100, 100, 100, 100});
    return p;
}

PolicyInputs PolicyInputs::none(int G, int K) {
    return {Mat::Zero(G, K), Mat::Zero(G, K), Vec::Zero(G), Vec::Zero(G)};
}

double seasonal_beta(double beta, double A, double shift, double t) {
    return beta * (1.0 + A * std::cos(2.0 * std::numbers::pi * (t - shift) / 365.0));
}

double remaining_work_fraction(double closure, double mandate, double f_wp, double f_tel, double m_work,
                               double i_active, double labor_ratio) {
    double a_bar = f_wp + (1.0 - closure) * (1.0 - f_wp);
    double e_bar = 1.0 - mandate * f_tel;
    return std::min({a_bar, e_bar, m_work, 1.0 - i_active, labor_ratio});
}

double remaining_public_leisure(const Vec& closure_row, double m_leisure, double i_mild, const Vec& lav_c) {
    double denom = lav_c.sum();
    if (!(denom > 0.0)) throw Error("remaining_public_leisure: all LAV^C weights are zero");
    double open = (Vec::Ones(closure_row.size()) - closure_row).dot(lav_c) / denom;
    return std::min({open, m_leisure, 1.0 - i_mild});
}

double remaining_private_leisure(double ban, double m_leisure, double i_mild) {
    return std::min({1.0 - ban, m_leisure, 1.0 - i_mild});
}

ComposedContacts compose_contacts(int g, const PolicyInputs& pol, const BehaviorSignal& beh,
                                  const EpiSummaries& sum, const Vec& labor_ratio, const CountryDataset& ds) {
    const auto& c = ds.contacts;
    const auto& sec = ds.sectors;
    const int K = sec.size();
    const double m_eff = beh.m_eff(g);
    ComposedContacts out;
    out.work = Mat::Zero(c.home.rows(), c.home.cols());
    for (int k = 0; k < K; ++k) {
        double b = remaining_work_fraction(pol.closure(g, k), pol.telework(g, k), sec.f_workplace(k),
                                           sec.f_telework(k), beh.m_work(g, k), sum.i_mild_active(g),
                                           labor_ratio(k));
        double w = sec.lmc(g, k) * b * m_eff;
        if (w != 0.0) out.work += w * c.work[std::size_t(k)];
    }
    double cc = remaining_public_leisure(pol.closure.row(g).transpose(), beh.m_leisure(g), sum.i_mild(g), sec.lav_c);
    double dd = remaining_private_leisure(pol.private_ban(g), beh.m_leisure(g), sum.i_mild(g));
    out.total = c.home + (1.0 - pol.school_closure(g)) * m_eff * c.school + out.work +
                cc * m_eff * c.leisure_public + dd * m_eff * c.leisure_private;
    return out;
}

std::vector<ComposedContacts> compose_all(const PolicyInputs& pol, const BehaviorSignal& beh,
                                          const EpiSummaries& sum, const Vec& labor_ratio,
                                          const CountryDataset& ds) {
    std::vector<ComposedContacts> out;
    out.reserve(std::size_t(ds.patches()));
    for (int g = 0; g < ds.patches(); ++g) out.push_back(compose_contacts(g, pol, beh, sum, labor_ratio, ds));
    return out;
}

std::vector<ComposedContacts> prepandemic_contacts(const CountryDataset& ds) {
    const int G = ds.patches(), K = ds.sector_count();
    EpiSummaries none{Vec::Zero(G), Vec::Zero(G), Vec::Zero(G)};
    return compose_all(PolicyInputs::none(G, K), BehaviorSignal::unaware(G, K), none, Vec::Ones(K), ds);
}

Mat force_of_infection(const EpiState& st, const std::vector<ComposedContacts>& contacts, const Mat& P,
                       double beta_bar, const Vec& s, const Mat& T, WorkSusceptible mode) {
    const Eigen::Index n = T.rows(), G = T.cols();
    if ((T.array() <= 0.0).any()) throw Error("force_of_infection: zero population in some (age, patch)");
    Mat prev = (st.Ip + st.Ia + st.Im).cwiseQuotient(T);
    Mat local(n, G), work(n, G);
    for (Eigen::Index g = 0; g < G; ++g) {
        const auto& c = contacts[std::size_t(g)];
        local.col(g) = (c.total - c.work) * prev.col(g);
        work.col(g) = c.work * prev.col(g);
    }
    Mat lambda(n, G);
    if (mode == WorkSusceptible::resident) {
        Mat commute = work * P.transpose(); // (i,g) = Σ_h P^{gh} work(i,h)
        lambda = st.S.cwiseProduct(local + commute);
    } else {
        Mat commute = st.S.cwiseProduct(work) * P.transpose();
        lambda = st.S.cwiseProduct(local) + commute;
    }
    return (beta_bar * s).asDiagonal() * lambda;
}

EpiState epi_derivatives(const EpiState& x, const Mat& lambda, const EpiParams& p) {
    EpiState d;
    const double ia = 1.0 / p.alpha, ig = 1.0 / p.gamma, id = 1.0 / p.delta, ie = 1.0 / p.epsilon,
                 iz = 1.0 / p.zeta;
    auto rows = [](const Vec& v) { return v.asDiagonal(); };
    const Eigen::Index n = x.S.rows();
    Vec one = Vec::Ones(n);
    d.S = iz * x.R - lambda;
    d.E = lambda - ia * x.E;
    d.Ip = ia * x.E - ig * x.Ip;
    d.Ia = ig * (rows(p.a) * x.Ip) - id * x.Ia;
    d.Im = ig * (rows(one - p.a) * x.Ip) - id * x.Im;
    d.Q = id * (rows(p.h) * x.Im) - ie * x.Q;
    d.R = id * x.Ia + id * (rows(one - p.h) * x.Im) + ie * (rows(one - p.m) * x.Q) - iz * x.R;
    d.D = ie * (rows(p.m) * x.Q);
    return d;
}

namespace {

EpiState axpy(const EpiState& x, double h, const EpiState& k) {
    EpiState out;
    for (auto m : EpiState::members) out.*m = x.*m + h * (k.*m);
    return out;
}

} // namespace

DayResult integrate_day(const EpiState& x0, const EpiParams& p, const std::vector<ComposedContacts>& contacts,
                        const Mat& P, const Mat& T, double t, int substeps) {
    if (substeps < 1) throw Error("integrate_day: substeps must be positive");
    const double h = 1.0 / substeps;
    const double pop = T.sum();
    DayResult res;
    res.state = x0;
    res.admissions = Mat::Zero(T.rows(), T.cols());
    res.min_before_clip = x0.min_coeff();
    const double id = 1.0 / p.delta;
    auto rhs = [&](const EpiState& x, double tt, Mat& adm_rate) {
        double b = seasonal_beta(p.beta, p.seasonal_amplitude, p.seasonal_shift, tt);
        Mat lambda = force_of_infection(x, contacts, P, b, p.s, T, p.work_susceptible);
        adm_rate = id * (p.h.asDiagonal() * x.Im);
        return epi_derivatives(x, lambda, p);
    };
    for (int step = 0; step < substeps; ++step) {
        double tt = t + step * h;
        const EpiState& x = res.state;
        Mat a1, a2, a3, a4;
        EpiState k1 = rhs(x, tt, a1);
        EpiState k2 = rhs(axpy(x, 0.5 * h, k1), tt + 0.5 * h, a2);
        EpiState k3 = rhs(axpy(x, 0.5 * h, k2), tt + 0.5 * h, a3);
        EpiState k4 = rhs(axpy(x, h, k3), tt + h, a4);
        EpiState next;
        for (auto m : EpiState::members)
            next.*m = x.*m + (h / 6.0) * (k1.*m + 2.0 * (k2.*m) + 2.0 * (k3.*m) + k4.*m);
        res.admissions += (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        if (!next.all_finite()) throw Error("integrate_day: non-finite state");
        res.min_before_clip = std::min(res.min_before_clip, next.min_coeff());
        for (auto m : EpiState::members) {
            Mat& c = next.*m;
            for (Eigen::Index i = 0; i < c.size(); ++i)
                if (c.data()[i] < 0.0) {
                    res.clip_mass -= c.data()[i];
                    c.data()[i] = 0.0;
                }
        }
        if (res.clip_mass > 1e-9 * pop)
            throw Error(fmt::format("integrate_day: clipped mass {} exceeds tolerance", res.clip_mass));
        res.state = std::move(next);
    }
    return res;
}

double ngm_radius_per_beta(const EpiParams& p, const std::vector<ComposedContacts>& contacts, const Mat& P,
                           const Mat& T, double tol, int max_iter) {
    const Eigen::Index n = T.rows(), G = T.cols(), N = n * G;
    const double dur = p.gamma + p.delta;
    Mat K = Mat::Zero(N, N);
    auto idx = [n](Eigen::Index i, Eigen::Index g) { return g * n + i; };
    for (Eigen::Index g = 0; g < G; ++g) {
        Mat local = contacts[std::size_t(g)].total - contacts[std::size_t(g)].work;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                K(idx(i, g), idx(j, g)) += p.s(i) * T(i, g) * local(i, j) * dur / T(j, g);
        for (Eigen::Index h = 0; h < G; ++h) {
            if (P(g, h) == 0.0) continue;
            const Mat& w = contacts[std::size_t(h)].work;
            for (Eigen::Index i = 0; i < n; ++i) {
                double sus = p.work_susceptible == WorkSusceptible::resident ? T(i, g) : T(i, h);
                for (Eigen::Index j = 0; j < n; ++j)
                    K(idx(i, g), idx(j, h)) += p.s(i) * sus * P(g, h) * w(i, j) * dur / T(j, h);
            }
        }
    }
    // Power iteration on K + I: the shift keeps imprimitive matrices convergent.
    Vec v = Vec::Ones(N) / std::sqrt(double(N));
    double rho = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Vec w = K * v + v;
        double norm = w.norm();
        if (norm == 0.0) return 0.0;
        double next = norm - 1.0;
        w /= norm;
        if (it > 0 && std::abs(next - rho) <= tol * std::max(std::abs(next), 1e-300) &&
            (w - v).lpNorm<Eigen::Infinity>() <= std::sqrt(tol)) {
            return std::max(next, 0.0);
        }
        rho = next;
        v = w;
    }
    if (K.isZero(0.0)) return 0.0;
    throw Error("next_generation_R0: power iteration did not converge");
}

double next_generation_R0(const EpiParams& p, const std::vector<ComposedContacts>& contacts, const Mat& P,
                          const Mat& T) {
    if (p.beta == 0.0) return 0.0;
    return p.beta * ngm_radius_per_beta(p, contacts, P, T);
}

double next_generation_R0(const EpiParams& p, const CountryDataset& ds) {
    return next_generation_R0(p, prepandemic_contacts(ds), ds.mobility.normalized, ds.geo.population);
}

double calibrate_beta(double target, const EpiParams& p, const std::vector<ComposedContacts>& contacts,
                      const Mat& P, const Mat& T) {
    if (target < 0.0) throw Error("calibrate_beta: target must be non-negative");
    if (target == 0.0) return 0.0;
    const double rho = ngm_radius_per_beta(p, contacts, P, T);
    if (!(rho > 0.0)) throw Error("calibrate_beta: next-generation matrix is zero");
    const double guess = target / rho;
    double lo = 0.5 * guess, hi = 2.0 * guess;
    auto r0 = [&](double b) { return b * rho; };
    if (!(r0(lo) <= target && r0(hi) >= target)) throw Error("calibrate_beta: bracket failure");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double v = r0(mid);
        if (std::abs(v - target) <= 1e-9) return mid;
        (v < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double calibrate_beta(double target, const EpiParams& p, const CountryDataset& ds) {
    return calibrate_beta(target, p, prepandemic_contacts(ds), ds.mobility.normalized, ds.geo.population);
}

EpiSummaries symptomatic_summaries(const EpiState& x, const Mat& T, const Mat& P) {
    const Eigen::Index n = T.rows();
    Vec w = n == kAgeGroups ? active_age_weights() : Vec::Ones(n);
    EpiSummaries s;
    s.i_mild = x.Im.colwise().sum().cwiseQuotient(T.colwise().sum()).transpose();
    s.i_mild_active = (w.transpose() * x.Im).cwiseQuotient(w.transpose() * T).transpose();
    s.i_tilde = s.i_mild_active.cwiseProduct(P.rowwise().sum());
    return s;
}

} // namespace epinomic
