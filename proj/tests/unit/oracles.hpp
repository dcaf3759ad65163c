#pragma once

// Independent reference implementations shared by the unit and acceptance tests.

#include "fixtures.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace epinomic::testing {

/// Parameters for an n-age fixture with distinct age fractions.
inline EpiParams small_params(int n) {
    EpiParams p = EpiParams::defaults();
    p.a = Vec::LinSpaced(n, 0.8, 0.4);
    p.h = Vec::LinSpaced(n, 0.02, 0.3);
    p.m = Vec::LinSpaced(n, 0.01, 0.2);
    p.s = Vec::LinSpaced(n, 0.6, 1.0);
    return p;
}

inline std::vector<ComposedContacts> random_contacts(int n, int G, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::vector<ComposedContacts> out(static_cast<std::size_t>(G));
    for (auto& c : out) {
        c.work = Mat(n, n);
        c.total = Mat(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                c.work(i, j) = u(rng) * 0.3;
                c.total(i, j) = c.work(i, j) + u(rng);
            }
    }
    return out;
}

inline EpiState random_state(const Mat& T, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    EpiState x = EpiState::zeros(T.rows(), T.cols());
    for (Eigen::Index i = 0; i < T.size(); ++i) {
        double left = T.data()[i];
        for (auto m : EpiState::members) {
            if (m == &EpiState::S) continue;
            double v = 0.02 * u(rng) * T.data()[i];
            (x.*m).data()[i] = v;
            left -= v;
        }
        x.S.data()[i] = left;
    }
    return x;
}

/// Straight double loop over the published force-of-infection expression.
inline Mat loop_oracle(const EpiState& x, const std::vector<ComposedContacts>& c, const Mat& P, double b, const Vec& s,
                const Mat& T) {
    const int n = int(T.rows()), G = int(T.cols());
    Mat out(n, G);
    for (int g = 0; g < G; ++g)
        for (int i = 0; i < n; ++i) {
            double local = 0.0;
            for (int j = 0; j < n; ++j) {
                double inf = x.Ip(j, g) + x.Ia(j, g) + x.Im(j, g);
                local += (c[std::size_t(g)].total(i, j) - c[std::size_t(g)].work(i, j)) * inf / T(j, g);
            }
            double work = 0.0;
            for (int h = 0; h < G; ++h)
                for (int j = 0; j < n; ++j) {
                    double inf = x.Ip(j, h) + x.Ia(j, h) + x.Im(j, h);
                    work += P(g, h) * c[std::size_t(h)].work(i, j) * inf / T(j, h);
                }
            out(i, g) = s(i) * b * x.S(i, g) * (local + work);
        }
    return out;
}

inline double max_rel(const Mat& a, const Mat& b) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) m = std::max(m, rel_diff(a.data()[i], b.data()[i]));
    return m;
}

struct Fixture30 {
    Mat T, P;
    std::vector<ComposedContacts> c;
    EpiParams p;
    EpiState x0;
};

inline Fixture30 fixture30() {
    Fixture30 f;
    const int n = 3, G = 2;
    f.T = Mat(n, G);
    f.T << 3e5, 2e5, 4e5, 3.5e5, 2e5, 1e5;
    f.P = Mat(G, G);
    f.P << 0.5, 0.1, 0.15, 0.55;
    f.c = random_contacts(n, G, 21);
    f.p = small_params(n);
    f.p.beta = 0.06;
    f.p.seasonal_amplitude = 0.2;
    f.x0 = EpiState::susceptible(f.T);
    f.x0.S(1, 0) -= 50.0;
    f.x0.E(1, 0) += 50.0;
    return f;
}

inline EpiState run30(const Fixture30& f, int substeps) {
    EpiState x = f.x0;
    for (int d = 0; d < 30; ++d) x = integrate_day(x, f.p, f.c, f.P, f.T, d, substeps).state;
    return x;
}

/// Small economy with hand-picked numbers; every input of every sector is listed.
struct Mini {
    EconParams p;
    EconState s;
};

inline Mini mini3() {
    Mini m;
    const int K = 3;
    Mat Z(K, K);
    Z << 10, 20, 5, 15, 5, 10, 5, 10, 20;
    Vec x0(K);
    x0 << 100, 120, 90;
    Vec c0(K), f0(K);
    c0 << 40, 60, 30;
    for (int k = 0; k < K; ++k) f0(k) = x0(k) - Z.row(k).sum() - c0(k);
    Vec n(K);
    n << 10, 14, 7;
    m.p.A = Z * x0.cwiseInverse().asDiagonal();
    m.p.S0 = Z * n.asDiagonal();
    m.p.criticality = Mat(K, K);
    m.p.criticality << 1, 0.5, 0, 0.5, 1, 1, 0, 1, 0.5;
    m.p.x0 = x0;
    m.p.l0 = 0.4 * x0;
    m.p.c0 = c0;
    m.p.f0 = f0;
    m.p.c_total = c0.sum();
    m.p.theta0 = c0 / c0.sum();
    m.p.iota_h = 7.0;
    m.p.iota_f = 6.1;
    m.s = {x0, x0, m.p.l0, c0, f0, Z, m.p.S0};
    return m;
}

using V = std::vector<double>;
using M = std::vector<V>;

/// Day loop written out cell by cell, independent of the library's matrix code.
struct Sheet {
    int K;
    M A, S0, crit;
    V x0, l0, f0, theta0;
    double ctot, tau, ih, ifire, sav;
    V d, l;
    M S;

    void step(const V& kd, const V& ks, const V& kf) {
        M od(K, V(K));
        for (int k = 0; k < K; ++k)
            for (int j = 0; j < K; ++j) od[k][j] = std::max(0.0, A[k][j] * d[j] + (S0[k][j] - S[k][j]) / tau);
        double kept = 0.0;
        for (int k = 0; k < K; ++k) kept += (1 - kd[k]) * theta0[k];
        double agg = sav * (1 - kept);
        V cd(K), fd(K), dn(K);
        for (int k = 0; k < K; ++k) {
            cd[k] = (1 - agg) * ctot * (1 - kd[k]) * theta0[k] / kept;
            fd[k] = (1 - kf[k]) * f0[k];
            dn[k] = cd[k] + fd[k];
            for (int j = 0; j < K; ++j) dn[k] += od[k][j];
        }
        V lmax(K), lc(K), xcap(K), xinp(K), x(K), ratio(K);
        for (int k = 0; k < K; ++k) {
            lmax[k] = (1 - ks[k]) * l0[k];
            lc[k] = std::min(l[k], lmax[k]);
            xcap[k] = lc[k] / l0[k] * x0[k];
            xinp[k] = 1e300;
            for (int i = 0; i < K; ++i) {
                if (crit[i][k] == 0 || A[i][k] == 0) continue;
                double r = S[i][k] / A[i][k];
                xinp[k] = std::min(xinp[k], crit[i][k] == 1 ? r : 0.5 * (r + x0[k]));
            }
            x[k] = std::min({xcap[k], xinp[k], dn[k]});
            ratio[k] = dn[k] > 0 ? x[k] / dn[k] : 1.0;
        }
        M Sn(K, V(K));
        for (int i = 0; i < K; ++i)
            for (int k = 0; k < K; ++k)
                Sn[i][k] = std::max(0.0, S[i][k] + ratio[i] * od[i][k] - A[i][k] * x[k]);
        V ln(K);
        for (int k = 0; k < K; ++k) {
            double dl = l0[k] / x0[k] * (std::min(xinp[k], dn[k]) - xcap[k]);
            double v = lc[k] + dl / (dl >= 0 ? ih : ifire);
            ln[k] = std::min(std::max(v, 0.0), lmax[k]);
        }
        S = Sn;
        d = dn;
        l = ln;
        out_x = x;
        out_c.assign(K, 0.0);
        for (int k = 0; k < K; ++k) out_c[k] = ratio[k] * cd[k];
    }
    V out_x, out_c;
};

inline M to_rows(const Mat& m) {
    M out(std::size_t(m.rows()), V(std::size_t(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[std::size_t(i)][std::size_t(j)] = m(i, j);
    return out;
}

inline V to_v(const Vec& v) { return V(v.data(), v.data() + v.size()); }

inline Sheet sheet_for(const Mini& m) {
    return Sheet{int(m.p.x0.size()), to_rows(m.p.A), to_rows(m.p.S0), to_rows(m.p.criticality), to_v(m.p.x0),
                 to_v(m.p.l0), to_v(m.p.f0), to_v(m.p.theta0), m.p.c_total, m.p.tau, m.p.iota_h, m.p.iota_f,
                 m.p.savings, to_v(m.s.d), to_v(m.s.l), to_rows(m.s.S), {}, {}};
}

inline double rel(double a, double b) { return rel_diff(a, b); }

} // namespace epinomic::testing
