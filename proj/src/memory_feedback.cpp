#include "epinomic/memory_feedback.hpp"

#include <fmt/format.h>

#include <cmath>

namespace epinomic {

HospitalMemory::HospitalMemory(int patches, int horizon)
    : horizon_(horizon), buffers_(std::size_t(patches)) {
    if (horizon <= 0) throw Error("HospitalMemory: horizon must be positive");
}

void HospitalMemory::push_normalized(const Vec& v) {
    if (v.size() != patches()) throw Error("HospitalMemory: patch count mismatch");
    for (int g = 0; g < patches(); ++g) {
        if (!(v(g) >= 0.0)) throw Error(fmt::format("HospitalMemory: negative load {} in patch {}", v(g), g));
        auto& b = buffers_[std::size_t(g)];
        b.push_front(v(g));
        if (int(b.size()) > horizon_) b.pop_back();
    }
}

void HospitalMemory::record_load(const Vec& load, const Vec& population) {
    if (load.size() != population.size()) throw Error("record_load: dimension mismatch");
    Vec v(load.size());
    for (Eigen::Index g = 0; g < load.size(); ++g) {
        if (load(g) < 0.0) throw Error(fmt::format("record_load: negative load in patch {}", g));
        v(g) = 1e5 * load(g) / population(g);
    }
    push_normalized(v);
}

Vec ema_load(const HospitalMemory& memory, double nu) {
    if (!(nu > 0.0)) throw Error("ema_load: nu must be positive");
    const int H = memory.horizon();
    // τ runs over 0..H inclusive; the buffer never holds τ = H, so that term is always missing.
    std::vector<double> w(static_cast<std::size_t>(H) + 1);
    double norm = 0.0;
    for (int tau = 0; tau <= H; ++tau) {
        w[std::size_t(tau)] = std::isinf(nu) ? 1.0 : std::exp(-tau / nu);
        norm += w[std::size_t(tau)];
    }
    Vec out = Vec::Zero(memory.patches());
    const int L = memory.length();
    for (int g = 0; g < memory.patches(); ++g) {
        double s = 0.0;
        for (int tau = 0; tau < L; ++tau) s += w[std::size_t(tau)] * memory.at(g, tau);
        out(g) = s / norm;
    }
    return out;
}

BehaviorSignal BehaviorSignal::unaware(int patches, int sectors) {
    return {Vec::Ones(patches), Vec::Ones(patches), Mat::Ones(patches, sectors)};
}

Mat connectivity_weights(const Mat& P) {
    const Eigen::Index G = P.rows();
    Mat kappa = 0.5 * (P + P.transpose());
    Mat C = Mat::Zero(G, G);
    for (Eigen::Index g = 0; g < G; ++g) {
        double mean = 0.0;
        for (Eigen::Index h = 0; h < G; ++h)
            if (h != g) mean += kappa(g, h);
        if (G > 1) mean /= double(G - 1);
        for (Eigen::Index h = 0; h < G; ++h)
            C(g, h) = h == g ? 1.0 : (mean > 0.0 ? kappa(g, h) / mean : 0.0);
    }
    return C;
}

double ic_ratio(double ref_beds, double ref_population, double beds, double population) {
    if (!(beds > 0.0 && ref_beds > 0.0 && population > 0.0 && ref_population > 0.0))
        throw Error("ic_ratio: capacities and populations must be positive");
    return (ref_beds / ref_population) / (beds / population);
}

Vec perceived_load(const Vec& ema, double mu, const Mat& C, double r) {
    const Eigen::Index G = ema.size();
    Eigen::Index h = 0;
    ema.maxCoeff(&h);
    Vec out(G);
    for (Eigen::Index g = 0; g < G; ++g) {
        if (g == h) {
            out(g) = r * ema(g);
            continue;
        }
        double w = mu * C(g, h);
        out(g) = r * (ema(g) + w * ema(h)) / (1.0 + w);
    }
    return out;
}

double gompertz(double xi, double pi, double q) { return 1.0 - std::exp(-xi * std::exp(-pi * q)); }

BehaviorSignal gompertz_response(const Vec& q, const BehaviorParams& p, bool aware) {
    const int G = int(q.size());
    const int K = int(p.willingness.size());
    if (!aware) return BehaviorSignal::unaware(G, K);
    BehaviorSignal s{Vec(G), Vec(G), Mat(G, K)};
    for (int g = 0; g < G; ++g) {
        s.m_eff(g) = gompertz(p.xi_eff, p.pi_eff, q(g));
        s.m_leisure(g) = gompertz(p.xi_leisure, p.pi_leisure, q(g));
        for (int k = 0; k < K; ++k) s.m_work(g, k) = gompertz(p.xi_work, p.willingness(k) * p.pi_work, q(g));
    }
    return s;
}

Awareness::Awareness(AwarenessMode mode, double threshold)
    : mode_(mode), threshold_(threshold), active_(mode == AwarenessMode::pre_triggered) {}

bool Awareness::update(double incidence) {
    if (mode_ == AwarenessMode::threshold && !active_ && incidence >= threshold_) active_ = true;
    return active_;
}

} // namespace epinomic
