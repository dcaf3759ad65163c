#pragma once

#include "epinomic/core.hpp"

#include <deque>
#include <vector>

namespace epinomic {

/// Per-patch newest-first history of hospital load per 100 000 inhabitants.
class HospitalMemory {
public:
    static constexpr int kHorizon = 182;

    explicit HospitalMemory(int patches = 0, int horizon = kHorizon);

    int patches() const { return int(buffers_.size()); }
    int horizon() const { return horizon_; }
    int length() const { return buffers_.empty() ? 0 : int(buffers_.front().size()); }
    /// Entry τ days back for patch g (0 = newest).
    double at(int g, int tau) const { return buffers_[std::size_t(g)][std::size_t(tau)]; }

    /// Appends 1e5·load/population per patch, dropping entries beyond the horizon.
    void record_load(const Vec& hospital_load, const Vec& population);
    /// Appends already-normalized entries.
    void push_normalized(const Vec& per_100k);

private:
    int horizon_;
    std::vector<std::deque<double>> buffers_;
};

/// Exponentially weighted mean over the full horizon; missing history counts as zero load.
Vec ema_load(const HospitalMemory& memory, double nu);

enum class AwarenessMode { threshold, pre_triggered, off };

struct BehaviorParams {
    double nu = 20.8;
    double mu = 0.76;
    double ic_ratio = 1.0;
    double xi_eff = 0.39;
    double pi_eff = 0.070;
    double xi_work = 10.0;
    double pi_work = 0.032;
    double xi_leisure = 10.0;
    double pi_leisure = 0.055;
    double awareness_threshold = 0.2;
    Mat connectivity;  ///< C^{gh}
    Vec willingness;   ///< W_k
};

struct BehaviorSignal {
    Vec m_eff;     ///< per patch
    Vec m_leisure; ///< per patch
    Mat m_work;    ///< G × K

    Vec a_leisure() const { return Vec::Ones(m_leisure.size()) - m_leisure; }
    Mat a_work() const { return Mat::Ones(m_work.rows(), m_work.cols()) - m_work; }
    static BehaviorSignal unaware(int patches, int sectors);
};

/// κ^{gh} = (P̄^{gh}+P̄^{hg})/2 normalized by the mean over h ≠ g; C^{gg} = 1.
Mat connectivity_weights(const Mat& mobility_normalized);
/// Reference IC beds per 100k divided by the country's IC beds per 100k.
double ic_ratio(double ref_beds, double ref_population, double beds, double population);

Vec perceived_load(const Vec& ema, double mu, const Mat& connectivity, double ic_ratio);
double gompertz(double xi, double pi, double q);
BehaviorSignal gompertz_response(const Vec& perceived, const BehaviorParams& params, bool aware);

class Awareness {
public:
    explicit Awareness(AwarenessMode mode = AwarenessMode::threshold, double threshold = 0.2);
    /// Latches once national daily hospital incidence per 100k reaches the threshold.
    bool update(double incidence_per_100k);
    bool active() const { return active_; }
    void force(bool on) { active_ = on; }

private:
    AwarenessMode mode_;
    double threshold_;
    bool active_;
};

} // namespace epinomic
