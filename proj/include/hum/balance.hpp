#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

// Domain balancing: turns per-domain losses into importance shares and evolves
// a weight distribution over domains by a smoothed multiplicative update. All
// of this runs in double regardless of the training precision.

namespace hum {

// Weights never fall below this after an update; it only engages when the
// exponential underflows the normalized scale.
constexpr double kWeightFloor = 1e-15;

// Share of total loss per domain: l_i / sum_j l_j. NaN entries (domains with
// no observations yet) are replaced by the mean of the observed entries; with
// nothing observed, or all losses zero, every domain gets an equal share.
inline std::vector<double> domain_importance(const std::vector<double>& losses) {
    if (losses.empty()) throw std::invalid_argument("domain_importance: no domains");
    const std::size_t n = losses.size();
    double observed_sum = 0;
    std::size_t observed = 0;
    for (double l : losses) {
        if (std::isnan(l)) continue;
        if (!(l >= 0.0) || std::isinf(l))
            throw std::invalid_argument("domain_importance: losses must be finite and >= 0");
        observed_sum += l;
        ++observed;
    }
    std::vector<double> filled(n);
    if (observed == 0) return std::vector<double>(n, 1.0 / static_cast<double>(n));
    const double fallback = observed_sum / static_cast<double>(observed);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        filled[i] = std::isnan(losses[i]) ? fallback : losses[i];
        total += filled[i];
    }
    if (total == 0.0) return std::vector<double>(n, 1.0 / static_cast<double>(n));
    for (auto& x : filled) x /= total;
    return filled;
}

namespace detail {

inline void check_weight_vector(const std::vector<double>& w, const char* who) {
    if (w.empty()) throw std::invalid_argument(std::string(who) + ": no domains");
    double sum = 0;
    for (double x : w) {
        if (!(x > 0.0) || !std::isfinite(x))
            throw std::invalid_argument(std::string(who) + ": weights must be strictly positive");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument(std::string(who) + ": weights must sum to 1");
}

inline void check_losses(const std::vector<double>& l, std::size_t n, const char* who) {
    if (l.size() != n) throw std::invalid_argument(std::string(who) + ": size mismatch");
    for (double x : l)
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(who) + ": losses must be finite");
}

} // namespace detail

// Value of the smoothed balancing objective at w:
//   sum_i w_i l_i - (1/alpha) sum_i w_i log(w_i / prev_i).
// Larger alpha lets the weights chase the losses harder; the KL term anchors
// them to the previous distribution. Maximized over the simplex by
// update_weights below.
inline double kl_objective(const std::vector<double>& w, const std::vector<double>& prev,
                           const std::vector<double>& losses, double alpha) {
    detail::check_weight_vector(prev, "kl_objective");
    detail::check_losses(losses, prev.size(), "kl_objective");
    if (w.size() != prev.size()) throw std::invalid_argument("kl_objective: size mismatch");
    if (!(alpha > 0.0)) throw std::invalid_argument("kl_objective: alpha must be > 0");
    double value = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] < 0.0) throw std::invalid_argument("kl_objective: weights must be >= 0");
        if (w[i] == 0.0) continue; // 0 log 0 = 0
        value += w[i] * losses[i] - w[i] * std::log(w[i] / prev[i]) / alpha;
    }
    return value;
}

// Closed-form maximizer of kl_objective over the simplex:
//   w_i = prev_i exp(alpha l_i) / Z.
// Computed in the shift-invariant form exp(alpha (l_i - max_l)), so adding a
// constant to every loss cannot change the result. Two exact fixed points are
// honored bit for bit: alpha == 0 and all losses identical both return prev
// unchanged, with no arithmetic applied.
inline std::vector<double> update_weights(const std::vector<double>& prev,
                                          const std::vector<double>& losses, double alpha) {
    detail::check_weight_vector(prev, "update_weights");
    detail::check_losses(losses, prev.size(), "update_weights");
    if (alpha < 0.0) throw std::invalid_argument("update_weights: alpha must be >= 0");

    if (alpha == 0.0) return prev;
    bool all_equal = true;
    for (std::size_t i = 1; i < losses.size(); ++i)
        if (losses[i] != losses[0]) {
            all_equal = false;
            break;
        }
    if (all_equal) return prev;

    double max_l = -std::numeric_limits<double>::infinity();
    for (double l : losses) max_l = std::max(max_l, l);

    std::vector<double> w(prev.size());
    double z = 0;
    for (std::size_t i = 0; i < prev.size(); ++i) {
        w[i] = prev[i] * std::exp(alpha * (losses[i] - max_l));
        z += w[i];
    }
    for (auto& x : w) x /= z;

    bool floored = false;
    double sum = 0;
    for (auto& x : w) {
        if (x < kWeightFloor) {
            x = kWeightFloor;
            floored = true;
        }
        sum += x;
    }
    if (floored)
        for (auto& x : w) x /= sum;
    return w;
}

template <typename Real>
struct WeightedBatch {
    double loss = 0;
    std::vector<Real> example_scale; // d(batch loss)/d(example loss)
};

// Batch objective: mean over examples of (n_domains * w_domain) * loss. With
// every weight equal this collapses to the plain mean, and that case is
// detected and computed as the plain mean so uniform weights reproduce
// unweighted training bit for bit (n * (1/n) != 1 in floating point for some
// n, so the multiplier must not be applied).
template <typename Real>
WeightedBatch<Real> weighted_batch_loss(const std::vector<int>& domains,
                                        const std::vector<double>& losses,
                                        const std::vector<double>& weights) {
    if (domains.size() != losses.size())
        throw std::invalid_argument("weighted_batch_loss: size mismatch");
    if (domains.empty()) throw std::invalid_argument("weighted_batch_loss: empty batch");
    detail::check_weight_vector(weights, "weighted_batch_loss");
    const double n = static_cast<double>(weights.size());
    const double inv_b = 1.0 / static_cast<double>(domains.size());

    bool uniform = true;
    for (std::size_t i = 1; i < weights.size(); ++i)
        if (weights[i] != weights[0]) {
            uniform = false;
            break;
        }

    WeightedBatch<Real> out;
    out.example_scale.resize(domains.size());
    double acc = 0;
    for (std::size_t i = 0; i < domains.size(); ++i) {
        const int d = domains[i];
        if (d < 0 || static_cast<std::size_t>(d) >= weights.size())
            throw std::invalid_argument("weighted_batch_loss: domain id out of range");
        const double scale = uniform ? 1.0 : n * weights[static_cast<std::size_t>(d)];
        out.example_scale[i] = static_cast<Real>(scale * inv_b);
        acc += scale * losses[i];
    }
    out.loss = acc * inv_b;
    return out;
}

} // namespace hum
