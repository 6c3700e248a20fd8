#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <string>
#include <vector>

#include "hum/common.hpp"

// Retrieval objective: user/item affinity scoring, within-domain negative
// sampling, a softmax contrastive loss over one positive and N negatives, and
// a per-domain running ledger of losses feeding the balancing machinery.

namespace hum {

template <typename Real>
double score(const std::vector<Real>& user_emb, const std::vector<Real>& item_emb) {
    if (user_emb.size() != item_emb.size())
        throw std::invalid_argument("score: embedding dimension mismatch");
    double s = 0;
    for (std::size_t i = 0; i < user_emb.size(); ++i)
        s += static_cast<double>(user_emb[i]) * static_cast<double>(item_emb[i]);
    return s;
}

// Draws n distinct items from the pool, excluding the target. Partial
// Fisher-Yates, so cost is O(pool + n) and the draw is deterministic in rng.
inline std::vector<std::string> sample_negatives(const std::vector<std::string>& pool,
                                                 const std::string& target, int n,
                                                 const std::string& domain_name, rng_t& rng) {
    if (n < 0) throw std::invalid_argument("sample_negatives: n must be >= 0");
    std::vector<std::size_t> idx;
    idx.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (pool[i] != target) idx.push_back(i);
    if (idx.size() < static_cast<std::size_t>(n))
        throw std::invalid_argument("sample_negatives: domain " + domain_name + " has only " +
                                    std::to_string(idx.size()) + " candidates besides the target, " +
                                    std::to_string(n) + " needed");
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const std::size_t j =
            static_cast<std::size_t>(k) + uniform_below(rng, idx.size() - static_cast<std::size_t>(k));
        std::swap(idx[static_cast<std::size_t>(k)], idx[j]);
        out.push_back(pool[idx[static_cast<std::size_t>(k)]]);
    }
    return out;
}

template <typename Real>
struct ContrastiveResult {
    double loss = 0;
    std::vector<double> probs;                // softmax over candidates, positive first
    std::vector<Real> d_user;                 // d loss / d user embedding
    std::vector<std::vector<Real>> d_items;   // d loss / d candidate embeddings, positive first
};

// Softmax contrastive loss over candidate items, the positive in slot 0.
// Default is -log p+. The probability form instead uses 1 - p+, which shares
// the minimizer; its value stays in [0, 1] and its gradient is the log form's
// scaled by p+.
template <typename Real>
ContrastiveResult<Real> contrastive_loss(const std::vector<Real>& user_emb,
                                         const std::vector<std::vector<Real>>& candidates,
                                         bool probability_form = false) {
    const std::size_t K = candidates.size();
    if (K == 0) throw std::invalid_argument("contrastive_loss: no candidates");
    const std::size_t d = user_emb.size();

    std::vector<double> s(K);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < K; ++j) {
        s[j] = score(user_emb, candidates[j]);
        mx = std::max(mx, s[j]);
    }
    double z = 0;
    for (std::size_t j = 0; j < K; ++j) {
        s[j] = std::exp(s[j] - mx);
        z += s[j];
    }

    ContrastiveResult<Real> out;
    out.probs.resize(K);
    for (std::size_t j = 0; j < K; ++j) out.probs[j] = s[j] / z;
    const double p_pos = out.probs[0];
    out.loss = probability_form ? 1.0 - p_pos : -std::log(p_pos);

    // d loss / d score_j: log form p_j - [j==0]; probability form scales by p+.
    std::vector<double> ds(K);
    for (std::size_t j = 0; j < K; ++j) {
        ds[j] = out.probs[j] - (j == 0 ? 1.0 : 0.0);
        if (probability_form) ds[j] *= p_pos;
    }

    out.d_user.assign(d, Real(0));
    out.d_items.resize(K);
    for (std::size_t j = 0; j < K; ++j) {
        out.d_items[j].assign(d, Real(0));
        for (std::size_t i = 0; i < d; ++i) {
            out.d_user[i] += static_cast<Real>(ds[j] * static_cast<double>(candidates[j][i]));
            out.d_items[j][i] = static_cast<Real>(ds[j] * static_cast<double>(user_emb[i]));
        }
    }
    return out;
}

// Accumulates per-domain training losses in windows. A window typically spans
// the steps between two weight updates; rolling the window preserves each
// domain's last observed mean so sparse domains never lose their estimate.
class LossLedger {
  public:
    explicit LossLedger(int n_domains) {
        if (n_domains <= 0) throw std::invalid_argument("LossLedger: need at least one domain");
        sum_.assign(static_cast<std::size_t>(n_domains), 0.0);
        count_.assign(static_cast<std::size_t>(n_domains), 0);
        last_mean_.assign(static_cast<std::size_t>(n_domains),
                          std::numeric_limits<double>::quiet_NaN());
    }

    int domains() const { return static_cast<int>(sum_.size()); }

    void record(int domain, double loss) {
        if (domain < 0 || domain >= domains())
            throw std::invalid_argument("LossLedger: domain out of range");
        if (!std::isfinite(loss)) throw std::invalid_argument("LossLedger: loss must be finite");
        sum_[static_cast<std::size_t>(domain)] += loss;
        ++count_[static_cast<std::size_t>(domain)];
        ++total_records_;
        total_sum_ += loss;
    }

    // Mean per domain for the open window; domains silent in this window fall
    // back to their last rolled mean, and NaN marks domains never observed.
    std::vector<double> window_means() const {
        std::vector<double> m(sum_.size());
        for (std::size_t i = 0; i < sum_.size(); ++i)
            m[i] = count_[i] > 0 ? sum_[i] / static_cast<double>(count_[i]) : last_mean_[i];
        return m;
    }

    std::vector<std::size_t> window_counts() const { return count_; }
    std::vector<double> window_sums() const { return sum_; }
    std::vector<double> last_means() const { return last_mean_; }
    std::size_t total_records() const { return total_records_; }
    double total_sum() const { return total_sum_; }

    void roll() {
        for (std::size_t i = 0; i < sum_.size(); ++i)
            if (count_[i] > 0) last_mean_[i] = sum_[i] / static_cast<double>(count_[i]);
        std::fill(sum_.begin(), sum_.end(), 0.0);
        std::fill(count_.begin(), count_.end(), 0);
    }

  private:
    std::vector<double> sum_;
    std::vector<std::size_t> count_;
    std::vector<double> last_mean_;
    std::size_t total_records_ = 0;
    double total_sum_ = 0;
};

} // namespace hum
