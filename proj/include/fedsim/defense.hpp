#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "fedsim/error.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/parallel.hpp"
#include "fedsim/param_vector.hpp"

namespace fedsim {

enum class DefenseStrategy { FedAvg, Comed, Geomed, Cotmed, Krum, NormBound, Rsa, Vba };

enum class NormCapRule { MedianOfNorms, Fixed };

struct DefenseConfig {
    DefenseStrategy strategy = DefenseStrategy::FedAvg;
    double vba_threshold = 0.005;
    double lazy_cosine_threshold = 0.99;
    int trim_count = -1;  // Cotmed; -1 selects ceil(m/4) at aggregation time
    int krum_f = 1;
    NormCapRule norm_cap_rule = NormCapRule::MedianOfNorms;
    double norm_cap = 0.0;  // used when norm_cap_rule == Fixed
    double rsa_step = 0.01;
    double geomed_tol = 1e-8;
    int geomed_max_iter = 200;
};

enum class VerdictLabel { Benign, Poisoned, Lazy };

struct Verdict {
    int ed_id = 0;
    VerdictLabel label = VerdictLabel::Benign;
    double temp_accuracy = 0.0;
    double accuracy_drop = 0.0;
};

inline char verdict_letter(VerdictLabel v) {
    switch (v) {
        case VerdictLabel::Benign: return 'B';
        case VerdictLabel::Poisoned: return 'P';
        case VerdictLabel::Lazy: return 'L';
    }
    return '?';
}

namespace detail {

inline void require_updates(const std::vector<ModelUpdate>& updates, const char* what) {
    if (updates.empty())
        throw Error(ErrorCategory::Config, std::string(what) + ": no updates to aggregate");
    for (std::size_t i = 1; i < updates.size(); ++i)
        require_same_shape(updates[0].delta, updates[i].delta, what);
}

// Median of a scratch buffer; even counts average the two central values.
inline double median_inplace(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    if (m % 2 == 1) return v[m / 2];
    return 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace detail

// Componentwise median.
inline ParamVector agg_comed(const std::vector<ModelUpdate>& updates) {
    detail::require_updates(updates, "agg_comed");
    ParamVector out(updates.front().delta.shape);
    std::vector<double> scratch(updates.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        for (std::size_t i = 0; i < updates.size(); ++i)
            scratch[i] = updates[i].delta.values[j];
        out.values[j] = detail::median_inplace(scratch);
    }
    return out;
}

struct GeomedResult {
    ParamVector delta;
    int iterations = 0;
    bool converged = false;
};

// Geometric median by Weiszfeld iteration, started from the componentwise
// mean. Stops when successive iterates are closer than tol; a non-converged
// run returns the last iterate with converged = false.
inline GeomedResult agg_geomed(const std::vector<ModelUpdate>& updates, double tol = 1e-8,
                               int max_iter = 200) {
    detail::require_updates(updates, "agg_geomed");
    const std::size_t m = updates.size();
    const std::size_t n = updates.front().delta.size();

    GeomedResult res;
    res.delta = ParamVector(updates.front().delta.shape);
    for (const ModelUpdate& u : updates) res.delta += u.delta;
    res.delta *= 1.0 / static_cast<double>(m);
    if (m == 1) {
        res.converged = true;
        res.iterations = 1;
        return res;
    }

    constexpr double kDenomGuard = 1e-12;
    ParamVector next(res.delta.shape);
    for (int iter = 0; iter < max_iter; ++iter) {
        double weight_sum = 0.0;
        std::fill(next.values.begin(), next.values.end(), 0.0);
        for (const ModelUpdate& u : updates) {
            const double dist = std::sqrt(sq_distance(u.delta, res.delta));
            const double w = 1.0 / std::max(dist, kDenomGuard);
            weight_sum += w;
            for (std::size_t j = 0; j < n; ++j) next.values[j] += w * u.delta.values[j];
        }
        for (std::size_t j = 0; j < n; ++j) next.values[j] /= weight_sum;
        const double step = std::sqrt(sq_distance(next, res.delta));
        std::swap(res.delta, next);
        res.iterations = iter + 1;
        if (step < tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

// Componentwise trimmed mean: per coordinate, sort, drop trim_count from each
// end, average the rest.
inline ParamVector agg_cotmed(const std::vector<ModelUpdate>& updates, int trim_count) {
    detail::require_updates(updates, "agg_cotmed");
    const std::size_t m = updates.size();
    if (trim_count < 0 || 2 * static_cast<std::size_t>(trim_count) >= m)
        throw Error(ErrorCategory::Config,
                    "agg_cotmed: trim_count " + std::to_string(trim_count) +
                        " invalid for " + std::to_string(m) + " updates");
    ParamVector out(updates.front().delta.shape);
    std::vector<double> scratch(m);
    const std::size_t lo = static_cast<std::size_t>(trim_count);
    const std::size_t hi = m - lo;
    for (std::size_t j = 0; j < out.size(); ++j) {
        for (std::size_t i = 0; i < m; ++i) scratch[i] = updates[i].delta.values[j];
        std::sort(scratch.begin(), scratch.end());
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += scratch[i];
        out.values[j] = acc / static_cast<double>(hi - lo);
    }
    return out;
}

// Krum: score each update by the summed squared distances to its m - f - 2
// nearest peers and keep the single lowest-scoring update. Ties go to the
// lowest ed_id.
inline ParamVector agg_krum(const std::vector<ModelUpdate>& updates, int f) {
    detail::require_updates(updates, "agg_krum");
    const std::size_t m = updates.size();
    if (f < 0 || m < static_cast<std::size_t>(f) + 3)
        throw Error(ErrorCategory::Config,
                    "agg_krum: need at least f + 3 = " + std::to_string(f + 3) +
                        " updates, got " + std::to_string(m));
    const std::size_t neighbors = m - static_cast<std::size_t>(f) - 2;

    std::vector<std::vector<double>> dist(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            dist[i][j] = dist[j][i] = sq_distance(updates[i].delta, updates[j].delta);

    std::size_t best = 0;
    double best_score = 0.0;
    int best_id = 0;
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> others;
        others.reserve(m - 1);
        for (std::size_t j = 0; j < m; ++j)
            if (j != i) others.push_back(dist[i][j]);
        std::sort(others.begin(), others.end());
        double score = 0.0;
        for (std::size_t k = 0; k < neighbors; ++k) score += others[k];
        if (i == 0 || score < best_score ||
            (score == best_score && updates[i].ed_id < best_id)) {
            best = i;
            best_score = score;
            best_id = updates[i].ed_id;
        }
    }
    return updates[best].delta;
}

inline double norm_cap_from(const std::vector<ModelUpdate>& updates, NormCapRule rule,
                            double fixed_cap) {
    if (rule == NormCapRule::Fixed) {
        if (fixed_cap <= 0.0)
            throw Error(ErrorCategory::Config, "norm bounding: fixed cap must be positive");
        return fixed_cap;
    }
    std::vector<double> norms(updates.size());
    for (std::size_t i = 0; i < updates.size(); ++i) norms[i] = norm(updates[i].delta);
    return detail::median_inplace(norms);
}

// Norm bounding: rescale oversized updates down to the cap, then average.
inline ParamVector agg_normbound(const std::vector<ModelUpdate>& updates, double cap) {
    detail::require_updates(updates, "agg_normbound");
    if (cap <= 0.0) throw Error(ErrorCategory::Config, "agg_normbound: cap must be positive");
    ParamVector out(updates.front().delta.shape);
    for (const ModelUpdate& u : updates) {
        const double n = norm(u.delta);
        const double s = n > cap ? cap / n : 1.0;
        for (std::size_t j = 0; j < out.size(); ++j) out.values[j] += s * u.delta.values[j];
    }
    out *= 1.0 / static_cast<double>(updates.size());
    return out;
}

// Sign-binarized aggregation: step times the componentwise mean of signs.
inline ParamVector agg_rsa(const std::vector<ModelUpdate>& updates, double step) {
    detail::require_updates(updates, "agg_rsa");
    if (step <= 0.0) throw Error(ErrorCategory::Config, "agg_rsa: step must be positive");
    ParamVector out(updates.front().delta.shape);
    for (const ModelUpdate& u : updates)
        for (std::size_t j = 0; j < out.size(); ++j) {
            const double v = u.delta.values[j];
            out.values[j] += v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        }
    out *= step / static_cast<double>(updates.size());
    return out;
}

// A lazy ED resubmits a stored global increment; cosine similarity against
// the recent history catches that. Zero-norm inputs are never lazy.
inline bool vba_lazy_check(const ParamVector& update, const std::deque<ParamVector>& history,
                           double cosine_threshold) {
    for (const ParamVector& inc : history)
        if (cosine_similarity(update, inc) > cosine_threshold) return true;
    return false;
}

// Verify-before-aggregate: form a temporary model per update, score it on the
// auxiliary set, and compare against the pre-round accuracy. The verdicts do
// not depend on update order, so temporary evaluations can fan out.
inline std::vector<Verdict> vba_verify(const GlobalModel& global,
                                       const std::vector<ModelUpdate>& updates,
                                       const LabeledDataset& auxiliary, const MlpSpec& spec,
                                       const DefenseConfig& config,
                                       const std::vector<std::size_t>* aux_subset = nullptr,
                                       unsigned workers = 1) {
    if (auxiliary.size() == 0)
        throw Error(ErrorCategory::Data, "vba_verify: auxiliary dataset is empty");
    std::vector<Verdict> verdicts(updates.size());
    parallel_for(updates.size(), workers, [&](std::size_t i) {
        const ModelUpdate& u = updates[i];
        Verdict v;
        v.ed_id = u.ed_id;
        const ParamVector temp = global.params + u.delta;
        v.temp_accuracy = evaluate(temp, spec, auxiliary, aux_subset);
        v.accuracy_drop = global.last_accuracy - v.temp_accuracy;
        const bool lazy =
            vba_lazy_check(u.delta, global.increment_history, config.lazy_cosine_threshold);
        if (lazy)
            v.label = VerdictLabel::Lazy;
        else
            v.label = v.accuracy_drop <= config.vba_threshold ? VerdictLabel::Benign
                                                              : VerdictLabel::Poisoned;
        verdicts[i] = v;
    });
    return verdicts;
}

// Mean-aggregate only the updates verified benign. With none, the parameters
// stay put but the round counter advances.
inline void vba_aggregate(GlobalModel& global, const std::vector<ModelUpdate>& updates,
                          const std::vector<Verdict>& verdicts) {
    if (verdicts.size() != updates.size())
        throw Error(ErrorCategory::Structure, "vba_aggregate: verdicts do not cover updates");
    std::vector<ModelUpdate> benign;
    for (std::size_t i = 0; i < updates.size(); ++i)
        if (verdicts[i].label == VerdictLabel::Benign) benign.push_back(updates[i]);
    aggregate_mean(global, benign);
}

inline const char* to_string(DefenseStrategy s) {
    switch (s) {
        case DefenseStrategy::FedAvg: return "fedavg";
        case DefenseStrategy::Comed: return "comed";
        case DefenseStrategy::Geomed: return "geomed";
        case DefenseStrategy::Cotmed: return "cotmed";
        case DefenseStrategy::Krum: return "krum";
        case DefenseStrategy::NormBound: return "normbound";
        case DefenseStrategy::Rsa: return "rsa";
        case DefenseStrategy::Vba: return "vba";
    }
    return "?";
}

}  // namespace fedsim
