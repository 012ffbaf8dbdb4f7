#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedsim/error.hpp"
#include "fedsim/param_vector.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Hidden per-ED attack pattern. The state evolves exactly once per round,
// whether or not the ED was selected; selection can never perturb it.
class Schedule {
public:
    enum class Kind { Bernoulli, Periodic, Markov };

    static Schedule bernoulli(double p, std::uint64_t seed) {
        if (p < 0.0 || p > 1.0)
            throw Error(ErrorCategory::Config, "Bernoulli schedule: p must be in [0, 1]");
        Schedule s;
        s.kind_ = Kind::Bernoulli;
        s.p_attack_ = p;
        s.rng_ = Rng(seed);
        return s;
    }

    // Attacked when ((t + phase) mod period) < duty.
    static Schedule periodic(long period, long phase, long duty) {
        if (period < 1) throw Error(ErrorCategory::Config, "Periodic schedule: period must be >= 1");
        if (duty < 0 || duty > period)
            throw Error(ErrorCategory::Config, "Periodic schedule: duty must be in [0, period]");
        Schedule s;
        s.kind_ = Kind::Periodic;
        s.period_ = period;
        s.phase_ = phase;
        s.duty_ = duty;
        return s;
    }

    // Two-state chain starting in the safe state; p_stay_* are the
    // self-transition probabilities.
    static Schedule markov(double p_stay_safe, double p_stay_attacked, std::uint64_t seed) {
        if (p_stay_safe < 0.0 || p_stay_safe > 1.0 || p_stay_attacked < 0.0 ||
            p_stay_attacked > 1.0)
            throw Error(ErrorCategory::Config, "Markov schedule: probabilities must be in [0, 1]");
        Schedule s;
        s.kind_ = Kind::Markov;
        s.p_stay_safe_ = p_stay_safe;
        s.p_stay_attacked_ = p_stay_attacked;
        s.rng_ = Rng(seed);
        return s;
    }

    // Advances one round and reports whether this round's upload is poisoned.
    bool step() {
        bool attacked = false;
        switch (kind_) {
            case Kind::Bernoulli:
                attacked = rng_.uniform01() < p_attack_;
                break;
            case Kind::Periodic:
                attacked = ((t_ + phase_) % period_) < duty_;
                break;
            case Kind::Markov: {
                const double u = rng_.uniform01();
                if (attacked_state_)
                    attacked_state_ = u < p_stay_attacked_;
                else
                    attacked_state_ = u >= p_stay_safe_;
                attacked = attacked_state_;
                break;
            }
        }
        t_ += 1;
        return attacked;
    }

    Kind kind() const { return kind_; }

private:
    Kind kind_ = Kind::Bernoulli;
    Rng rng_;
    long t_ = 0;
    double p_attack_ = 0.0;
    long period_ = 1, phase_ = 0, duty_ = 0;
    double p_stay_safe_ = 1.0, p_stay_attacked_ = 0.0;
    bool attacked_state_ = false;
};

enum class AttackVectorKind {
    None,
    LabelFlipRandom,
    LabelFlipTargeted,
    GaussianNoise,
    SignFlip,
    NegativeIncrement,
    ModelReplacement,
};

struct AttackVector {
    AttackVectorKind kind = AttackVectorKind::None;
    std::map<int, int> flip_map;      // LabelFlipTargeted: source class -> target class
    double sigma = 1.0;               // GaussianNoise
    ParamVector replacement_target;   // ModelReplacement
    double boost = 1.0;               // ModelReplacement

    bool is_data_poisoning() const {
        return kind == AttackVectorKind::LabelFlipRandom ||
               kind == AttackVectorKind::LabelFlipTargeted;
    }
};

struct AttackConfig {
    AttackVector vector;
    double scale_factor = 1.0;  // applied to poisoned deltas only
};

// Returns flipped labels for a shard; the original storage is untouched.
inline std::vector<int> poison_labels(const std::vector<int>& labels, int class_count,
                                      const AttackVector& vector, Rng& rng) {
    std::vector<int> out = labels;
    switch (vector.kind) {
        case AttackVectorKind::LabelFlipRandom:
            for (int& y : out) {
                // Uniform over the class_count - 1 labels different from y.
                const int r = static_cast<int>(rng.uniform_int(
                    static_cast<std::uint64_t>(class_count - 1)));
                y = r < y ? r : r + 1;
            }
            return out;
        case AttackVectorKind::LabelFlipTargeted:
            for (const auto& [src, dst] : vector.flip_map)
                if (src == dst)
                    throw Error(ErrorCategory::Config,
                                "targeted label flip maps class " + std::to_string(src) +
                                    " to itself");
            for (int& y : out) {
                const auto it = vector.flip_map.find(y);
                if (it != vector.flip_map.end()) y = it->second;
            }
            return out;
        default:
            throw Error(ErrorCategory::Config, "poison_labels: not a label-flip attack vector");
    }
}

// Inputs a model-poisoning transform needs beyond the benign delta itself.
struct PoisonContext {
    const ParamVector* last_global_increment = nullptr;  // most recent, may be null
    const ParamVector* global_params = nullptr;          // required for ModelReplacement
};

// Transforms a would-be benign delta into the poisoned upload. The scale
// factor multiplies everything except ModelReplacement, whose boost is its
// own scaling.
inline ParamVector poison_update(const ParamVector& benign_delta, const PoisonContext& ctx,
                                 const AttackVector& vector, double scale_factor, Rng& rng) {
    switch (vector.kind) {
        case AttackVectorKind::SignFlip:
            return -benign_delta * scale_factor;
        case AttackVectorKind::GaussianNoise: {
            ParamVector out(benign_delta.shape);
            for (double& v : out.values) v = vector.sigma * rng.normal();
            return out * scale_factor;
        }
        case AttackVectorKind::NegativeIncrement:
            // No increment exists yet in round 0; degrade to a sign flip so
            // attack mixes start cleanly.
            if (!ctx.last_global_increment)
                return -benign_delta * scale_factor;
            return -(*ctx.last_global_increment) * scale_factor;
        case AttackVectorKind::ModelReplacement: {
            if (!ctx.global_params)
                throw Error(ErrorCategory::Config,
                            "model replacement attack needs the current global parameters");
            ParamVector target = vector.replacement_target;
            if (target.size() == 0) target = ParamVector(ctx.global_params->shape);
            require_same_shape(target, *ctx.global_params, "model replacement target");
            return (target - *ctx.global_params) * vector.boost;
        }
        default:
            throw Error(ErrorCategory::Config, "poison_update: not a model-poisoning vector");
    }
}

}  // namespace fedsim
