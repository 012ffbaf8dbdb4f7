#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "fedsim/defense.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/parallel.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/threat.hpp"

namespace fedsim {

// Everything a round needs that does not change between rounds.
struct FlSetup {
    MlpSpec model;
    TrainHyper hyper;
    DefenseConfig defense;
    AttackConfig attack;
    std::uint64_t master_seed = 0;
    unsigned workers = 1;
    std::size_t aux_subsample = 0;  // 0 = score the full auxiliary set
};

struct FlState {
    GlobalModel global;
    std::vector<EDProfile> eds;
    const LabeledDataset* train = nullptr;
    const LabeledDataset* aux = nullptr;
    long global_round = 0;  // monotone across tasks; seeds key off it
};

struct RoundOutcome {
    std::vector<int> selected;      // ascending ED ids
    std::vector<bool> attacked;     // ground truth, aligned with selected
    std::vector<Verdict> verdicts;  // aligned with selected; empty unless VBA
    double fees_paid = 0.0;
    int benign_count = 0;
    double utility = 0.0;
    double accuracy = 0.0;  // auxiliary accuracy after aggregation
};

namespace detail {

inline std::vector<std::size_t> sample_aux_subset(const FlSetup& setup, const FlState& state) {
    std::vector<std::size_t> subset;
    if (setup.aux_subsample == 0 || setup.aux_subsample >= state.aux->size()) return subset;
    std::vector<std::size_t> order(state.aux->size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = derive_rng(setup.master_seed, Stream::AuxSubsample,
                         static_cast<std::uint64_t>(state.global_round));
    // Partial Fisher-Yates: only the first aux_subsample slots are needed.
    for (std::size_t i = 0; i < setup.aux_subsample; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(order.size() - i));
        std::swap(order[i], order[j]);
    }
    order.resize(setup.aux_subsample);
    return subset = order;
}

}  // namespace detail

// One training round: fees, local training with threat interception, then
// verification/aggregation per the configured defense. Deterministic given
// (state, selection, master seed), whatever the worker count.
inline RoundOutcome run_round(FlState& state, const FlSetup& setup,
                              const std::vector<int>& selection) {
    const int m_total = static_cast<int>(state.eds.size());
    for (int id : selection)
        if (id < 0 || id >= m_total)
            throw Error(ErrorCategory::Config,
                        "run_round: unknown ED id " + std::to_string(id));

    RoundOutcome out;
    out.selected = selection;
    std::sort(out.selected.begin(), out.selected.end());

    // Hidden schedules advance for every vulnerable ED every round; being
    // unselected never changes an ED's trajectory.
    std::vector<bool> attacked_now(state.eds.size(), false);
    for (EDProfile& ed : state.eds)
        if (ed.attack_schedule) {
            const bool fired = ed.attack_schedule->step();
            attacked_now[ed.id] = fired && setup.attack.vector.kind != AttackVectorKind::None;
        }

    out.attacked.resize(out.selected.size());
    for (std::size_t i = 0; i < out.selected.size(); ++i) {
        out.attacked[i] = attacked_now[out.selected[i]];
        out.fees_paid += state.eds[out.selected[i]].price;
    }

    // Context for model-poisoning transforms; points at pre-round state.
    PoisonContext ctx;
    ctx.global_params = &state.global.params;
    ctx.last_global_increment = state.global.increment_history.empty()
                                    ? nullptr
                                    : &state.global.increment_history.back();

    const auto round_u64 = static_cast<std::uint64_t>(state.global_round);
    std::vector<ModelUpdate> updates(out.selected.size());
    parallel_for(out.selected.size(), setup.workers, [&](std::size_t i) {
        const EDProfile& ed = state.eds[out.selected[i]];
        const auto ed_u64 = static_cast<std::uint64_t>(ed.id);
        Rng train_rng = derive_rng(setup.master_seed, Stream::EdTrain, ed_u64, round_u64);
        const AttackVector& vec = setup.attack.vector;

        if (out.attacked[i] && vec.is_data_poisoning()) {
            std::vector<int> labels(ed.shard.size());
            for (std::size_t s = 0; s < ed.shard.size(); ++s)
                labels[s] = state.train->labels[ed.shard[s]];
            Rng flip_rng = derive_rng(setup.master_seed, Stream::LabelFlip, ed_u64, round_u64);
            const std::vector<int> flipped =
                poison_labels(labels, state.train->class_count, vec, flip_rng);
            ModelUpdate u = local_train(state.global.params, ed, *state.train, setup.model,
                                        setup.hyper, train_rng, state.global.round, &flipped);
            u.delta *= setup.attack.scale_factor;
            updates[i] = std::move(u);
        } else if (out.attacked[i]) {
            Rng noise_rng = derive_rng(setup.master_seed, Stream::AttackNoise, ed_u64, round_u64);
            ModelUpdate u;
            u.ed_id = ed.id;
            u.round = state.global.round;
            u.fee = ed.price;
            if (vec.kind == AttackVectorKind::GaussianNoise) {
                // Crafted directly; no local training involved.
                ParamVector zero(state.global.params.shape);
                u.delta = poison_update(zero, ctx, vec, setup.attack.scale_factor, noise_rng);
            } else {
                ModelUpdate benign = local_train(state.global.params, ed, *state.train,
                                                 setup.model, setup.hyper, train_rng,
                                                 state.global.round);
                u.delta = poison_update(benign.delta, ctx, vec, setup.attack.scale_factor,
                                        noise_rng);
            }
            updates[i] = std::move(u);
        } else {
            updates[i] = local_train(state.global.params, ed, *state.train, setup.model,
                                     setup.hyper, train_rng, state.global.round);
        }
    });

    const std::vector<std::size_t> subset_storage = detail::sample_aux_subset(setup, state);
    const std::vector<std::size_t>* subset = subset_storage.empty() ? nullptr : &subset_storage;
    if (subset) {
        // Fresh subsample each round, so the comparison baseline must be
        // rescored on it.
        state.global.last_accuracy = evaluate(state.global.params, setup.model, *state.aux, subset);
    }

    switch (setup.defense.strategy) {
        case DefenseStrategy::Vba: {
            out.verdicts = vba_verify(state.global, updates, *state.aux, setup.model,
                                      setup.defense, subset, setup.workers);
            vba_aggregate(state.global, updates, out.verdicts);
            for (const Verdict& v : out.verdicts)
                if (v.label == VerdictLabel::Benign) out.benign_count += 1;
            break;
        }
        case DefenseStrategy::FedAvg:
            aggregate_mean(state.global, updates);
            break;
        case DefenseStrategy::Comed:
            apply_increment(state.global, agg_comed(updates));
            break;
        case DefenseStrategy::Geomed:
            apply_increment(state.global,
                            agg_geomed(updates, setup.defense.geomed_tol,
                                       setup.defense.geomed_max_iter).delta);
            break;
        case DefenseStrategy::Cotmed: {
            const int m = static_cast<int>(updates.size());
            const int trim = setup.defense.trim_count >= 0 ? setup.defense.trim_count
                                                           : (m + 3) / 4;
            apply_increment(state.global, agg_cotmed(updates, trim));
            break;
        }
        case DefenseStrategy::Krum:
            apply_increment(state.global, agg_krum(updates, setup.defense.krum_f));
            break;
        case DefenseStrategy::NormBound:
            apply_increment(state.global,
                            agg_normbound(updates,
                                          norm_cap_from(updates, setup.defense.norm_cap_rule,
                                                        setup.defense.norm_cap)));
            break;
        case DefenseStrategy::Rsa:
            apply_increment(state.global, agg_rsa(updates, setup.defense.rsa_step));
            break;
    }

    if (setup.defense.strategy != DefenseStrategy::Vba) {
        // Without per-update verdicts the utility uses the simulator's ground
        // truth of which uploads were actually poisoned.
        for (bool a : out.attacked)
            if (!a) out.benign_count += 1;
    }

    out.accuracy = evaluate(state.global.params, setup.model, *state.aux, subset);
    state.global.last_accuracy = out.accuracy;
    out.utility = out.benign_count - out.fees_paid;
    state.global_round += 1;
    return out;
}

}  // namespace fedsim
