#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/adam.hpp"
#include "fedsim/checkpoint.hpp"
#include "fedsim/defense.hpp"
#include "fedsim/drqn.hpp"
#include "fedsim/error.hpp"
#include "fedsim/matrix.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

inline std::uint64_t binomial(unsigned n, unsigned k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (unsigned i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// Lexicographic combinatorial-number-system bijection between K-subsets of
// {0..M-1} and [0, C(M,K)). Index 0 is {0..K-1}; the last index is the top-K
// block {M-K..M-1}.
inline std::uint64_t action_encode(std::vector<int> subset, unsigned m, unsigned k) {
    if (subset.size() != k)
        throw Error(ErrorCategory::Config,
                    "action_encode: subset has " + std::to_string(subset.size()) +
                        " ids, expected " + std::to_string(k));
    std::sort(subset.begin(), subset.end());
    for (std::size_t i = 0; i < subset.size(); ++i) {
        if (subset[i] < 0 || subset[i] >= static_cast<int>(m))
            throw Error(ErrorCategory::Config,
                        "action_encode: id " + std::to_string(subset[i]) + " outside [0, " +
                            std::to_string(m) + ")");
        if (i > 0 && subset[i] == subset[i - 1])
            throw Error(ErrorCategory::Config, "action_encode: duplicate id " +
                                                   std::to_string(subset[i]));
    }
    std::uint64_t rank = 0;
    int next = 0;
    for (unsigned i = 0; i < k; ++i) {
        for (int v = next; v < subset[i]; ++v)
            rank += binomial(m - 1 - static_cast<unsigned>(v), k - 1 - i);
        next = subset[i] + 1;
    }
    return rank;
}

inline std::vector<int> action_decode(std::uint64_t index, unsigned m, unsigned k) {
    if (index >= binomial(m, k))
        throw Error(ErrorCategory::Config,
                    "action_decode: index " + std::to_string(index) + " outside [0, C(" +
                        std::to_string(m) + "," + std::to_string(k) + "))");
    std::vector<int> subset;
    subset.reserve(k);
    int v = 0;
    for (unsigned i = 0; i < k; ++i) {
        while (true) {
            const std::uint64_t block = binomial(m - 1 - static_cast<unsigned>(v), k - 1 - i);
            if (index < block) break;
            index -= block;
            ++v;
        }
        subset.push_back(v);
        ++v;
    }
    return subset;
}

// Reward of a round: verified-benign updates minus the fees paid.
inline double compute_reward(const std::vector<Verdict>& verdicts, double fees_paid) {
    int benign = 0;
    for (const Verdict& v : verdicts)
        if (v.label == VerdictLabel::Benign) benign += 1;
    return static_cast<double>(benign) - fees_paid;
}

// Uniform over all C(M,K) subsets.
inline std::uint64_t select_random(Rng& rng, unsigned m, unsigned k) {
    return rng.uniform_int(binomial(m, k));
}

// Per-ED status after a round: +1 verified benign, -1 poisoned or lazy,
// 0 not selected.
inline std::vector<double> observation_from_verdicts(unsigned m, const std::vector<int>& selected,
                                                     const std::vector<Verdict>& verdicts) {
    std::vector<double> obs(m, 0.0);
    for (std::size_t i = 0; i < selected.size(); ++i)
        obs[static_cast<std::size_t>(selected[i])] =
            verdicts[i].label == VerdictLabel::Benign ? 1.0 : -1.0;
    return obs;
}

inline std::vector<double> action_membership(unsigned m, const std::vector<int>& selected) {
    std::vector<double> mem(m, 0.0);
    for (int id : selected) mem[static_cast<std::size_t>(id)] = 1.0;
    return mem;
}

struct ObsActionPair {
    std::vector<double> observation;
    std::vector<double> action;
};

// Fixed-length window of (observation, action) pairs, oldest first, zero
// padded before enough rounds exist. The current timestep carries the fresh
// observation with an all-zero action slot, since no action is taken yet.
inline Matrix build_pseudo_state(const std::deque<ObsActionPair>& history,
                                 const std::vector<double>& current_obs, unsigned m,
                                 std::size_t sequence_len) {
    Matrix ps(sequence_len, 2 * m);
    const std::size_t want_history = sequence_len - 1;
    const std::size_t take = std::min(want_history, history.size());
    std::size_t row = want_history - take;  // leading rows stay zero
    for (std::size_t i = history.size() - take; i < history.size(); ++i, ++row) {
        const ObsActionPair& p = history[i];
        std::copy(p.observation.begin(), p.observation.end(), ps.row(row));
        std::copy(p.action.begin(), p.action.end(), ps.row(row) + m);
    }
    std::copy(current_obs.begin(), current_obs.end(), ps.row(sequence_len - 1));
    return ps;
}

struct ReplayItem {
    Matrix pseudo_state;
    std::uint64_t action = 0;
    double reward = 0.0;
    Matrix next_pseudo_state;
    bool terminal = false;
};

// Bounded ring buffer; index 0 is always the oldest stored item.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

    void push(ReplayItem item) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(item));
        } else {
            items_[head_] = std::move(item);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }

    const ReplayItem& operator[](std::size_t age_index) const {
        return items_[(head_ + age_index) % items_.size()];
    }

    // Uniform sample of distinct positions (age order indices).
    std::vector<std::size_t> sample_indices(Rng& rng, std::size_t count) const {
        if (count > items_.size())
            throw Error(ErrorCategory::Config, "replay sample larger than buffer contents");
        std::vector<std::size_t> pool(items_.size());
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(count);
        return pool;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<ReplayItem> items_;
};

struct AgentConfig {
    double gamma = 0.9;
    double learning_rate = 1e-3;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    long epsilon_anneal_rounds = 3000;
    std::size_t replay_capacity = 10000;
    std::size_t batch_size = 32;
    long target_sync_period = 100;
};

// DRQN agent: online and target networks, replay memory, epsilon annealing
// position. Single-writer; the round loop drives it sequentially.
struct DrqnAgent {
    DrqnSpec spec;
    AgentConfig config;
    ParamVector online;
    ParamVector target;
    AdamState optimizer;
    ReplayBuffer replay;
    long learn_calls = 0;
    long rounds_seen = 0;
    Rng sample_rng;
    Rng explore_rng;

    DrqnAgent(const DrqnSpec& s, const AgentConfig& c, Rng init_rng, Rng sample, Rng explore)
        : spec(s),
          config(c),
          online(init_drqn_params(s, init_rng)),
          target(online),
          optimizer(AdamState::make(online.shape, c.learning_rate)),
          replay(c.replay_capacity),
          sample_rng(sample),
          explore_rng(explore) {}

    double current_epsilon() const {
        const double t = std::min(1.0, static_cast<double>(rounds_seen) /
                                           static_cast<double>(config.epsilon_anneal_rounds));
        return config.epsilon_start + t * (config.epsilon_end - config.epsilon_start);
    }
};

// Epsilon-greedy over the Q values; greedy ties go to the lowest index.
inline std::uint64_t select_drqn(const DrqnAgent& agent, const Matrix& pseudo_state,
                                 double epsilon, Rng& rng) {
    if (epsilon > 0.0 && rng.uniform01() < epsilon)
        return rng.uniform_int(agent.spec.action_count);
    const std::vector<double> q = drqn_forward(agent.online, agent.spec, pseudo_state);
    std::size_t best = 0;
    for (std::size_t a = 1; a < q.size(); ++a)
        if (q[a] > q[best]) best = a;
    return best;
}

inline void agent_observe(DrqnAgent& agent, ReplayItem item) { agent.replay.push(std::move(item)); }

// One learning step: sample a batch, build bootstrapped targets from the
// target network, take one Adam step on the mean squared TD error of the
// taken actions. Returns the batch loss, or nothing if the buffer is still
// too small.
inline std::optional<double> agent_learn(DrqnAgent& agent) {
    if (agent.replay.size() < agent.config.batch_size) return std::nullopt;
    const std::vector<std::size_t> batch =
        agent.replay.sample_indices(agent.sample_rng, agent.config.batch_size);

    ParamVector grad_sum(agent.online.shape);
    double loss_sum = 0.0;
    for (std::size_t idx : batch) {
        const ReplayItem& item = agent.replay[idx];
        double y = item.reward;
        if (!item.terminal) {
            const std::vector<double> qn =
                drqn_forward(agent.target, agent.spec, item.next_pseudo_state);
            y += agent.config.gamma * *std::max_element(qn.begin(), qn.end());
        }
        std::vector<double> target_q(agent.spec.action_count, 0.0);
        target_q[item.action] = y;
        const LossAndGrad lg =
            drqn_backward(agent.online, agent.spec, item.pseudo_state, target_q, item.action);
        grad_sum += lg.grad;
        loss_sum += lg.loss;
    }
    const double inv = 1.0 / static_cast<double>(agent.config.batch_size);
    grad_sum *= inv;
    adam_step(agent.online, grad_sum, agent.optimizer);
    agent.learn_calls += 1;
    if (agent.learn_calls % agent.config.target_sync_period == 0) agent.target = agent.online;
    return loss_sum * inv;
}

// Agent checkpoint: two parameter files in the flat checkpoint format plus a
// text sidecar with the hyperparameters and the anneal position.
inline void save_agent(const DrqnAgent& agent, const std::string& stem) {
    save_params(agent.online, stem + ".online.ckpt");
    save_params(agent.target, stem + ".target.ckpt");
    std::ofstream meta(stem + ".meta");
    if (!meta) throw Error(ErrorCategory::Io, "cannot write '" + stem + ".meta'");
    meta << "obs_action_dim = " << agent.spec.obs_action_dim << '\n'
         << "lstm_units = " << agent.spec.lstm_units << '\n'
         << "fc_units = " << agent.spec.fc_units << '\n'
         << "action_count = " << agent.spec.action_count << '\n'
         << "sequence_len = " << agent.spec.sequence_len << '\n'
         << "gamma = " << agent.config.gamma << '\n'
         << "learning_rate = " << agent.config.learning_rate << '\n'
         << "epsilon_start = " << agent.config.epsilon_start << '\n'
         << "epsilon_end = " << agent.config.epsilon_end << '\n'
         << "epsilon_anneal_rounds = " << agent.config.epsilon_anneal_rounds << '\n'
         << "replay_capacity = " << agent.config.replay_capacity << '\n'
         << "batch_size = " << agent.config.batch_size << '\n'
         << "target_sync_period = " << agent.config.target_sync_period << '\n'
         << "learn_calls = " << agent.learn_calls << '\n'
         << "rounds_seen = " << agent.rounds_seen << '\n';
}

// Rebuilds an agent from a checkpoint. Replay contents and the exploration
// stream positions are not part of the snapshot; callers supply fresh ones.
inline DrqnAgent load_agent(const std::string& stem, Rng sample_rng, Rng explore_rng) {
    std::ifstream meta(stem + ".meta");
    if (!meta) throw Error(ErrorCategory::Io, "cannot open '" + stem + ".meta'");
    DrqnSpec spec;
    AgentConfig config;
    long learn_calls = 0, rounds_seen = 0;
    std::string line;
    while (std::getline(meta, line)) {
        std::istringstream is(line);
        std::string key, eq;
        double value;
        if (!(is >> key >> eq >> value) || eq != "=")
            throw Error(ErrorCategory::Data, "bad agent meta line: " + line);
        if (key == "obs_action_dim") spec.obs_action_dim = static_cast<std::size_t>(value);
        else if (key == "lstm_units") spec.lstm_units = static_cast<std::size_t>(value);
        else if (key == "fc_units") spec.fc_units = static_cast<std::size_t>(value);
        else if (key == "action_count") spec.action_count = static_cast<std::size_t>(value);
        else if (key == "sequence_len") spec.sequence_len = static_cast<std::size_t>(value);
        else if (key == "gamma") config.gamma = value;
        else if (key == "learning_rate") config.learning_rate = value;
        else if (key == "epsilon_start") config.epsilon_start = value;
        else if (key == "epsilon_end") config.epsilon_end = value;
        else if (key == "epsilon_anneal_rounds") config.epsilon_anneal_rounds = static_cast<long>(value);
        else if (key == "replay_capacity") config.replay_capacity = static_cast<std::size_t>(value);
        else if (key == "batch_size") config.batch_size = static_cast<std::size_t>(value);
        else if (key == "target_sync_period") config.target_sync_period = static_cast<long>(value);
        else if (key == "learn_calls") learn_calls = static_cast<long>(value);
        else if (key == "rounds_seen") rounds_seen = static_cast<long>(value);
        else throw Error(ErrorCategory::Data, "unknown agent meta key: " + key);
    }
    spec.validate();
    Rng dummy(0);
    DrqnAgent agent(spec, config, dummy, sample_rng, explore_rng);
    agent.online = load_params(stem + ".online.ckpt");
    agent.target = load_params(stem + ".target.ckpt");
    check_params_match(agent.online, drqn_shape_map(spec), "load_agent online");
    check_params_match(agent.target, drqn_shape_map(spec), "load_agent target");
    agent.learn_calls = learn_calls;
    agent.rounds_seen = rounds_seen;
    return agent;
}

}  // namespace fedsim
