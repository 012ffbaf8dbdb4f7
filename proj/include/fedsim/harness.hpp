#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/idx.hpp"
#include "fedsim/round.hpp"
#include "fedsim/selection.hpp"
#include "fedsim/version.hpp"

namespace fedsim {

struct RunOptions {
    unsigned workers = 1;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_dir_override;
    bool save_checkpoints = true;
};

// Per-round metrics row. Wall time is recorded separately (timing.csv) so the
// deterministic files stay byte-identical across reruns and worker counts.
struct RoundRecord {
    long task_id = 0;
    long round = 0;
    long global_round = 0;
    std::vector<int> selected;
    std::vector<bool> attacked;
    std::string verdicts;  // one letter per selected ED, empty unless VBA
    double accuracy = 0.0;
    double fees_paid = 0.0;
    int benign_count = 0;
    double reward = 0.0;  // equals utility = benign_count - fees_paid
    double epsilon = -1.0;          // < 0 when the policy has no epsilon
    double agent_loss = -1.0;       // < 0 when no learning step happened
    double wall_ms = 0.0;
};

struct TaskSummary {
    long task_id = 0;
    double final_accuracy = 0.0;
    double mean_utility = 0.0;
};

struct RunResult {
    std::string out_dir;
    std::vector<TaskSummary> tasks;
    std::vector<RoundRecord> rounds;
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += '|';
        out += std::to_string(v[i]);
    }
    return out;
}

inline std::string join_flags(const std::vector<bool>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += '|';
        out += v[i] ? '1' : '0';
    }
    return out;
}

inline constexpr const char* kRoundsHeader =
    "task,round,global_round,selected,attacked,verdicts,accuracy,fees_paid,"
    "benign_count,reward,epsilon,agent_loss";
inline constexpr const char* kSummaryHeader = "task,final_accuracy,mean_utility";
inline constexpr const char* kTimingHeader = "task,round,wall_ms";

inline void write_round_row(std::ostream& out, const RoundRecord& r) {
    out << r.task_id << ',' << r.round << ',' << r.global_round << ',' << join_ints(r.selected)
        << ',' << join_flags(r.attacked) << ',' << r.verdicts << ',' << fmt_double(r.accuracy)
        << ',' << fmt_double(r.fees_paid) << ',' << r.benign_count << ','
        << fmt_double(r.reward) << ',';
    if (r.epsilon >= 0.0) out << fmt_double(r.epsilon);
    out << ',';
    if (r.agent_loss >= 0.0) out << fmt_double(r.agent_loss);
    out << '\n';
}

}  // namespace detail

// Trailing moving average: entry i averages the window ending at i (shorter
// at the start).
inline std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
    if (window == 0) throw Error(ErrorCategory::Config, "moving_average: window must be >= 1");
    std::vector<double> out(values.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        acc += values[i];
        if (i >= window) acc -= values[i - window];
        out[i] = acc / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

// Runs the full experiment: task_count tasks of rounds_per_task rounds each.
// Each task trains a fresh model; the selection agent and the hidden attack
// schedules persist across tasks. Deterministic in (config, seed) for any
// worker count.
inline RunResult run_experiment(ExperimentConfig cfg, const RunOptions& opts = {}) {
    if (opts.seed_override) cfg.master_seed = *opts.seed_override;
    if (opts.out_dir_override) cfg.output_dir = *opts.out_dir_override;

    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    const std::string dir = cfg.output_dir;

    {
        std::ofstream manifest(dir + "/manifest.txt");
        if (!manifest) throw Error(ErrorCategory::Io, "cannot write manifest in '" + dir + "'");
        manifest << "fedsim " << kVersion << '\n'
                 << "master_seed " << cfg.master_seed << '\n'
                 << '\n'
                 << serialize_config(cfg);
    }

    // Dataset provisioning.
    LabeledDataset train, aux;
    if (cfg.dataset.kind == DatasetKind::Synthetic) {
        const LabeledDataset all = generate_synthetic(cfg.dataset.classes, cfg.dataset.dim,
                                                      cfg.dataset.per_class, cfg.master_seed);
        TrainTestSplit split = split_train_test(all, cfg.dataset.test_fraction, cfg.master_seed);
        train = std::move(split.train);
        aux = std::move(split.test);
    } else {
        train = load_idx(cfg.dataset.train_images, cfg.dataset.train_labels);
        aux = load_idx(cfg.dataset.test_images, cfg.dataset.test_labels);
        if (train.class_count != aux.class_count)
            train.class_count = aux.class_count =
                std::max(train.class_count, aux.class_count);
        if (train.dim() != aux.dim())
            throw Error(ErrorCategory::Data, "train/test feature dimensions differ");
    }

    const unsigned M = cfg.topology.ed_count;
    const unsigned K = cfg.topology.select_per_round;
    const Partition partition = partition_equal(train, M, cfg.master_seed);

    MlpSpec model;
    model.input_dim = train.dim();
    model.hidden_layers = cfg.hidden_layers;
    model.output_dim = static_cast<std::size_t>(train.class_count);
    model.validate();

    FlSetup setup;
    setup.model = model;
    setup.hyper.batch_size = cfg.federation.batch_size;
    setup.hyper.epochs = cfg.federation.epochs;
    setup.hyper.learning_rate = cfg.federation.learning_rate;
    setup.defense = cfg.defense;
    setup.attack.scale_factor = cfg.attack.scale;
    setup.attack.vector.kind = cfg.attack.vector;
    setup.attack.vector.sigma = cfg.attack.sigma;
    setup.attack.vector.flip_map = cfg.attack.flip_map;
    setup.attack.vector.boost = cfg.attack.boost;
    if (cfg.attack.vector == AttackVectorKind::ModelReplacement &&
        !cfg.attack.replacement_target.empty())
        setup.attack.vector.replacement_target = load_params(cfg.attack.replacement_target);
    setup.master_seed = cfg.master_seed;
    setup.workers = opts.workers == 0 ? 1 : opts.workers;
    setup.aux_subsample = cfg.dataset.aux_subsample;

    // ED roster: low ids are secure benign, the tail is vulnerable.
    FlState state;
    state.train = &train;
    state.aux = &aux;
    state.eds.resize(M);
    const unsigned first_vulnerable = M - cfg.topology.vulnerable_count;
    for (unsigned i = 0; i < M; ++i) {
        EDProfile& ed = state.eds[i];
        ed.id = static_cast<int>(i);
        ed.shard = partition.shards[i];
        if (i >= first_vulnerable) {
            ed.kind = EdKind::Vulnerable;
            ed.price = cfg.topology.vulnerable_price;
            Rng seed_rng = derive_rng(cfg.master_seed, Stream::EdSchedule, i);
            const std::uint64_t sched_seed = seed_rng.next_u64();
            switch (cfg.attack.schedule) {
                case ScheduleKind::Bernoulli:
                    ed.attack_schedule = Schedule::bernoulli(cfg.attack.bernoulli_p, sched_seed);
                    break;
                case ScheduleKind::Periodic:
                    ed.attack_schedule =
                        Schedule::periodic(cfg.attack.period, cfg.attack.phase, cfg.attack.duty);
                    break;
                case ScheduleKind::Markov:
                    ed.attack_schedule = Schedule::markov(
                        cfg.attack.markov_stay_safe, cfg.attack.markov_stay_attacked, sched_seed);
                    break;
            }
        } else {
            ed.kind = EdKind::SecureBenign;
            ed.price = cfg.topology.secure_price;
        }
    }

    // Selection machinery.
    Rng random_select_rng = derive_rng(cfg.master_seed, Stream::RandomSelect);
    std::unique_ptr<DrqnAgent> agent;
    if (cfg.selection.policy == SelectionPolicy::Drqn) {
        DrqnSpec spec;
        spec.obs_action_dim = 2 * M;
        spec.lstm_units = cfg.selection.lstm_units;
        spec.fc_units = cfg.selection.fc_units;
        spec.action_count = binomial(M, K);
        spec.sequence_len = cfg.selection.sequence_len;
        agent = std::make_unique<DrqnAgent>(
            spec, cfg.selection.agent, derive_rng(cfg.master_seed, Stream::AgentInit),
            derive_rng(cfg.master_seed, Stream::AgentSample),
            derive_rng(cfg.master_seed, Stream::Exploration));
    }

    std::ofstream rounds_csv(dir + "/rounds.csv");
    std::ofstream summary_csv(dir + "/summary.csv");
    std::ofstream timing_csv(dir + "/timing.csv");
    if (!rounds_csv || !summary_csv || !timing_csv)
        throw Error(ErrorCategory::Io, "cannot create output files in '" + dir + "'");
    rounds_csv << detail::kRoundsHeader << '\n';
    summary_csv << detail::kSummaryHeader << '\n';
    timing_csv << detail::kTimingHeader << '\n';

    RunResult result;
    result.out_dir = dir;

    auto flush_all = [&] {
        rounds_csv.flush();
        summary_csv.flush();
        timing_csv.flush();
    };

    try {
        for (long task = 0; task < cfg.federation.task_count; ++task) {
            // Fresh model per learning task.
            state.global = GlobalModel{};
            state.global.history_depth = cfg.federation.history_depth;
            Rng init_rng = derive_rng(cfg.master_seed, Stream::ModelInit,
                                      static_cast<std::uint64_t>(task));
            state.global.params = init_mlp_params(model, init_rng);
            state.global.last_accuracy = evaluate(state.global.params, model, aux);

            // Episode-local observation window.
            std::deque<ObsActionPair> history;
            std::vector<double> current_obs(M, 0.0);
            Matrix pseudo_state;
            if (agent) pseudo_state = build_pseudo_state(history, current_obs, M,
                                                         agent->spec.sequence_len);

            double utility_sum = 0.0;
            double final_accuracy = 0.0;
            for (long round = 0; round < cfg.federation.rounds_per_task; ++round) {
                const auto t0 = std::chrono::steady_clock::now();
                RoundRecord rec;
                rec.task_id = task;
                rec.round = round;
                rec.global_round = state.global_round;

                std::uint64_t action;
                if (agent) {
                    rec.epsilon = agent->current_epsilon();
                    action = select_drqn(*agent, pseudo_state, rec.epsilon, agent->explore_rng);
                } else {
                    action = select_random(random_select_rng, M, K);
                }
                const std::vector<int> subset = action_decode(action, M, K);

                const RoundOutcome outcome = run_round(state, setup, subset);
                rec.selected = outcome.selected;
                rec.attacked = outcome.attacked;
                for (const Verdict& v : outcome.verdicts)
                    rec.verdicts += verdict_letter(v.label);
                rec.accuracy = outcome.accuracy;
                rec.fees_paid = outcome.fees_paid;
                rec.benign_count = outcome.benign_count;
                rec.reward = outcome.utility;

                if (agent) {
                    const std::vector<double> new_obs =
                        observation_from_verdicts(M, outcome.selected, outcome.verdicts);
                    history.push_back({current_obs, action_membership(M, outcome.selected)});
                    while (history.size() >= agent->spec.sequence_len) history.pop_front();
                    current_obs = new_obs;
                    Matrix next_ps =
                        build_pseudo_state(history, current_obs, M, agent->spec.sequence_len);
                    ReplayItem item;
                    item.pseudo_state = std::move(pseudo_state);
                    item.action = action;
                    item.reward = rec.reward;
                    item.next_pseudo_state = next_ps;
                    item.terminal = (round + 1 == cfg.federation.rounds_per_task);
                    agent_observe(*agent, std::move(item));
                    pseudo_state = std::move(next_ps);
                    agent->rounds_seen += 1;
                    if (const auto loss = agent_learn(*agent)) rec.agent_loss = *loss;
                }

                const auto t1 = std::chrono::steady_clock::now();
                rec.wall_ms =
                    std::chrono::duration<double, std::milli>(t1 - t0).count();
                detail::write_round_row(rounds_csv, rec);
                timing_csv << task << ',' << round << ','
                           << detail::fmt_double(rec.wall_ms) << '\n';
                utility_sum += rec.reward;
                final_accuracy = rec.accuracy;
                result.rounds.push_back(std::move(rec));
            }

            TaskSummary ts;
            ts.task_id = task;
            ts.final_accuracy = final_accuracy;
            ts.mean_utility = utility_sum / static_cast<double>(cfg.federation.rounds_per_task);
            summary_csv << task << ',' << detail::fmt_double(ts.final_accuracy) << ','
                        << detail::fmt_double(ts.mean_utility) << '\n';
            result.tasks.push_back(ts);
            flush_all();
        }
    } catch (...) {
        // Keep whatever was recorded before the failure.
        flush_all();
        throw;
    }

    if (opts.save_checkpoints) {
        save_params(state.global.params, dir + "/model_final.ckpt");
        if (agent) save_agent(*agent, dir + "/agent");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Run-directory analysis.

struct SummaryKey {
    std::string defense;
    std::string policy;
    unsigned vulnerable_count = 0;

    auto operator<=>(const SummaryKey&) const = default;
};

struct SummaryRow {
    SummaryKey key;
    int run_count = 0;
    long task_count = 0;
    double mean_final_accuracy = 0.0;
    double mean_utility = 0.0;
    // Same statistics over each run's last quarter of tasks, so schemes whose
    // early tasks are still warming up can be compared either way.
    double last_quartile_final_accuracy = 0.0;
    double last_quartile_utility = 0.0;
};

namespace detail {

struct LoadedRun {
    ExperimentConfig config;
    std::vector<TaskSummary> tasks;
    std::vector<double> rewards;        // per global round
    std::vector<long> global_rounds;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

inline LoadedRun load_run_dir(const std::string& dir) {
    LoadedRun run;
    {
        std::ifstream manifest(dir + "/manifest.txt");
        if (!manifest)
            throw Error(ErrorCategory::Io, "'" + dir + "' has no manifest.txt; not a run directory");
        std::string line, config_text;
        bool in_config = false;
        while (std::getline(manifest, line)) {
            if (in_config) config_text += line + '\n';
            else if (line.empty()) in_config = true;
        }
        run.config = parse_config(config_text, dir);
    }
    {
        std::ifstream summary(dir + "/summary.csv");
        if (!summary) throw Error(ErrorCategory::Io, "missing summary.csv in '" + dir + "'");
        std::string line;
        if (!std::getline(summary, line) || line != kSummaryHeader)
            throw Error(ErrorCategory::Data,
                        "schema mismatch in '" + dir + "/summary.csv': unexpected header");
        while (std::getline(summary, line)) {
            if (line.empty()) continue;
            const auto f = split_csv_line(line);
            if (f.size() != 3)
                throw Error(ErrorCategory::Data, "bad row in '" + dir + "/summary.csv'");
            run.tasks.push_back({std::stol(f[0]), std::stod(f[1]), std::stod(f[2])});
        }
    }
    {
        std::ifstream rounds(dir + "/rounds.csv");
        if (!rounds) throw Error(ErrorCategory::Io, "missing rounds.csv in '" + dir + "'");
        std::string line;
        if (!std::getline(rounds, line) || line != kRoundsHeader)
            throw Error(ErrorCategory::Data,
                        "schema mismatch in '" + dir + "/rounds.csv': unexpected header");
        while (std::getline(rounds, line)) {
            if (line.empty()) continue;
            const auto f = split_csv_line(line);
            if (f.size() != 12)
                throw Error(ErrorCategory::Data, "bad row in '" + dir + "/rounds.csv'");
            run.global_rounds.push_back(std::stol(f[2]));
            run.rewards.push_back(std::stod(f[9]));
        }
    }
    return run;
}

}  // namespace detail

// Aggregates one or more run directories into a comparison table keyed by
// (defense, selection policy, vulnerable count), and drops a reward moving
// average series (window 100) next to each run for convergence plots.
inline std::vector<SummaryRow> summarize(const std::vector<std::string>& dirs,
                                         std::size_t ma_window = 100) {
    if (dirs.empty()) throw Error(ErrorCategory::Config, "summarize: no run directories given");
    struct Bucket {
        int runs = 0;
        std::vector<double> final_accuracies, utilities;
        std::vector<double> lq_final_accuracies, lq_utilities;
    };
    std::map<SummaryKey, Bucket> buckets;

    for (const std::string& dir : dirs) {
        const detail::LoadedRun run = detail::load_run_dir(dir);

        {
            const std::vector<double> ma = moving_average(run.rewards, ma_window);
            std::ofstream out(dir + "/reward_ma.csv");
            if (!out) throw Error(ErrorCategory::Io, "cannot write '" + dir + "/reward_ma.csv'");
            out << "global_round,reward_ma" << '\n';
            for (std::size_t i = 0; i < ma.size(); ++i)
                out << run.global_rounds[i] << ',' << detail::fmt_double(ma[i]) << '\n';
        }

        SummaryKey key{to_string(run.config.defense.strategy),
                       to_string(run.config.selection.policy),
                       run.config.topology.vulnerable_count};
        Bucket& b = buckets[key];
        b.runs += 1;
        const std::size_t n_tasks = run.tasks.size();
        const std::size_t lq_start = n_tasks - std::max<std::size_t>(1, (n_tasks + 3) / 4);
        for (std::size_t i = 0; i < n_tasks; ++i) {
            b.final_accuracies.push_back(run.tasks[i].final_accuracy);
            b.utilities.push_back(run.tasks[i].mean_utility);
            if (i >= lq_start) {
                b.lq_final_accuracies.push_back(run.tasks[i].final_accuracy);
                b.lq_utilities.push_back(run.tasks[i].mean_utility);
            }
        }
    }

    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };

    std::vector<SummaryRow> rows;
    for (const auto& [key, b] : buckets) {
        SummaryRow row;
        row.key = key;
        row.run_count = b.runs;
        row.task_count = static_cast<long>(b.final_accuracies.size());
        row.mean_final_accuracy = mean(b.final_accuracies);
        row.mean_utility = mean(b.utilities);
        row.last_quartile_final_accuracy = mean(b.lq_final_accuracies);
        row.last_quartile_utility = mean(b.lq_utilities);
        rows.push_back(row);
    }
    return rows;
}

inline std::string summary_table_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    os << "defense,policy,vulnerable_count,runs,tasks,mean_final_accuracy,mean_utility,"
          "last_quartile_final_accuracy,last_quartile_utility\n";
    for (const SummaryRow& r : rows) {
        os << r.key.defense << ',' << r.key.policy << ',' << r.key.vulnerable_count << ','
           << r.run_count << ',' << r.task_count << ','
           << detail::fmt_double(r.mean_final_accuracy) << ','
           << detail::fmt_double(r.mean_utility) << ','
           << detail::fmt_double(r.last_quartile_final_accuracy) << ','
           << detail::fmt_double(r.last_quartile_utility) << '\n';
    }
    return os.str();
}

}  // namespace fedsim
