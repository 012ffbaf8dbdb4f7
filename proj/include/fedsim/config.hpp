#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/defense.hpp"
#include "fedsim/error.hpp"
#include "fedsim/selection.hpp"
#include "fedsim/threat.hpp"

namespace fedsim {

enum class DatasetKind { Synthetic, Idx };
enum class SelectionPolicy { Random, Drqn };
enum class ScheduleKind { Bernoulli, Periodic, Markov };

struct TopologyConfig {
    unsigned ed_count = 10;
    unsigned select_per_round = 5;
    unsigned vulnerable_count = 0;
    double secure_price = 0.9;
    double vulnerable_price = 0.3;
};

struct DatasetConfig {
    DatasetKind kind = DatasetKind::Synthetic;
    // synthetic
    int classes = 4;
    std::size_t dim = 8;
    std::size_t per_class = 500;
    double test_fraction = 0.2;
    // idx
    std::string train_images, train_labels, test_images, test_labels;
    // 0 = score the full auxiliary split every round
    std::size_t aux_subsample = 0;
};

struct FederationConfig {
    long rounds_per_task = 1000;
    long task_count = 1;
    std::size_t batch_size = 100;
    int epochs = 1;
    double learning_rate = 0.01;
    std::size_t history_depth = 5;
};

struct AttackSection {
    AttackVectorKind vector = AttackVectorKind::None;
    double scale = 1.0;
    double sigma = 1.0;
    std::map<int, int> flip_map;
    double boost = 1.0;
    std::string replacement_target;  // checkpoint path; empty = zero target
    ScheduleKind schedule = ScheduleKind::Markov;
    double bernoulli_p = 0.5;
    long period = 4, phase = 0, duty = 2;
    double markov_stay_safe = 0.9;
    double markov_stay_attacked = 0.8;
};

struct SelectionConfig {
    SelectionPolicy policy = SelectionPolicy::Random;
    AgentConfig agent;
    std::size_t lstm_units = 32;
    std::size_t fc_units = 200;
    std::size_t sequence_len = 3;
};

struct ExperimentConfig {
    TopologyConfig topology;
    DatasetConfig dataset;
    std::vector<std::size_t> hidden_layers = {100, 100};
    FederationConfig federation;
    DefenseConfig defense;
    AttackSection attack;
    SelectionConfig selection;
    std::uint64_t master_seed = 1;
    std::string output_dir = "out";
};

namespace cfgdetail {

struct IniEntry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
    bool consumed = false;
};

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Lines: "[section]" headers and "key = value" pairs; '#' starts a comment.
inline std::vector<IniEntry> parse_ini(const std::string& text) {
    std::vector<IniEntry> entries;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw Error(ErrorCategory::Parse,
                            "line " + std::to_string(line_no) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw Error(ErrorCategory::Parse,
                            "line " + std::to_string(line_no) + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCategory::Parse,
                        "line " + std::to_string(line_no) + ": expected 'key = value'");
        IniEntry e;
        e.section = section;
        e.key = trim(line.substr(0, eq));
        e.value = trim(line.substr(eq + 1));
        e.line = line_no;
        if (e.key.empty())
            throw Error(ErrorCategory::Parse,
                        "line " + std::to_string(line_no) + ": empty key");
        if (section.empty())
            throw Error(ErrorCategory::Parse,
                        "line " + std::to_string(line_no) + ": key outside any [section]");
        entries.push_back(std::move(e));
    }
    return entries;
}

class Reader {
public:
    explicit Reader(std::vector<IniEntry>& entries) : entries_(entries) {}

    std::optional<std::string> raw(const std::string& section, const std::string& key) {
        std::optional<std::string> out;
        for (IniEntry& e : entries_) {
            if (e.section == section && e.key == key) {
                if (e.consumed)
                    errors_.push_back("duplicate key '" + section + "." + key + "' at line " +
                                      std::to_string(e.line));
                e.consumed = true;
                out = e.value;
            }
        }
        return out;
    }

    template <typename T>
    void integer(const std::string& section, const std::string& key, T& out) {
        const auto v = raw(section, key);
        if (!v) return;
        long long parsed = 0;
        const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), parsed);
        if (ec != std::errc() || p != v->data() + v->size() || parsed < 0)
            errors_.push_back("'" + section + "." + key + "': expected a non-negative integer, got '" +
                              *v + "'");
        else
            out = static_cast<T>(parsed);
    }

    void signed_integer(const std::string& section, const std::string& key, int& out) {
        const auto v = raw(section, key);
        if (!v) return;
        int parsed = 0;
        const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), parsed);
        if (ec != std::errc() || p != v->data() + v->size())
            errors_.push_back("'" + section + "." + key + "': expected an integer, got '" + *v + "'");
        else
            out = parsed;
    }

    void real(const std::string& section, const std::string& key, double& out) {
        const auto v = raw(section, key);
        if (!v) return;
        double parsed = 0.0;
        const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), parsed);
        if (ec != std::errc() || p != v->data() + v->size())
            errors_.push_back("'" + section + "." + key + "': expected a number, got '" + *v + "'");
        else
            out = parsed;
    }

    void text(const std::string& section, const std::string& key, std::string& out) {
        const auto v = raw(section, key);
        if (v) out = *v;
    }

    void fail(const std::string& message) { errors_.push_back(message); }

    void finish(ErrorCategory category, const std::string& what) {
        for (const IniEntry& e : entries_)
            if (!e.consumed)
                errors_.push_back("unknown key '" + e.section + "." + e.key + "' at line " +
                                  std::to_string(e.line));
        if (errors_.empty()) return;
        std::string all = what + ":";
        for (const std::string& e : errors_) all += "\n  - " + e;
        throw Error(category, all);
    }

    std::vector<std::string>& errors() { return errors_; }

private:
    std::vector<IniEntry>& entries_;
    std::vector<std::string> errors_;
};

inline std::string format_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

template <typename Map>
inline std::string format_flip_map(const Map& m) {
    std::string out;
    for (const auto& [src, dst] : m) {
        if (!out.empty()) out += ",";
        out += std::to_string(src) + ":" + std::to_string(dst);
    }
    return out;
}

}  // namespace cfgdetail

inline const char* to_string(DatasetKind k) {
    return k == DatasetKind::Synthetic ? "synthetic" : "idx";
}
inline const char* to_string(SelectionPolicy p) {
    return p == SelectionPolicy::Random ? "random" : "drqn";
}
inline const char* to_string(ScheduleKind s) {
    switch (s) {
        case ScheduleKind::Bernoulli: return "bernoulli";
        case ScheduleKind::Periodic: return "periodic";
        case ScheduleKind::Markov: return "markov";
    }
    return "?";
}
inline const char* to_string(AttackVectorKind k) {
    switch (k) {
        case AttackVectorKind::None: return "none";
        case AttackVectorKind::LabelFlipRandom: return "label_flip_random";
        case AttackVectorKind::LabelFlipTargeted: return "label_flip_targeted";
        case AttackVectorKind::GaussianNoise: return "gaussian_noise";
        case AttackVectorKind::SignFlip: return "sign_flip";
        case AttackVectorKind::NegativeIncrement: return "negative_increment";
        case AttackVectorKind::ModelReplacement: return "model_replacement";
    }
    return "?";
}

// Parses and validates a config. Parse problems carry line numbers; semantic
// violations are collected and reported all at once, not first-only.
inline ExperimentConfig parse_config(const std::string& text,
                                     const std::string& base_dir = ".") {
    auto entries = cfgdetail::parse_ini(text);
    cfgdetail::Reader r(entries);
    ExperimentConfig cfg;

    r.integer("topology", "ed_count", cfg.topology.ed_count);
    r.integer("topology", "select_per_round", cfg.topology.select_per_round);
    r.integer("topology", "vulnerable_count", cfg.topology.vulnerable_count);
    r.real("topology", "secure_price", cfg.topology.secure_price);
    r.real("topology", "vulnerable_price", cfg.topology.vulnerable_price);

    if (const auto v = r.raw("dataset", "kind")) {
        if (*v == "synthetic") cfg.dataset.kind = DatasetKind::Synthetic;
        else if (*v == "idx") cfg.dataset.kind = DatasetKind::Idx;
        else r.fail("'dataset.kind': expected synthetic or idx, got '" + *v + "'");
    }
    r.integer("dataset", "classes", cfg.dataset.classes);
    r.integer("dataset", "dim", cfg.dataset.dim);
    r.integer("dataset", "per_class", cfg.dataset.per_class);
    r.real("dataset", "test_fraction", cfg.dataset.test_fraction);
    r.text("dataset", "train_images", cfg.dataset.train_images);
    r.text("dataset", "train_labels", cfg.dataset.train_labels);
    r.text("dataset", "test_images", cfg.dataset.test_images);
    r.text("dataset", "test_labels", cfg.dataset.test_labels);
    r.integer("dataset", "aux_subsample", cfg.dataset.aux_subsample);

    if (const auto v = r.raw("model", "hidden")) {
        cfg.hidden_layers.clear();
        std::string tok;
        std::istringstream is(*v);
        while (std::getline(is, tok, ',')) {
            tok = cfgdetail::trim(tok);
            if (tok.empty()) continue;
            if (tok.find_first_not_of("0123456789") != std::string::npos) {
                r.fail("'model.hidden': expected comma-separated widths, got '" + *v + "'");
                break;
            }
            cfg.hidden_layers.push_back(std::stoull(tok));
        }
    }

    r.integer("federation", "rounds_per_task", cfg.federation.rounds_per_task);
    r.integer("federation", "task_count", cfg.federation.task_count);
    r.integer("federation", "batch_size", cfg.federation.batch_size);
    r.signed_integer("federation", "epochs", cfg.federation.epochs);
    r.real("federation", "learning_rate", cfg.federation.learning_rate);
    r.integer("federation", "history_depth", cfg.federation.history_depth);

    if (const auto v = r.raw("defense", "strategy")) {
        if (*v == "fedavg") cfg.defense.strategy = DefenseStrategy::FedAvg;
        else if (*v == "comed") cfg.defense.strategy = DefenseStrategy::Comed;
        else if (*v == "geomed") cfg.defense.strategy = DefenseStrategy::Geomed;
        else if (*v == "cotmed") cfg.defense.strategy = DefenseStrategy::Cotmed;
        else if (*v == "krum") cfg.defense.strategy = DefenseStrategy::Krum;
        else if (*v == "normbound") cfg.defense.strategy = DefenseStrategy::NormBound;
        else if (*v == "rsa") cfg.defense.strategy = DefenseStrategy::Rsa;
        else if (*v == "vba") cfg.defense.strategy = DefenseStrategy::Vba;
        else r.fail("'defense.strategy': unknown strategy '" + *v + "'");
    }
    r.real("defense", "vba_threshold", cfg.defense.vba_threshold);
    r.real("defense", "lazy_cosine_threshold", cfg.defense.lazy_cosine_threshold);
    if (const auto v = r.raw("defense", "trim_count")) {
        if (*v == "auto") cfg.defense.trim_count = -1;
        else {
            int t = 0;
            const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), t);
            if (ec != std::errc() || p != v->data() + v->size() || t < 0)
                r.fail("'defense.trim_count': expected 'auto' or a non-negative integer");
            else cfg.defense.trim_count = t;
        }
    }
    r.signed_integer("defense", "krum_f", cfg.defense.krum_f);
    if (const auto v = r.raw("defense", "norm_cap")) {
        if (*v == "median") cfg.defense.norm_cap_rule = NormCapRule::MedianOfNorms;
        else {
            double c = 0.0;
            const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), c);
            if (ec != std::errc() || p != v->data() + v->size() || c <= 0.0)
                r.fail("'defense.norm_cap': expected 'median' or a positive number");
            else {
                cfg.defense.norm_cap_rule = NormCapRule::Fixed;
                cfg.defense.norm_cap = c;
            }
        }
    }
    r.real("defense", "rsa_step", cfg.defense.rsa_step);
    r.real("defense", "geomed_tol", cfg.defense.geomed_tol);
    r.signed_integer("defense", "geomed_max_iter", cfg.defense.geomed_max_iter);

    if (const auto v = r.raw("attack", "vector")) {
        if (*v == "none") cfg.attack.vector = AttackVectorKind::None;
        else if (*v == "label_flip_random") cfg.attack.vector = AttackVectorKind::LabelFlipRandom;
        else if (*v == "label_flip_targeted") cfg.attack.vector = AttackVectorKind::LabelFlipTargeted;
        else if (*v == "gaussian_noise") cfg.attack.vector = AttackVectorKind::GaussianNoise;
        else if (*v == "sign_flip") cfg.attack.vector = AttackVectorKind::SignFlip;
        else if (*v == "negative_increment") cfg.attack.vector = AttackVectorKind::NegativeIncrement;
        else if (*v == "model_replacement") cfg.attack.vector = AttackVectorKind::ModelReplacement;
        else r.fail("'attack.vector': unknown vector '" + *v + "'");
    }
    r.real("attack", "scale", cfg.attack.scale);
    r.real("attack", "sigma", cfg.attack.sigma);
    if (const auto v = r.raw("attack", "flip_map")) {
        std::istringstream is(*v);
        std::string pair;
        while (std::getline(is, pair, ',')) {
            pair = cfgdetail::trim(pair);
            const auto colon = pair.find(':');
            if (colon == std::string::npos) {
                r.fail("'attack.flip_map': expected src:dst pairs, got '" + *v + "'");
                break;
            }
            try {
                cfg.attack.flip_map[std::stoi(pair.substr(0, colon))] =
                    std::stoi(pair.substr(colon + 1));
            } catch (const std::exception&) {
                r.fail("'attack.flip_map': bad pair '" + pair + "'");
                break;
            }
        }
    }
    r.real("attack", "boost", cfg.attack.boost);
    r.text("attack", "replacement_target", cfg.attack.replacement_target);
    if (const auto v = r.raw("attack", "schedule")) {
        if (*v == "bernoulli") cfg.attack.schedule = ScheduleKind::Bernoulli;
        else if (*v == "periodic") cfg.attack.schedule = ScheduleKind::Periodic;
        else if (*v == "markov") cfg.attack.schedule = ScheduleKind::Markov;
        else r.fail("'attack.schedule': unknown schedule '" + *v + "'");
    }
    r.real("attack", "bernoulli_p", cfg.attack.bernoulli_p);
    r.integer("attack", "period", cfg.attack.period);
    r.integer("attack", "phase", cfg.attack.phase);
    r.integer("attack", "duty", cfg.attack.duty);
    r.real("attack", "markov_stay_safe", cfg.attack.markov_stay_safe);
    r.real("attack", "markov_stay_attacked", cfg.attack.markov_stay_attacked);

    if (const auto v = r.raw("selection", "policy")) {
        if (*v == "random") cfg.selection.policy = SelectionPolicy::Random;
        else if (*v == "drqn") cfg.selection.policy = SelectionPolicy::Drqn;
        else r.fail("'selection.policy': expected random or drqn, got '" + *v + "'");
    }
    r.real("selection", "gamma", cfg.selection.agent.gamma);
    r.real("selection", "agent_lr", cfg.selection.agent.learning_rate);
    r.real("selection", "epsilon_start", cfg.selection.agent.epsilon_start);
    r.real("selection", "epsilon_end", cfg.selection.agent.epsilon_end);
    r.integer("selection", "epsilon_anneal_rounds", cfg.selection.agent.epsilon_anneal_rounds);
    r.integer("selection", "replay_capacity", cfg.selection.agent.replay_capacity);
    r.integer("selection", "batch_size", cfg.selection.agent.batch_size);
    r.integer("selection", "target_sync", cfg.selection.agent.target_sync_period);
    r.integer("selection", "lstm_units", cfg.selection.lstm_units);
    r.integer("selection", "fc_units", cfg.selection.fc_units);
    r.integer("selection", "sequence_len", cfg.selection.sequence_len);

    r.integer("run", "master_seed", cfg.master_seed);
    r.text("run", "output_dir", cfg.output_dir);

    // Semantic validation; every violation is reported, not just the first.
    const auto& t = cfg.topology;
    if (t.ed_count < 1) r.fail("topology.ed_count must be >= 1");
    if (t.select_per_round < 1 || t.select_per_round > t.ed_count)
        r.fail("topology.select_per_round (" + std::to_string(t.select_per_round) +
               ") must be in [1, ed_count = " + std::to_string(t.ed_count) + "]");
    if (t.vulnerable_count > t.ed_count)
        r.fail("topology.vulnerable_count (" + std::to_string(t.vulnerable_count) +
               ") exceeds ed_count (" + std::to_string(t.ed_count) + ")");
    if (t.secure_price <= 0.0) r.fail("topology.secure_price must be positive");
    if (t.vulnerable_price <= 0.0) r.fail("topology.vulnerable_price must be positive");

    if (cfg.dataset.kind == DatasetKind::Synthetic) {
        if (cfg.dataset.classes < 2) r.fail("dataset.classes must be >= 2");
        if (cfg.dataset.dim < 1) r.fail("dataset.dim must be >= 1");
        if (cfg.dataset.per_class < 1) r.fail("dataset.per_class must be >= 1");
        if (cfg.dataset.test_fraction <= 0.0 || cfg.dataset.test_fraction >= 1.0)
            r.fail("dataset.test_fraction must be in (0, 1)");
    } else {
        for (const auto& [key, path] :
             {std::pair<const char*, const std::string*>{"train_images", &cfg.dataset.train_images},
              {"train_labels", &cfg.dataset.train_labels},
              {"test_images", &cfg.dataset.test_images},
              {"test_labels", &cfg.dataset.test_labels}}) {
            if (path->empty())
                r.fail(std::string("dataset.") + key + " is required for kind = idx");
            else if (!std::filesystem::exists(std::filesystem::path(base_dir) / *path) &&
                     !std::filesystem::exists(*path))
                r.fail(std::string("dataset.") + key + ": file not found: " + *path);
        }
    }

    for (std::size_t h : cfg.hidden_layers)
        if (h < 1) r.fail("model.hidden widths must be >= 1");

    if (cfg.federation.rounds_per_task < 1) r.fail("federation.rounds_per_task must be >= 1");
    if (cfg.federation.task_count < 1) r.fail("federation.task_count must be >= 1");
    if (cfg.federation.batch_size < 1) r.fail("federation.batch_size must be >= 1");
    if (cfg.federation.epochs < 0) r.fail("federation.epochs must be >= 0");
    if (cfg.federation.learning_rate <= 0.0) r.fail("federation.learning_rate must be positive");
    if (cfg.federation.history_depth < 1) r.fail("federation.history_depth must be >= 1");

    if (cfg.defense.vba_threshold <= 0.0) r.fail("defense.vba_threshold must be positive");
    if (cfg.defense.lazy_cosine_threshold <= 0.0 || cfg.defense.lazy_cosine_threshold > 1.0)
        r.fail("defense.lazy_cosine_threshold must be in (0, 1]");
    if (cfg.defense.strategy == DefenseStrategy::Cotmed && cfg.defense.trim_count >= 0 &&
        2u * static_cast<unsigned>(cfg.defense.trim_count) >= t.select_per_round)
        r.fail("defense.trim_count (" + std::to_string(cfg.defense.trim_count) +
               ") too large: need 2*trim_count < select_per_round (" +
               std::to_string(t.select_per_round) + ")");
    if (cfg.defense.strategy == DefenseStrategy::Krum &&
        (cfg.defense.krum_f < 0 ||
         t.select_per_round < static_cast<unsigned>(cfg.defense.krum_f) + 3))
        r.fail("defense.krum_f (" + std::to_string(cfg.defense.krum_f) +
               ") needs select_per_round >= krum_f + 3 (select_per_round = " +
               std::to_string(t.select_per_round) + ")");
    if (cfg.defense.rsa_step <= 0.0) r.fail("defense.rsa_step must be positive");
    if (cfg.defense.geomed_tol <= 0.0) r.fail("defense.geomed_tol must be positive");
    if (cfg.defense.geomed_max_iter < 1) r.fail("defense.geomed_max_iter must be >= 1");

    if (cfg.attack.scale < 1.0) r.fail("attack.scale must be >= 1");
    if (cfg.attack.sigma <= 0.0) r.fail("attack.sigma must be positive");
    if (cfg.attack.vector == AttackVectorKind::LabelFlipTargeted) {
        if (cfg.attack.flip_map.empty())
            r.fail("attack.flip_map is required for label_flip_targeted");
        for (const auto& [src, dst] : cfg.attack.flip_map) {
            if (src == dst)
                r.fail("attack.flip_map maps class " + std::to_string(src) + " to itself");
            if (cfg.dataset.kind == DatasetKind::Synthetic &&
                (src < 0 || src >= cfg.dataset.classes || dst < 0 || dst >= cfg.dataset.classes))
                r.fail("attack.flip_map entry " + std::to_string(src) + ":" + std::to_string(dst) +
                       " outside [0, " + std::to_string(cfg.dataset.classes) + ")");
        }
    }
    if (cfg.attack.vector == AttackVectorKind::ModelReplacement &&
        !cfg.attack.replacement_target.empty() &&
        !std::filesystem::exists(cfg.attack.replacement_target))
        r.fail("attack.replacement_target: file not found: " + cfg.attack.replacement_target);
    if (cfg.attack.bernoulli_p < 0.0 || cfg.attack.bernoulli_p > 1.0)
        r.fail("attack.bernoulli_p must be in [0, 1]");
    if (cfg.attack.period < 1) r.fail("attack.period must be >= 1");
    if (cfg.attack.duty < 0 || cfg.attack.duty > cfg.attack.period)
        r.fail("attack.duty must be in [0, period]");
    if (cfg.attack.markov_stay_safe < 0.0 || cfg.attack.markov_stay_safe > 1.0)
        r.fail("attack.markov_stay_safe must be in [0, 1]");
    if (cfg.attack.markov_stay_attacked < 0.0 || cfg.attack.markov_stay_attacked > 1.0)
        r.fail("attack.markov_stay_attacked must be in [0, 1]");

    if (cfg.selection.policy == SelectionPolicy::Drqn) {
        if (cfg.defense.strategy != DefenseStrategy::Vba)
            r.fail("selection.policy = drqn requires defense.strategy = vba "
                   "(the reward needs per-update verdicts)");
        const std::uint64_t actions = binomial(t.ed_count, t.select_per_round);
        if (actions > 1000000)
            r.fail("C(ed_count, select_per_round) = " + std::to_string(actions) +
                   " is too large for an enumerated Q head (limit 1000000)");
        if (cfg.selection.agent.gamma < 0.0 || cfg.selection.agent.gamma >= 1.0)
            r.fail("selection.gamma must be in [0, 1)");
        if (cfg.selection.agent.batch_size < 1) r.fail("selection.batch_size must be >= 1");
        if (cfg.selection.agent.replay_capacity < cfg.selection.agent.batch_size)
            r.fail("selection.replay_capacity must be >= selection.batch_size");
        if (cfg.selection.agent.target_sync_period < 1)
            r.fail("selection.target_sync must be >= 1");
        if (cfg.selection.sequence_len < 1) r.fail("selection.sequence_len must be >= 1");
        if (cfg.selection.lstm_units < 1 || cfg.selection.fc_units < 1)
            r.fail("selection.lstm_units and selection.fc_units must be >= 1");
    }

    r.finish(ErrorCategory::Config, "invalid configuration");
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCategory::Io, "cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string dir = std::filesystem::path(path).parent_path().string();
    return parse_config(ss.str(), dir.empty() ? "." : dir);
}

// Canonical text form; parse_config(serialize_config(c)) reproduces c.
inline std::string serialize_config(const ExperimentConfig& cfg) {
    using cfgdetail::format_double;
    std::ostringstream os;
    os << "[topology]\n"
       << "ed_count = " << cfg.topology.ed_count << '\n'
       << "select_per_round = " << cfg.topology.select_per_round << '\n'
       << "vulnerable_count = " << cfg.topology.vulnerable_count << '\n'
       << "secure_price = " << format_double(cfg.topology.secure_price) << '\n'
       << "vulnerable_price = " << format_double(cfg.topology.vulnerable_price) << '\n'
       << "\n[dataset]\n"
       << "kind = " << to_string(cfg.dataset.kind) << '\n';
    if (cfg.dataset.kind == DatasetKind::Synthetic) {
        os << "classes = " << cfg.dataset.classes << '\n'
           << "dim = " << cfg.dataset.dim << '\n'
           << "per_class = " << cfg.dataset.per_class << '\n'
           << "test_fraction = " << format_double(cfg.dataset.test_fraction) << '\n';
    } else {
        os << "train_images = " << cfg.dataset.train_images << '\n'
           << "train_labels = " << cfg.dataset.train_labels << '\n'
           << "test_images = " << cfg.dataset.test_images << '\n'
           << "test_labels = " << cfg.dataset.test_labels << '\n';
    }
    os << "aux_subsample = " << cfg.dataset.aux_subsample << '\n';

    os << "\n[model]\nhidden = ";
    for (std::size_t i = 0; i < cfg.hidden_layers.size(); ++i)
        os << (i ? "," : "") << cfg.hidden_layers[i];
    os << '\n';

    os << "\n[federation]\n"
       << "rounds_per_task = " << cfg.federation.rounds_per_task << '\n'
       << "task_count = " << cfg.federation.task_count << '\n'
       << "batch_size = " << cfg.federation.batch_size << '\n'
       << "epochs = " << cfg.federation.epochs << '\n'
       << "learning_rate = " << format_double(cfg.federation.learning_rate) << '\n'
       << "history_depth = " << cfg.federation.history_depth << '\n';

    os << "\n[defense]\n"
       << "strategy = " << to_string(cfg.defense.strategy) << '\n'
       << "vba_threshold = " << format_double(cfg.defense.vba_threshold) << '\n'
       << "lazy_cosine_threshold = " << format_double(cfg.defense.lazy_cosine_threshold) << '\n';
    if (cfg.defense.trim_count >= 0) os << "trim_count = " << cfg.defense.trim_count << '\n';
    else os << "trim_count = auto\n";
    os << "krum_f = " << cfg.defense.krum_f << '\n';
    if (cfg.defense.norm_cap_rule == NormCapRule::MedianOfNorms) os << "norm_cap = median\n";
    else os << "norm_cap = " << format_double(cfg.defense.norm_cap) << '\n';
    os << "rsa_step = " << format_double(cfg.defense.rsa_step) << '\n'
       << "geomed_tol = " << format_double(cfg.defense.geomed_tol) << '\n'
       << "geomed_max_iter = " << cfg.defense.geomed_max_iter << '\n';

    os << "\n[attack]\n"
       << "vector = " << to_string(cfg.attack.vector) << '\n'
       << "scale = " << format_double(cfg.attack.scale) << '\n';
    if (cfg.attack.vector == AttackVectorKind::GaussianNoise)
        os << "sigma = " << format_double(cfg.attack.sigma) << '\n';
    if (cfg.attack.vector == AttackVectorKind::LabelFlipTargeted)
        os << "flip_map = " << cfgdetail::format_flip_map(cfg.attack.flip_map) << '\n';
    if (cfg.attack.vector == AttackVectorKind::ModelReplacement) {
        os << "boost = " << format_double(cfg.attack.boost) << '\n';
        if (!cfg.attack.replacement_target.empty())
            os << "replacement_target = " << cfg.attack.replacement_target << '\n';
    }
    os << "schedule = " << to_string(cfg.attack.schedule) << '\n';
    switch (cfg.attack.schedule) {
        case ScheduleKind::Bernoulli:
            os << "bernoulli_p = " << format_double(cfg.attack.bernoulli_p) << '\n';
            break;
        case ScheduleKind::Periodic:
            os << "period = " << cfg.attack.period << '\n'
               << "phase = " << cfg.attack.phase << '\n'
               << "duty = " << cfg.attack.duty << '\n';
            break;
        case ScheduleKind::Markov:
            os << "markov_stay_safe = " << format_double(cfg.attack.markov_stay_safe) << '\n'
               << "markov_stay_attacked = " << format_double(cfg.attack.markov_stay_attacked)
               << '\n';
            break;
    }

    os << "\n[selection]\n"
       << "policy = " << to_string(cfg.selection.policy) << '\n';
    if (cfg.selection.policy == SelectionPolicy::Drqn) {
        os << "gamma = " << format_double(cfg.selection.agent.gamma) << '\n'
           << "agent_lr = " << format_double(cfg.selection.agent.learning_rate) << '\n'
           << "epsilon_start = " << format_double(cfg.selection.agent.epsilon_start) << '\n'
           << "epsilon_end = " << format_double(cfg.selection.agent.epsilon_end) << '\n'
           << "epsilon_anneal_rounds = " << cfg.selection.agent.epsilon_anneal_rounds << '\n'
           << "replay_capacity = " << cfg.selection.agent.replay_capacity << '\n'
           << "batch_size = " << cfg.selection.agent.batch_size << '\n'
           << "target_sync = " << cfg.selection.agent.target_sync_period << '\n'
           << "lstm_units = " << cfg.selection.lstm_units << '\n'
           << "fc_units = " << cfg.selection.fc_units << '\n'
           << "sequence_len = " << cfg.selection.sequence_len << '\n';
    }

    os << "\n[run]\n"
       << "master_seed = " << cfg.master_seed << '\n'
       << "output_dir = " << cfg.output_dir << '\n';
    return os.str();
}

}  // namespace fedsim
