#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "fedsim/config.hpp"

using namespace fedsim;

namespace {

// The experiment described in the write-up: ten EDs, five selected per round,
// prices 0.9/0.3, verification threshold 0.005, poisoned updates scaled 20x.
const char* kCanonicalConfig = R"(
[topology]
ed_count = 10
select_per_round = 5
vulnerable_count = 9
secure_price = 0.9
vulnerable_price = 0.3

[dataset]
kind = synthetic
classes = 4
dim = 8
per_class = 500
test_fraction = 0.2

[model]
hidden = 100,100

[federation]
rounds_per_task = 1000
task_count = 20
batch_size = 100
epochs = 1
learning_rate = 0.01

[defense]
strategy = vba
vba_threshold = 0.005

[attack]
vector = label_flip_random
scale = 20
schedule = markov
markov_stay_safe = 0.9
markov_stay_attacked = 0.8

[selection]
policy = drqn
lstm_units = 32
fc_units = 200
sequence_len = 3

[run]
master_seed = 7
output_dir = out/canonical
)";

TEST(Config, CanonicalScenarioValues) {
    const ExperimentConfig cfg = parse_config(kCanonicalConfig);
    EXPECT_EQ(cfg.topology.ed_count, 10u);
    EXPECT_EQ(cfg.topology.select_per_round, 5u);
    EXPECT_EQ(cfg.topology.vulnerable_count, 9u);
    EXPECT_DOUBLE_EQ(cfg.topology.secure_price, 0.9);
    EXPECT_DOUBLE_EQ(cfg.topology.vulnerable_price, 0.3);
    EXPECT_DOUBLE_EQ(cfg.defense.vba_threshold, 0.005);
    EXPECT_DOUBLE_EQ(cfg.attack.scale, 20.0);
    EXPECT_EQ(cfg.attack.vector, AttackVectorKind::LabelFlipRandom);
    EXPECT_EQ(cfg.hidden_layers, (std::vector<std::size_t>{100, 100}));
    EXPECT_EQ(cfg.selection.policy, SelectionPolicy::Drqn);
    EXPECT_EQ(cfg.selection.lstm_units, 32u);
    EXPECT_EQ(cfg.selection.fc_units, 200u);
    EXPECT_EQ(cfg.selection.sequence_len, 3u);
    // Defaults the file does not mention.
    EXPECT_DOUBLE_EQ(cfg.defense.lazy_cosine_threshold, 0.99);
    EXPECT_DOUBLE_EQ(cfg.selection.agent.gamma, 0.9);
    EXPECT_EQ(cfg.selection.agent.replay_capacity, 10000u);
    EXPECT_EQ(cfg.federation.history_depth, 5u);
}

TEST(Config, SelectCountExceedingEdCountNamesBothValues) {
    try {
        parse_config("[topology]\ned_count = 4\nselect_per_round = 9\n");
        FAIL() << "expected config error";
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::Config);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("9"), std::string::npos);
        EXPECT_NE(msg.find("4"), std::string::npos);
    }
}

TEST(Config, UnknownKeysRejectedWithLineNumbers) {
    try {
        parse_config("[topology]\ned_count = 10\nbogus_key = 3\n");
        FAIL() << "expected config error";
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("bogus_key"), std::string::npos);
        EXPECT_NE(msg.find("line 3"), std::string::npos);
    }
}

TEST(Config, ParseErrorCarriesLineNumber) {
    try {
        parse_config("[topology]\ned_count 10\n");
        FAIL() << "expected parse error";
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::Parse);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(Config, ViolationsAreReportedExhaustively) {
    // Three separate violations; all must be listed in one error.
    const char* text =
        "[topology]\ned_count = 10\nselect_per_round = 12\nsecure_price = -1\n"
        "[defense]\nvba_threshold = 0\n";
    try {
        parse_config(text);
        FAIL() << "expected config error";
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("select_per_round"), std::string::npos);
        EXPECT_NE(msg.find("secure_price"), std::string::npos);
        EXPECT_NE(msg.find("vba_threshold"), std::string::npos);
    }
}

TEST(Config, DrqnRequiresVba) {
    const char* text = "[defense]\nstrategy = comed\n[selection]\npolicy = drqn\n";
    EXPECT_THROW(parse_config(text), Error);
}

TEST(Config, IdxPathsMustExist) {
    const char* text = "[dataset]\nkind = idx\ntrain_images = nope.idx\n";
    try {
        parse_config(text, "/tmp");
        FAIL() << "expected config error";
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("train_images"), std::string::npos);
        EXPECT_NE(msg.find("train_labels"), std::string::npos);  // missing entirely
    }
}

TEST(Config, SerializeLoadRoundTrip) {
    const ExperimentConfig cfg = parse_config(kCanonicalConfig);
    const std::string text = serialize_config(cfg);
    const ExperimentConfig back = parse_config(text);
    EXPECT_EQ(serialize_config(back), text);
    // Spot checks that the round trip kept the values, not just the shape.
    EXPECT_EQ(back.topology.vulnerable_count, 9u);
    EXPECT_DOUBLE_EQ(back.attack.markov_stay_attacked, 0.8);
    EXPECT_EQ(back.federation.task_count, 20);
    EXPECT_EQ(back.output_dir, "out/canonical");
    EXPECT_EQ(back.master_seed, 7u);
}

TEST(Config, LoadFromFileAndValidate) {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "fedsim_cfg_test.ini").string();
    std::ofstream(path) << kCanonicalConfig;
    const ExperimentConfig cfg = load_config(path);
    EXPECT_EQ(cfg.topology.ed_count, 10u);
    fs::remove(path);
    EXPECT_THROW(load_config(path), Error);  // gone now
}

TEST(Config, DuplicateKeysRejected) {
    EXPECT_THROW(parse_config("[topology]\ned_count = 4\ned_count = 5\n"), Error);
}

TEST(Config, TargetedFlipValidation) {
    const char* ok =
        "[dataset]\nclasses = 10\n[attack]\nvector = label_flip_targeted\nflip_map = 7:1,3:8\n";
    const ExperimentConfig cfg = parse_config(ok);
    EXPECT_EQ(cfg.attack.flip_map.at(7), 1);
    EXPECT_EQ(cfg.attack.flip_map.at(3), 8);

    EXPECT_THROW(parse_config("[attack]\nvector = label_flip_targeted\nflip_map = 4:4\n"), Error);
    EXPECT_THROW(parse_config("[attack]\nvector = label_flip_targeted\n"), Error);
}

}  // namespace
