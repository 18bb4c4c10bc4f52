#include <doctest.h>

#include "tapir/config.hpp"

using namespace tapir;

TEST_CASE("config parses sections, comments and values") {
    const std::string text = R"(# synthetic desk config
[model]
lstm_layers = 2
lstm_hidden = 64
tau = 0.4
reviser_kind = lt
[train]
lr = 0.001
seed = 99
delay = 1
[paths]
train = data/train.conll
)";
    Config cfg = parse_config_text(text);
    CHECK(cfg.lstm_layers == 2);
    CHECK(cfg.lstm_hidden == 64);
    CHECK(cfg.tau == doctest::Approx(0.4));
    CHECK(cfg.reviser_kind == ReviserKind::LinearTransformer);
    CHECK(cfg.lr == doctest::Approx(0.001));
    CHECK(cfg.seed == 99);
    CHECK(cfg.delay == 1);
    CHECK(cfg.train_path == "data/train.conll");
    // untouched keys keep their defaults
    CHECK(cfg.heads == 8);
    CHECK(cfg.epochs == 50);
    CHECK(cfg.patience == 10);
    CHECK(cfg.dropout == doctest::Approx(0.1));
    CHECK(cfg.unk_prob == doctest::Approx(0.02));
}

TEST_CASE("config default seed matches the toolkit-wide default") {
    Config cfg = parse_config_text("[model]\n");
    CHECK(cfg.seed == 42119392ULL);
}

TEST_CASE("config rejects unknown keys and sections") {
    CHECK_THROWS_AS(parse_config_text("[model]\nnot_a_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[weird]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("lr = 1\n"), ConfigError);  // key before section
}

TEST_CASE("config validates ranges") {
    CHECK_THROWS_AS(parse_config_text("[model]\ntau = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[model]\nd_model = 30\nheads = 8\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[train]\ndelay = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[train]\nlr = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[model]\nreviser_kind = gru\n"), ConfigError);
}

TEST_CASE("missing config file is a config error") {
    CHECK_THROWS_AS(parse_config("/nonexistent/path.cfg"), ConfigError);
}
