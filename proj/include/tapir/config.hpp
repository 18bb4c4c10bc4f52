#pragma once

#include <map>
#include <string>
#include <vector>

#include "tapir/common.hpp"

namespace tapir {

enum class ReviserKind { Transformer, LinearTransformer };

// Flat key=value file with [model], [train] and [paths] sections. '#' starts
// a comment; unknown keys are a ConfigError.
struct Config {
    // [model]
    int lstm_layers = 1;
    int lstm_hidden = 512;
    int ctrl_layers = 1;
    int ctrl_hidden = 256;
    int memory_size = 5;       // cache capacity N
    double tau = 0.5;
    ReviserKind reviser_kind = ReviserKind::Transformer;
    int reviser_layers = 2;
    int d_model = 512;
    int ffn_dim = 2048;
    int heads = 8;
    int embed_dim = 300;

    // [train]
    double lr = 1e-4;
    int batch = 32;
    double clip = 1.0;         // <= 0 disables
    int epochs = 50;
    int patience = 10;
    double dropout = 0.1;
    std::uint64_t seed = kDefaultSeed;
    double unk_prob = 0.02;
    int delay = 0;
    int warmup_epochs = 5;
    // AdamW extras the source material leaves open; flagged here so runs can
    // override them explicitly.
    double weight_decay = 0.01;
    double adam_eps = 1e-8;

    // [paths]
    std::string train_path;
    std::string val_path;
    std::string test_path;
    std::string embeddings_path;

    void validate() const;  // throws ConfigError
};

Config parse_config(const std::string& path);
Config parse_config_text(const std::string& text, const std::string& origin = "<memory>");

std::string reviser_kind_name(ReviserKind k);
ReviserKind reviser_kind_from(const std::string& name);

}  // namespace tapir
