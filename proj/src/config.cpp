#include "tapir/config.hpp"

#include <fstream>
#include <sstream>

namespace tapir {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

long long to_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const long long r = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

}  // namespace

std::string reviser_kind_name(ReviserKind k) {
    return k == ReviserKind::Transformer ? "trf" : "lt";
}

ReviserKind reviser_kind_from(const std::string& name) {
    if (name == "trf") return ReviserKind::Transformer;
    if (name == "lt") return ReviserKind::LinearTransformer;
    throw ConfigError("config: reviser_kind must be 'trf' or 'lt', got '" + name + "'");
}

Config parse_config_text(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(origin + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "model" && section != "train" && section != "paths") {
                throw ConfigError(origin + ": unknown section [" + section + "]");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (section == "model") {
            if (key == "lstm_layers") cfg.lstm_layers = static_cast<int>(to_int(val, key));
            else if (key == "lstm_hidden") cfg.lstm_hidden = static_cast<int>(to_int(val, key));
            else if (key == "ctrl_layers") cfg.ctrl_layers = static_cast<int>(to_int(val, key));
            else if (key == "ctrl_hidden") cfg.ctrl_hidden = static_cast<int>(to_int(val, key));
            else if (key == "memory_size") cfg.memory_size = static_cast<int>(to_int(val, key));
            else if (key == "tau") cfg.tau = to_double(val, key);
            else if (key == "reviser_kind") cfg.reviser_kind = reviser_kind_from(val);
            else if (key == "reviser_layers") cfg.reviser_layers = static_cast<int>(to_int(val, key));
            else if (key == "d_model") cfg.d_model = static_cast<int>(to_int(val, key));
            else if (key == "ffn_dim") cfg.ffn_dim = static_cast<int>(to_int(val, key));
            else if (key == "heads") cfg.heads = static_cast<int>(to_int(val, key));
            else if (key == "embed_dim") cfg.embed_dim = static_cast<int>(to_int(val, key));
            else throw ConfigError(origin + ": unknown key '" + key + "' in [model]");
        } else if (section == "train") {
            if (key == "lr") cfg.lr = to_double(val, key);
            else if (key == "batch") cfg.batch = static_cast<int>(to_int(val, key));
            else if (key == "clip") cfg.clip = to_double(val, key);
            else if (key == "epochs") cfg.epochs = static_cast<int>(to_int(val, key));
            else if (key == "patience") cfg.patience = static_cast<int>(to_int(val, key));
            else if (key == "dropout") cfg.dropout = to_double(val, key);
            else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_int(val, key));
            else if (key == "unk_prob") cfg.unk_prob = to_double(val, key);
            else if (key == "delay") cfg.delay = static_cast<int>(to_int(val, key));
            else if (key == "warmup_epochs") cfg.warmup_epochs = static_cast<int>(to_int(val, key));
            else if (key == "weight_decay") cfg.weight_decay = to_double(val, key);
            else if (key == "adam_eps") cfg.adam_eps = to_double(val, key);
            else throw ConfigError(origin + ": unknown key '" + key + "' in [train]");
        } else if (section == "paths") {
            if (key == "train") cfg.train_path = val;
            else if (key == "val") cfg.val_path = val;
            else if (key == "test") cfg.test_path = val;
            else if (key == "embeddings") cfg.embeddings_path = val;
            else throw ConfigError(origin + ": unknown key '" + key + "' in [paths]");
        } else {
            throw ConfigError(origin + ": key '" + key + "' appears before any section");
        }
    }
    cfg.validate();
    return cfg;
}

Config parse_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

void Config::validate() const {
    if (tau < 0.0 || tau > 1.0) throw ConfigError("config: tau must be in [0,1]");
    if (lstm_layers < 1 || ctrl_layers < 1 || reviser_layers < 1)
        throw ConfigError("config: layer counts must be >= 1");
    if (memory_size < 1) throw ConfigError("config: memory_size must be >= 1");
    if (lstm_hidden < 1 || ctrl_hidden < 1 || d_model < 1 || ffn_dim < 1 || embed_dim < 1)
        throw ConfigError("config: dimensions must be >= 1");
    if (heads < 1 || d_model % heads != 0)
        throw ConfigError("config: heads must divide d_model");
    if (batch < 1 || epochs < 1) throw ConfigError("config: batch and epochs must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("config: dropout must be in [0,1)");
    if (unk_prob < 0.0 || unk_prob > 1.0) throw ConfigError("config: unk_prob must be in [0,1]");
    if (delay < 0 || delay > 2) throw ConfigError("config: delay must be 0, 1 or 2");
    if (lr <= 0.0) throw ConfigError("config: lr must be positive");
}

}  // namespace tapir
