#include "sgraf/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace sgraf {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(ConfigError::Code::BadValue, "key '" + key + "': not a number: '" + value + "'");
    }
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size() || v < 0) throw std::invalid_argument(value);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ConfigError(ConfigError::Code::BadValue,
                          "key '" + key + "': not a non-negative integer: '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw ConfigError(ConfigError::Code::BadValue,
                          "key '" + key + "': not an unsigned integer: '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "off" || value == "no") return false;
    throw ConfigError(ConfigError::Code::BadValue, "key '" + key + "': not a boolean: '" + value + "'");
}

[[noreturn]] void range_error(const std::string& key, const std::string& expect, const std::string& value) {
    throw ConfigError(ConfigError::Code::OutOfRange,
                      "key '" + key + "' out of range: expected " + expect + ", got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string token;
    while (std::getline(ss, token, ',')) {
        token = trim(token);
        if (token.empty()) continue;
        out.push_back(static_cast<int>(parse_size(key, token)));
        if (out.back() < 1) range_error(key, "positive integers", value);
    }
    if (out.empty())
        throw ConfigError(ConfigError::Code::BadValue, "key '" + key + "': empty list");
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

const char* to_string(AttentionDirection d) {
    return d == AttentionDirection::TextToImage ? "t2i" : "i2t";
}
const char* to_string(SimilarityMode s) { return s == SimilarityMode::Vector ? "vector" : "scalar"; }
const char* to_string(Branch b) {
    switch (b) {
        case Branch::Joint: return "joint";
        case Branch::Sgr: return "sgr";
        case Branch::Saf: return "saf";
        case Branch::Ave: return "ave";
    }
    return "joint";
}
const char* to_string(Strategy s) { return s == Strategy::Joint ? "joint" : "split"; }
const char* to_string(SafBnScope s) { return s == SafBnScope::Batch ? "batch" : "pair"; }
const char* to_string(AttentionNorm a) { return a == AttentionNorm::Words ? "words" : "regions"; }

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "d") {
        cfg.d = parse_size(key, value);
        if (cfg.d < 1) range_error(key, ">= 1", value);
    } else if (key == "embed_dim") {
        cfg.embed_dim = parse_size(key, value);
        if (cfg.embed_dim < 1) range_error(key, ">= 1", value);
    } else if (key == "m" || key == "graph_dim") {
        cfg.m = parse_size(key, value);
        if (cfg.m < 1) range_error(key, ">= 1", value);
    } else if (key == "attn_hidden") {
        cfg.attn_hidden = parse_size(key, value);
        if (cfg.attn_hidden < 1) range_error(key, ">= 1", value);
    } else if (key == "lambda") {
        cfg.lambda = parse_double(key, value);
        if (cfg.lambda < 0.0) range_error(key, ">= 0", value);
    } else if (key == "steps") {
        cfg.steps = parse_size(key, value);
        if (cfg.steps < 1) range_error(key, ">= 1", value);
    } else if (key == "gamma") {
        cfg.gamma = parse_double(key, value);
        if (cfg.gamma <= 0.0) range_error(key, "> 0", value);
    } else if (key == "regions") {
        cfg.regions = parse_size(key, value);
        if (cfg.regions < 1) range_error(key, ">= 1", value);
    } else if (key == "d_raw") {
        cfg.d_raw = parse_size(key, value);
        if (cfg.d_raw < 1) range_error(key, ">= 1", value);
    } else if (key == "direction") {
        if (value == "t2i") cfg.direction = AttentionDirection::TextToImage;
        else if (value == "i2t") cfg.direction = AttentionDirection::ImageToText;
        else throw ConfigError(ConfigError::Code::BadValue, "key 'direction': expected t2i|i2t");
    } else if (key == "similarity") {
        if (value == "vector") cfg.similarity = SimilarityMode::Vector;
        else if (value == "scalar") cfg.similarity = SimilarityMode::Scalar;
        else throw ConfigError(ConfigError::Code::BadValue, "key 'similarity': expected vector|scalar");
    } else if (key == "branch") {
        if (value == "joint") cfg.branch = Branch::Joint;
        else if (value == "sgr") cfg.branch = Branch::Sgr;
        else if (value == "saf") cfg.branch = Branch::Saf;
        else if (value == "ave") cfg.branch = Branch::Ave;
        else throw ConfigError(ConfigError::Code::BadValue, "key 'branch': expected joint|sgr|saf|ave");
    } else if (key == "strategy") {
        if (value == "joint") cfg.strategy = Strategy::Joint;
        else if (value == "split") cfg.strategy = Strategy::Split;
        else throw ConfigError(ConfigError::Code::BadValue, "key 'strategy': expected joint|split");
    } else if (key == "use_global") {
        cfg.use_global = parse_bool(key, value);
    } else if (key == "use_local") {
        cfg.use_local = parse_bool(key, value);
    } else if (key == "saf_bn_scope") {
        if (value == "batch") cfg.saf_bn_scope = SafBnScope::Batch;
        else if (value == "pair") cfg.saf_bn_scope = SafBnScope::Pair;
        else throw ConfigError(ConfigError::Code::BadValue, "key 'saf_bn_scope': expected batch|pair");
    } else if (key == "attention_norm") {
        if (value == "words") cfg.attention_norm = AttentionNorm::Words;
        else if (value == "regions") cfg.attention_norm = AttentionNorm::Regions;
        else throw ConfigError(ConfigError::Code::BadValue, "key 'attention_norm': expected words|regions");
    } else if (key == "batch_size") {
        cfg.batch_size = parse_size(key, value);
        if (cfg.batch_size < 2) range_error(key, ">= 2", value);
    } else if (key == "learning_rate") {
        cfg.learning_rate = parse_double(key, value);
        if (cfg.learning_rate <= 0.0) range_error(key, "> 0", value);
    } else if (key == "lr_decay_factor") {
        cfg.lr_decay_factor = parse_double(key, value);
        if (cfg.lr_decay_factor <= 0.0 || cfg.lr_decay_factor > 1.0) range_error(key, "(0, 1]", value);
    } else if (key == "lr_decay_epochs") {
        cfg.lr_decay_epochs = parse_size(key, value);
    } else if (key == "epochs") {
        cfg.epochs = parse_size(key, value);
        if (cfg.epochs < 1) range_error(key, ">= 1", value);
    } else if (key == "epochs_sgr") {
        cfg.epochs_sgr = parse_size(key, value);
    } else if (key == "epochs_saf") {
        cfg.epochs_saf = parse_size(key, value);
    } else if (key == "val_count") {
        cfg.val_count = parse_size(key, value);
    } else if (key == "epsilon") {
        cfg.epsilon = parse_double(key, value);
        if (cfg.epsilon <= 0.0) range_error(key, "> 0", value);
    } else if (key == "bn_momentum") {
        cfg.bn_momentum = parse_double(key, value);
        if (cfg.bn_momentum <= 0.0 || cfg.bn_momentum >= 1.0) range_error(key, "(0, 1)", value);
    } else if (key == "adam_beta1") {
        cfg.adam_beta1 = parse_double(key, value);
        if (cfg.adam_beta1 < 0.0 || cfg.adam_beta1 >= 1.0) range_error(key, "[0, 1)", value);
    } else if (key == "adam_beta2") {
        cfg.adam_beta2 = parse_double(key, value);
        if (cfg.adam_beta2 < 0.0 || cfg.adam_beta2 >= 1.0) range_error(key, "[0, 1)", value);
    } else if (key == "adam_epsilon") {
        cfg.adam_epsilon = parse_double(key, value);
        if (cfg.adam_epsilon <= 0.0) range_error(key, "> 0", value);
    } else if (key == "captions_per_image") {
        cfg.captions_per_image = parse_size(key, value);
        if (cfg.captions_per_image < 1) range_error(key, ">= 1", value);
    } else if (key == "fold_count") {
        cfg.fold_count = parse_size(key, value);
        if (cfg.fold_count < 1) range_error(key, ">= 1", value);
    } else if (key == "recall_ks") {
        cfg.recall_ks = parse_int_list(key, value);
    } else if (key == "seed") {
        cfg.seed = parse_u64(key, value);
    } else if (key == "threads") {
        cfg.threads = parse_size(key, value);
        if (cfg.threads < 1) range_error(key, ">= 1", value);
    } else {
        throw ConfigError(ConfigError::Code::UnknownKey, "unknown config key '" + key + "'");
    }
}

void validate_config(const RunConfig& cfg) {
    if (!cfg.use_global && !cfg.use_local)
        throw ConfigError(ConfigError::Code::OutOfRange,
                          "use_global and use_local cannot both be off");
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& required) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(ConfigError::Code::Malformed,
                              "line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(ConfigError::Code::Malformed,
                              "line " + std::to_string(lineno) + ": empty key or value");
        apply_config_entry(cfg, key, value);
        seen.insert(key);
    }
    for (const std::string& key : required) {
        if (!seen.count(key))
            throw ConfigError(ConfigError::Code::MissingKey, "missing required config key '" + key + "'");
    }
    validate_config(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& required) {
    std::ifstream in(path);
    if (!in) throw ConfigError(ConfigError::Code::Malformed, "cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), required);
}

std::string dump_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "d = " << cfg.d << "\n";
    os << "embed_dim = " << cfg.embed_dim << "\n";
    os << "m = " << cfg.m << "\n";
    os << "attn_hidden = " << cfg.attn_hidden << "\n";
    os << "lambda = " << fmt(cfg.lambda) << "\n";
    os << "steps = " << cfg.steps << "\n";
    os << "gamma = " << fmt(cfg.gamma) << "\n";
    os << "regions = " << cfg.regions << "\n";
    os << "d_raw = " << cfg.d_raw << "\n";
    os << "direction = " << to_string(cfg.direction) << "\n";
    os << "similarity = " << to_string(cfg.similarity) << "\n";
    os << "branch = " << to_string(cfg.branch) << "\n";
    os << "strategy = " << to_string(cfg.strategy) << "\n";
    os << "use_global = " << (cfg.use_global ? "true" : "false") << "\n";
    os << "use_local = " << (cfg.use_local ? "true" : "false") << "\n";
    os << "saf_bn_scope = " << to_string(cfg.saf_bn_scope) << "\n";
    os << "attention_norm = " << to_string(cfg.attention_norm) << "\n";
    os << "batch_size = " << cfg.batch_size << "\n";
    os << "learning_rate = " << fmt(cfg.learning_rate) << "\n";
    os << "lr_decay_factor = " << fmt(cfg.lr_decay_factor) << "\n";
    os << "lr_decay_epochs = " << cfg.lr_decay_epochs << "\n";
    os << "epochs = " << cfg.epochs << "\n";
    os << "epochs_sgr = " << cfg.epochs_sgr << "\n";
    os << "epochs_saf = " << cfg.epochs_saf << "\n";
    os << "val_count = " << cfg.val_count << "\n";
    os << "epsilon = " << fmt(cfg.epsilon) << "\n";
    os << "bn_momentum = " << fmt(cfg.bn_momentum) << "\n";
    os << "adam_beta1 = " << fmt(cfg.adam_beta1) << "\n";
    os << "adam_beta2 = " << fmt(cfg.adam_beta2) << "\n";
    os << "adam_epsilon = " << fmt(cfg.adam_epsilon) << "\n";
    os << "captions_per_image = " << cfg.captions_per_image << "\n";
    os << "fold_count = " << cfg.fold_count << "\n";
    os << "recall_ks = ";
    for (std::size_t i = 0; i < cfg.recall_ks.size(); ++i) {
        if (i) os << ",";
        os << cfg.recall_ks[i];
    }
    os << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "threads = " << cfg.threads << "\n";
    return os.str();
}

}  // namespace sgraf
