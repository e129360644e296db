#ifndef SGRAF_CONFIG_HPP_
#define SGRAF_CONFIG_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgraf {

struct ConfigError : std::runtime_error {
    enum class Code { UnknownKey, MissingKey, BadValue, OutOfRange, Malformed };
    Code code;
    ConfigError(Code c, const std::string& what) : std::runtime_error(what), code(c) {}
};

// Which side attends: text-to-image attends each word over regions (default),
// image-to-text is the symmetric construction.
enum class AttentionDirection { TextToImage, ImageToText };
// Vector-valued similarity representations vs plain scalar cosines.
enum class SimilarityMode { Vector, Scalar };
// Scoring head(s) carried by a model.
enum class Branch { Joint, Sgr, Saf, Ave };
// Joint: one shared backbone trained on both head losses.
// Split: two disjoint models trained separately, scores averaged at inference.
enum class Strategy { Joint, Split };
// Scope of the batch-norm statistics inside the filtration weights during
// training: pooled over every node of every pair in the minibatch, or within
// each pair's own node set.
enum class SafBnScope { Batch, Pair };
// Axis of the positive-cosine normalization that feeds the attention softmax,
// named in the text-to-image frame.
enum class AttentionNorm { Words, Regions };

struct RunConfig {
    // architecture
    std::size_t d = 1024;         // feature dimension
    std::size_t embed_dim = 300;  // word embedding width
    std::size_t m = 256;          // similarity representation / graph dimension
    std::size_t attn_hidden = 128;
    double lambda = 9.0;          // attention temperature
    std::size_t steps = 3;        // graph reasoning steps
    double gamma = 0.2;           // ranking margin
    std::size_t regions = 36;     // region proposals per image
    std::size_t d_raw = 2048;     // raw region feature width

    // ablation switches
    AttentionDirection direction = AttentionDirection::TextToImage;
    SimilarityMode similarity = SimilarityMode::Vector;
    Branch branch = Branch::Joint;
    Strategy strategy = Strategy::Joint;
    bool use_global = true;
    bool use_local = true;
    SafBnScope saf_bn_scope = SafBnScope::Batch;
    AttentionNorm attention_norm = AttentionNorm::Words;

    // training
    std::size_t batch_size = 128;
    double learning_rate = 2e-4;
    double lr_decay_factor = 0.1;
    std::size_t lr_decay_epochs = 10;
    std::size_t epochs = 20;
    std::size_t epochs_sgr = 0;  // 0: fall back to epochs
    std::size_t epochs_saf = 0;
    std::size_t val_count = 0;

    // numerics
    double epsilon = 1e-8;
    double bn_momentum = 0.1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    // evaluation
    std::size_t captions_per_image = 5;
    std::size_t fold_count = 1;
    std::vector<int> recall_ks = {1, 5, 10};

    std::uint64_t seed = 42;
    std::size_t threads = 1;

    // Node width seen by the reasoning and filtration stages.
    std::size_t node_dim() const { return similarity == SimilarityMode::Scalar ? 1 : m; }
    std::size_t branch_epochs(Branch b) const {
        if (b == Branch::Sgr && epochs_sgr > 0) return epochs_sgr;
        if (b == Branch::Saf && epochs_saf > 0) return epochs_saf;
        return epochs;
    }
};

// Parses a flat key=value document ('#' starts a comment). Unknown keys and
// out-of-range values are rejected; absent keys keep their defaults.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& required = {});
RunConfig load_config(const std::string& path, const std::vector<std::string>& required = {});
std::string dump_config(const RunConfig& cfg);
// Applies one key=value assignment (used for CLI overrides).
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);
void validate_config(const RunConfig& cfg);

const char* to_string(AttentionDirection);
const char* to_string(SimilarityMode);
const char* to_string(Branch);
const char* to_string(Strategy);
const char* to_string(SafBnScope);
const char* to_string(AttentionNorm);

}  // namespace sgraf

#endif  // SGRAF_CONFIG_HPP_
