#ifndef SGRAF_ENCODERS_HPP_
#define SGRAF_ENCODERS_HPP_

#include <optional>
#include <vector>

#include "sgraf/autodiff.hpp"
#include "sgraf/optim.hpp"
#include "sgraf/rng.hpp"

namespace sgraf {

// Gate weights of one GRU direction. Recurrence (zero initial state):
//   z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)
//   r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)
//   c_t = tanh(Wc x_t + Uc (r_t * h_{t-1}) + bc)
//   h_t = z_t * h_{t-1} + (1 - z_t) * c_t
struct GruCell {
    Var w_update, w_reset, w_cand;  // [hidden x input]
    Var u_update, u_reset, u_cand;  // [hidden x hidden]
    Var b_update, b_reset, b_cand;  // [hidden]
};

// Additive self-attention pool: the mean row is the query,
// score_i = w . tanh(Wa x_i + Wb q), weights = softmax(scores).
struct AttentionPoolParams {
    Var input_proj;  // Wa [hidden x d]
    Var query_proj;  // Wb [hidden x d]
    Var score;       // w  [hidden]
};

struct EncoderParams {
    Var region_weight;  // [d x d_raw]
    Var region_bias;    // [d]
    Var embedding;      // [vocab x embed_dim]
    GruCell gru_fwd, gru_bwd;
    AttentionPoolParams visual_pool, textual_pool;
};

struct EncoderDims {
    std::size_t d = 32;
    std::size_t d_raw = 64;
    std::size_t embed_dim = 16;
    std::size_t attn_hidden = 16;
    std::size_t vocab = 32;
};

// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] weights; embedding rows uniform
// [-0.1, 0.1]. Registration order is fixed for reproducibility.
EncoderParams init_encoder_params(ParamSet& params, const EncoderDims& dims, Rng& rng,
                                  const std::string& prefix = "enc");

GruCell init_gru_cell(ParamSet& params, const std::string& prefix, std::size_t input_dim,
                      std::size_t hidden_dim, Rng& rng);
AttentionPoolParams init_pool_params(ParamSet& params, const std::string& prefix, std::size_t d,
                                     std::size_t hidden, Rng& rng);

Tensor uniform_init(const Shape& shape, std::size_t fan_in, Rng& rng);

// raw [K x d_raw] -> [K x d], affine per row
Var project_regions(const Var& raw, const Var& weight, const Var& bias);

struct PoolResult {
    Var pooled;   // [d]
    Var weights;  // [n], softmax over rows
};
PoolResult attention_pool_detailed(const Var& locals, const AttentionPoolParams& p);
Var attention_pool(const Var& locals, const AttentionPoolParams& p);

// Row lookup with optional unknown-token fallback.
Var embed_tokens(const Var& table, const std::vector<int>& ids, std::optional<int> unk_row = 0);

// One GRU direction over [L x input] -> [L x hidden].
Var gru_sequence(const Var& inputs, const GruCell& cell, bool reverse);
// Average of the forward and backward hidden state at each step.
Var bigru_encode(const Var& embeddings, const GruCell& fwd, const GruCell& bwd);

}  // namespace sgraf

#endif  // SGRAF_ENCODERS_HPP_
