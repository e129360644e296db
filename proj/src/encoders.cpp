#include "sgraf/encoders.hpp"

#include <cmath>

namespace sgraf {

Tensor uniform_init(const Shape& shape, std::size_t fan_in, Rng& rng) {
    Tensor t(shape);
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : t.data()) x = rng.uniform(-bound, bound);
    return t;
}

GruCell init_gru_cell(ParamSet& params, const std::string& prefix, std::size_t input_dim,
                      std::size_t hidden_dim, Rng& rng) {
    GruCell c;
    c.w_update = params.add(prefix + ".w_update", uniform_init({hidden_dim, input_dim}, input_dim, rng));
    c.w_reset = params.add(prefix + ".w_reset", uniform_init({hidden_dim, input_dim}, input_dim, rng));
    c.w_cand = params.add(prefix + ".w_cand", uniform_init({hidden_dim, input_dim}, input_dim, rng));
    c.u_update = params.add(prefix + ".u_update", uniform_init({hidden_dim, hidden_dim}, hidden_dim, rng));
    c.u_reset = params.add(prefix + ".u_reset", uniform_init({hidden_dim, hidden_dim}, hidden_dim, rng));
    c.u_cand = params.add(prefix + ".u_cand", uniform_init({hidden_dim, hidden_dim}, hidden_dim, rng));
    c.b_update = params.add(prefix + ".b_update", Tensor::zeros({hidden_dim}));
    c.b_reset = params.add(prefix + ".b_reset", Tensor::zeros({hidden_dim}));
    c.b_cand = params.add(prefix + ".b_cand", Tensor::zeros({hidden_dim}));
    return c;
}

AttentionPoolParams init_pool_params(ParamSet& params, const std::string& prefix, std::size_t d,
                                     std::size_t hidden, Rng& rng) {
    AttentionPoolParams p;
    p.input_proj = params.add(prefix + ".input_proj", uniform_init({hidden, d}, d, rng));
    p.query_proj = params.add(prefix + ".query_proj", uniform_init({hidden, d}, d, rng));
    p.score = params.add(prefix + ".score", uniform_init({hidden}, hidden, rng));
    return p;
}

EncoderParams init_encoder_params(ParamSet& params, const EncoderDims& dims, Rng& rng,
                                  const std::string& prefix) {
    EncoderParams e;
    e.region_weight =
        params.add(prefix + ".region_weight", uniform_init({dims.d, dims.d_raw}, dims.d_raw, rng));
    e.region_bias = params.add(prefix + ".region_bias", Tensor::zeros({dims.d}));
    Tensor table({dims.vocab, dims.embed_dim});
    for (double& x : table.data()) x = rng.uniform(-0.1, 0.1);
    e.embedding = params.add(prefix + ".embedding", std::move(table));
    e.gru_fwd = init_gru_cell(params, prefix + ".gru_fwd", dims.embed_dim, dims.d, rng);
    e.gru_bwd = init_gru_cell(params, prefix + ".gru_bwd", dims.embed_dim, dims.d, rng);
    e.visual_pool = init_pool_params(params, prefix + ".visual_pool", dims.d, dims.attn_hidden, rng);
    e.textual_pool = init_pool_params(params, prefix + ".textual_pool", dims.d, dims.attn_hidden, rng);
    return e;
}

Var project_regions(const Var& raw, const Var& weight, const Var& bias) {
    if (raw.rank() != 2 || raw.cols() != weight.cols())
        throw ShapeError("project_regions: raw is " + shape_to_string(raw.shape()) +
                         " but weight is " + shape_to_string(weight.shape()));
    return add_rowwise(matmul(raw, transpose(weight)), bias);
}

PoolResult attention_pool_detailed(const Var& locals, const AttentionPoolParams& p) {
    if (locals.rank() != 2 || locals.rows() < 1)
        throw ShapeError("attention_pool: need [n x d] with n >= 1");
    Var query = mean_axis0(locals);                                   // [d]
    Var hidden = matmul(locals, transpose(p.input_proj));             // [n x h]
    Var shifted = add_rowwise(hidden, matmul(p.query_proj, query));   // + Wb q
    Var scores = matmul(tanh(shifted), p.score);                      // [n]
    Var weights = softmax(scores, 0);
    Var pooled = matmul(weights, locals);                             // [d]
    return {pooled, weights};
}

Var attention_pool(const Var& locals, const AttentionPoolParams& p) {
    return attention_pool_detailed(locals, p).pooled;
}

Var embed_tokens(const Var& table, const std::vector<int>& ids, std::optional<int> unk_row) {
    if (ids.empty()) throw ValueError("embed_tokens: empty token sequence");
    return embedding_lookup(table, ids, unk_row);
}

Var gru_sequence(const Var& inputs, const GruCell& cell, bool reverse) {
    if (inputs.rank() != 2 || inputs.rows() < 1)
        throw ShapeError("gru_sequence: need [L x input], got " + shape_to_string(inputs.shape()));
    std::size_t len = inputs.rows();
    std::size_t hidden_dim = cell.u_update.rows();
    Var h = Var::constant(Tensor::zeros({hidden_dim}));
    std::vector<Var> states(len);
    for (std::size_t step = 0; step < len; ++step) {
        std::size_t t = reverse ? len - 1 - step : step;
        Var x = row(inputs, t);
        Var z = sigmoid(matmul(cell.w_update, x) + matmul(cell.u_update, h) + cell.b_update);
        Var r = sigmoid(matmul(cell.w_reset, x) + matmul(cell.u_reset, h) + cell.b_reset);
        Var c = tanh(matmul(cell.w_cand, x) + matmul(cell.u_cand, mul(r, h)) + cell.b_cand);
        Var one_minus_z = add_const(neg(z), 1.0);
        h = mul(z, h) + mul(one_minus_z, c);
        states[t] = h;
    }
    return concat_rows(states);
}

Var bigru_encode(const Var& embeddings, const GruCell& fwd, const GruCell& bwd) {
    Var forward = gru_sequence(embeddings, fwd, false);
    Var backward_states = gru_sequence(embeddings, bwd, true);
    return scale(forward + backward_states, 0.5);
}

}  // namespace sgraf
