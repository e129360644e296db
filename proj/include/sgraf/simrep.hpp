#ifndef SGRAF_SIMREP_HPP_
#define SGRAF_SIMREP_HPP_

#include <optional>

#include "sgraf/autodiff.hpp"
#include "sgraf/config.hpp"

namespace sgraf {

// s(x, y; W) = W|x - y|^2 / ||W|x - y|^2||_2 with an epsilon-guarded norm;
// the zero difference maps to the zero vector.
Var similarity_vector(const Var& x, const Var& y, const Var& w, double eps);
// Row-wise variant: [n x d], [n x d], W [m x d] -> [n x m].
Var similarity_rows(const Var& xs, const Var& ys, const Var& w, double eps);
Var global_similarity(const Var& v_global, const Var& t_global, const Var& w_global, double eps);
// Scalar ablation: plain cosines. Rows in, [n x 1] out / rank-0 in the single case.
Var cosine_rows(const Var& xs, const Var& ys, double eps);
Var cosine_single(const Var& x, const Var& y, double eps);

// Cross attention between region and word features. Fields are expressed in
// the frame of the call: `sources` are attended over, `anchors` index the
// output rows. Text-to-image: sources = regions, anchors = words. The
// image-to-text direction is the same construction with the roles swapped.
struct AttentionMap {
    Var cosines;     // [S x A]
    Var normalized;  // positive part, l2-normalized per configured axis
    Var weights;     // [S x A], every column a distribution over sources
    Var attended;    // [A x d]
};

AttentionMap cross_attend(const Var& regions, const Var& words, double lambda,
                          AttentionDirection direction, AttentionNorm norm_axis, double eps);

Var local_similarities(const Var& attended, const Var& anchors, const Var& w_local, double eps);

// Ordered node set fed to the reasoning and filtration stages: local
// alignments first, the global alignment last.
struct SimilarityNodes {
    Var stacked;  // [count x m]
    std::size_t local_count = 0;
    bool has_global = false;
    std::size_t count() const { return local_count + (has_global ? 1 : 0); }
};

SimilarityNodes build_nodes(std::optional<Var> locals, std::optional<Var> global);

}  // namespace sgraf

#endif  // SGRAF_SIMREP_HPP_
