#include "sgraf/simrep.hpp"

namespace sgraf {

Var similarity_vector(const Var& x, const Var& y, const Var& w, double eps) {
    if (x.rank() != 1 || y.rank() != 1)
        throw ShapeError("similarity_vector: inputs must be rank 1");
    check_same_shape(x.value(), y.value(), "similarity_vector");
    if (w.rank() != 2 || w.cols() != x.value().size())
        throw ShapeError("similarity_vector: weight is " + shape_to_string(w.shape()) +
                         " but input width is " + std::to_string(x.value().size()));
    Var diff_sq = square(sub(x, y));
    return l2_normalize(matmul(w, diff_sq), 0, eps);
}

Var similarity_rows(const Var& xs, const Var& ys, const Var& w, double eps) {
    if (xs.rank() != 2 || ys.rank() != 2) throw ShapeError("similarity_rows: inputs must be rank 2");
    check_same_shape(xs.value(), ys.value(), "similarity_rows");
    Var diff_sq = square(sub(xs, ys));                 // [n x d]
    Var mapped = matmul(diff_sq, transpose(w));        // [n x m]
    return l2_normalize(mapped, 1, eps);
}

Var global_similarity(const Var& v_global, const Var& t_global, const Var& w_global, double eps) {
    return similarity_vector(v_global, t_global, w_global, eps);
}

Var cosine_rows(const Var& xs, const Var& ys, double eps) {
    check_same_shape(xs.value(), ys.value(), "cosine_rows");
    Var prods = mul(l2_normalize(xs, 1, eps), l2_normalize(ys, 1, eps));
    return reshape(sum_axis1(prods), {xs.rows(), 1});
}

Var cosine_single(const Var& x, const Var& y, double eps) {
    return dot(l2_normalize(x, 0, eps), l2_normalize(y, 0, eps));
}

AttentionMap cross_attend(const Var& regions, const Var& words, double lambda,
                          AttentionDirection direction, AttentionNorm norm_axis, double eps) {
    if (direction == AttentionDirection::ImageToText) {
        // Symmetric construction with the word features attended over.
        return cross_attend(words, regions, lambda, AttentionDirection::TextToImage, norm_axis, eps);
    }
    const Var& sources = regions;  // attended over (rows)
    const Var& anchors = words;    // one output feature per anchor (columns)
    if (sources.rank() != 2 || anchors.rank() != 2 || sources.cols() != anchors.cols())
        throw ShapeError("cross_attend: feature width mismatch");

    AttentionMap map;
    map.cosines = matmul(l2_normalize(sources, 1, eps), transpose(l2_normalize(anchors, 1, eps)));
    // Positive part normalized per source over anchors, as configured.
    int axis = norm_axis == AttentionNorm::Words ? 1 : 0;
    map.normalized = l2_normalize(relu(map.cosines), axis, eps);
    // Softmax across sources for every anchor.
    map.weights = softmax(scale(map.normalized, lambda), 0);
    map.attended = matmul(transpose(map.weights), sources);  // [A x d]
    return map;
}

Var local_similarities(const Var& attended, const Var& anchors, const Var& w_local, double eps) {
    if (attended.rows() != anchors.rows())
        throw ShapeError("local_similarities: row count mismatch");
    return similarity_rows(attended, anchors, w_local, eps);
}

SimilarityNodes build_nodes(std::optional<Var> locals, std::optional<Var> global) {
    SimilarityNodes nodes;
    std::vector<Var> parts;
    if (locals && locals->rows() > 0) {
        if (locals->rank() != 2) throw ShapeError("build_nodes: locals must be [n x m]");
        nodes.local_count = locals->rows();
        parts.push_back(*locals);
    }
    if (global) {
        if (global->rank() != 1) throw ShapeError("build_nodes: global must be rank 1");
        nodes.has_global = true;
        parts.push_back(*global);
    }
    if (parts.empty()) throw ValueError("build_nodes: node set would be empty");
    nodes.stacked = parts.size() == 1 && parts[0].rank() == 2
                        ? parts[0]
                        : concat_rows(parts);
    if (nodes.stacked.rank() != 2) nodes.stacked = reshape(nodes.stacked, {1, nodes.stacked.value().size()});
    return nodes;
}

}  // namespace sgraf
