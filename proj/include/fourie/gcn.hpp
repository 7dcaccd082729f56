#pragma once

#include <cmath>
#include <vector>

#include "fourie/autodiff.hpp"
#include "fourie/errors.hpp"
#include "fourie/rng.hpp"

namespace fourie {

struct GcnLayer {
    ad::Var weight; // d x d
    ad::Var bias;   // 1 x d
};

struct GcnParams {
    std::vector<GcnLayer> layers;

    static GcnParams init(std::size_t n_layers, std::size_t hidden, Rng& rng) {
        GcnParams p;
        double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (std::size_t l = 0; l < n_layers; ++l) {
            Tensor w({hidden, hidden});
            for (auto& v : w.data()) v = rng.uniform(-bound, bound);
            p.layers.push_back({ad::Var::leaf(std::move(w), true),
                                ad::Var::leaf(Tensor({1, hidden}), true)});
        }
        return p;
    }
};

// Degree-normalized graph convolution:
//   v_i^l = ReLU((sum_j A_ij W^l v_j^{l-1} + b^l) / sum_j A_ij)
// The adjacency may be a soft matrix; gradients flow through it as well.
inline ad::Var gcn(const ad::Var& adjacency, const ad::Var& inputs, const GcnParams& params) {
    const Tensor& A = adjacency.value();
    if (A.rank() != 2 || A.rows() != A.cols()) {
        throw ShapeError("gcn: adjacency " + A.shape_str() + " is not square");
    }
    std::size_t n = A.rows();
    if (inputs.value().rows() != n) {
        throw ShapeError("gcn: " + std::to_string(inputs.value().rows()) + " input rows for " +
                         std::to_string(n) + " nodes");
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += A.at(i, j);
        if (s <= 0.0) {
            throw ContractError("gcn: row " + std::to_string(i) +
                                " of the adjacency sums to zero");
        }
    }

    std::size_t d = inputs.value().cols();
    ad::Var degrees =
        ad::matmul(ad::matmul(adjacency, ad::ones_col(n)), ad::ones_row(d)); // n x d
    ad::Var h = inputs;
    for (const GcnLayer& layer : params.layers) {
        ad::Var mixed = ad::matmul(ad::matmul(adjacency, h), ad::transpose(layer.weight));
        ad::Var biased = ad::add(mixed, ad::matmul(ad::ones_col(n), layer.bias));
        h = ad::relu(ad::div(biased, degrees));
    }
    return h;
}

} // namespace fourie
