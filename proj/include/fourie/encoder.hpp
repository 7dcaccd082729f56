#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fourie/autodiff.hpp"
#include "fourie/errors.hpp"
#include "fourie/rng.hpp"

namespace fourie {

// Token -> dense id map. Id 0 is reserved for the unknown token.
class Vocabulary {
public:
    static constexpr const char* kUnknown = "<unk>";

    Vocabulary() { add(kUnknown); }

    // Build from token streams in first-occurrence order.
    static Vocabulary build(const std::vector<std::vector<std::string>>& sentences) {
        Vocabulary v;
        for (const auto& toks : sentences)
            for (const auto& t : toks) v.add(t);
        return v;
    }

    static Vocabulary from_tokens(const std::vector<std::string>& id_ordered) {
        if (id_ordered.empty() || id_ordered[0] != kUnknown) {
            throw DataError("vocabulary: id 0 must be " + std::string(kUnknown));
        }
        Vocabulary v;
        for (std::size_t i = 1; i < id_ordered.size(); ++i) v.add(id_ordered[i]);
        return v;
    }

    std::size_t add(const std::string& tok) {
        auto it = ids_.find(tok);
        if (it != ids_.end()) return it->second;
        std::size_t id = tokens_.size();
        ids_.emplace(tok, id);
        tokens_.push_back(tok);
        return id;
    }

    std::size_t id(const std::string& tok) const {
        auto it = ids_.find(tok);
        return it == ids_.end() ? unknown_id() : it->second;
    }

    std::size_t unknown_id() const { return 0; }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::unordered_map<std::string, std::size_t> ids_;
    std::vector<std::string> tokens_;
};

// Embedding-lookup encoder, optionally mixing a symmetric context window of
// learnable position weights. Window 0 is a plain lookup.
struct EncoderParams {
    ad::Var embeddings;     // vocab x d
    ad::Var window_weights; // 1 x (2w+1), defined only when window > 0
    int window = 0;

    static EncoderParams init(std::size_t vocab, std::size_t hidden, int window, Rng& rng) {
        EncoderParams p;
        Tensor emb({vocab, hidden});
        for (auto& v : emb.data()) v = rng.uniform(-0.1, 0.1);
        p.embeddings = ad::Var::leaf(std::move(emb), true);
        p.window = window;
        if (window > 0) {
            std::size_t k = 2 * static_cast<std::size_t>(window) + 1;
            p.window_weights =
                ad::Var::leaf(Tensor::full(1, k, 1.0 / static_cast<double>(k)), true);
        }
        return p;
    }
};

// One row per token. n x d.
inline ad::Var encode(const EncoderParams& p, const Vocabulary& vocab,
                      const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw ContractError("encode: empty sentence");
    std::vector<std::size_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(vocab.id(t));
    ad::Var rows = ad::select_rows(p.embeddings, ids);
    if (p.window <= 0) return rows;

    // x_i = sum_k w_k * emb[token_{i+k}], out-of-range neighbours contribute 0
    std::size_t n = tokens.size();
    std::size_t k = 2 * static_cast<std::size_t>(p.window) + 1;
    std::vector<ad::Var> out_rows;
    out_rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ad::Var acc;
        for (std::size_t w = 0; w < k; ++w) {
            long j = static_cast<long>(i) + static_cast<long>(w) - p.window;
            if (j < 0 || j >= static_cast<long>(n)) continue;
            ad::Var term = ad::matmul(ad::pick(p.window_weights, 0, w),
                                      ad::select_rows(rows, {static_cast<std::size_t>(j)}));
            acc = acc.defined() ? ad::add(acc, term) : term;
        }
        out_rows.push_back(acc);
    }
    return ad::stack_rows(out_rows);
}

// Mean of encoder rows start..end (inclusive, 0-based).
inline ad::Var span_rep(const ad::Var& enc, std::size_t start, std::size_t end) {
    std::size_t n = enc.value().rows();
    if (start > end || end >= n) {
        throw ContractError("span_rep: span (" + std::to_string(start) + "," +
                            std::to_string(end) + ") out of range for " + std::to_string(n) +
                            " tokens");
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i <= end; ++i) idx.push_back(i);
    double inv = 1.0 / static_cast<double>(idx.size());
    return ad::matmul(ad::cst(Tensor::full(1, idx.size(), inv)), ad::select_rows(enc, idx));
}

} // namespace fourie
