#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fourie/autodiff.hpp"
#include "fourie/errors.hpp"
#include "fourie/rng.hpp"

namespace fourie {

enum class Tag : std::uint8_t { B = 0, I = 1, O = 2 };
constexpr std::size_t kNumTags = 3;

// Structural BIO mask: large negative score instead of -inf keeps every
// value finite for the gradient checks.
constexpr double kTagMask = -1e4;

struct Span {
    std::size_t start = 0; // inclusive, 0-based token indices
    std::size_t end = 0;
    friend bool operator==(const Span&, const Span&) = default;
    friend auto operator<=>(const Span&, const Span&) = default;
};

inline bool bio_valid(const std::vector<Tag>& tags) {
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] == Tag::I && (i == 0 || tags[i - 1] == Tag::O)) return false;
    }
    return true;
}

// Maximal B(I)* runs as inclusive spans, sorted by start.
inline std::vector<Span> tags_to_spans(const std::vector<Tag>& tags) {
    if (!bio_valid(tags)) throw ContractError("tags_to_spans: tag sequence violates BIO");
    std::vector<Span> spans;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] == Tag::B) {
            std::size_t j = i;
            while (j + 1 < tags.size() && tags[j + 1] == Tag::I) ++j;
            spans.push_back({i, j});
            i = j;
        }
    }
    return spans;
}

// Inverse of tags_to_spans; used to derive gold tags from gold spans.
// Spans must be sorted, in-range and non-overlapping.
inline std::vector<Tag> spans_to_tags(const std::vector<Span>& spans, std::size_t n) {
    std::vector<Tag> tags(n, Tag::O);
    std::size_t prev_end = 0;
    bool first = true;
    for (const Span& s : spans) {
        if (s.start > s.end || s.end >= n || (!first && s.start <= prev_end)) {
            throw DataError("spans_to_tags: spans overlap or fall out of range");
        }
        tags[s.start] = Tag::B;
        for (std::size_t i = s.start + 1; i <= s.end; ++i) tags[i] = Tag::I;
        prev_end = s.end;
        first = false;
    }
    return tags;
}

// One BIO tagging head: emission projection plus transition/start/end scores.
struct CrfParams {
    ad::Var proj;  // d x 3
    ad::Var bias;  // 1 x 3
    ad::Var trans; // 3 x 3
    ad::Var start; // 1 x 3
    ad::Var end;   // 1 x 3

    static CrfParams init(std::size_t hidden, Rng& rng) {
        CrfParams p;
        Tensor w({hidden, kNumTags});
        double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (auto& v : w.data()) v = rng.uniform(-bound, bound);
        p.proj = ad::Var::leaf(std::move(w), true);
        p.bias = ad::Var::leaf(Tensor({1, kNumTags}), true);
        p.trans = ad::Var::leaf(Tensor({kNumTags, kNumTags}), true);
        p.start = ad::Var::leaf(Tensor({1, kNumTags}), true);
        p.end = ad::Var::leaf(Tensor({1, kNumTags}), true);
        return p;
    }
};

namespace crf_detail {

inline Tensor trans_mask() {
    Tensor m({kNumTags, kNumTags});
    m.at(static_cast<std::size_t>(Tag::O), static_cast<std::size_t>(Tag::I)) = kTagMask;
    return m;
}

inline Tensor start_mask() {
    Tensor m({1, kNumTags});
    m[static_cast<std::size_t>(Tag::I)] = kTagMask;
    return m;
}

} // namespace crf_detail

// n x 3 emission scores.
inline ad::Var crf_emissions(const CrfParams& p, const ad::Var& enc) {
    std::size_t n = enc.value().rows();
    return ad::add(ad::matmul(enc, p.proj), ad::matmul(ad::ones_col(n), p.bias));
}

// Masked transition/start scores (BIO validity enforced structurally).
inline ad::Var crf_masked_trans(const CrfParams& p) {
    return ad::add(p.trans, ad::cst(crf_detail::trans_mask()));
}
inline ad::Var crf_masked_start(const CrfParams& p) {
    return ad::add(p.start, ad::cst(crf_detail::start_mask()));
}

// Negative log-likelihood of the gold tag sequence: log Z - score(gold).
inline ad::Var crf_nll(const CrfParams& p, const ad::Var& enc, const std::vector<Tag>& gold) {
    std::size_t n = enc.value().rows();
    if (gold.size() != n) {
        throw ContractError("crf_nll: " + std::to_string(gold.size()) + " tags for " +
                            std::to_string(n) + " tokens");
    }
    if (!bio_valid(gold)) throw ContractError("crf_nll: gold tags violate BIO");

    ad::Var em = crf_emissions(p, enc);
    ad::Var trans = crf_masked_trans(p);
    ad::Var start = crf_masked_start(p);

    // gold path score
    auto tag = [&](std::size_t t) { return static_cast<std::size_t>(gold[t]); };
    ad::Var score = ad::add(ad::pick(start, 0, tag(0)), ad::pick(em, 0, tag(0)));
    for (std::size_t t = 1; t < n; ++t) {
        score = ad::add(score, ad::add(ad::pick(trans, tag(t - 1), tag(t)),
                                       ad::pick(em, t, tag(t))));
    }
    score = ad::add(score, ad::pick(p.end, 0, tag(n - 1)));

    // forward recursion for log Z; alpha is a 1x3 row
    ad::Var alpha = ad::add(start, ad::select_rows(em, {0}));
    for (std::size_t t = 1; t < n; ++t) {
        // M_ij = alpha_i + trans_ij, then column-wise logsumexp
        ad::Var m = ad::add(ad::matmul(ad::transpose(alpha), ad::ones_row(kNumTags)), trans);
        Tensor cmax({1, kNumTags});
        for (std::size_t j = 0; j < kNumTags; ++j) {
            double mx = m.value().at(0, j);
            for (std::size_t i = 1; i < kNumTags; ++i) mx = std::max(mx, m.value().at(i, j));
            cmax[j] = mx;
        }
        ad::Var shifted =
            ad::sub(m, ad::matmul(ad::ones_col(kNumTags), ad::cst(cmax)));
        ad::Var lse = ad::add(ad::vlog(ad::matmul(ad::ones_row(kNumTags), ad::vexp(shifted))),
                              ad::cst(cmax));
        alpha = ad::add(lse, ad::select_rows(em, {t}));
    }
    ad::Var log_z = ad::logsumexp_row(ad::add(alpha, p.end));
    return ad::sub(log_z, score);
}

// Max-scoring BIO-valid tag sequence; DP ties resolve to the lower tag index.
// Pure inference over plain values, no graph recorded.
inline std::vector<Tag> crf_viterbi(const CrfParams& p, const ad::Var& enc) {
    std::size_t n = enc.value().rows();
    if (n == 0) throw ContractError("crf_viterbi: empty input");

    Tensor em = crf_emissions(p, ad::cst(enc.value())).value();
    Tensor trans = crf_masked_trans(p).value();
    Tensor start = crf_masked_start(p).value();
    const Tensor& end = p.end.value();

    std::array<double, kNumTags> score{};
    std::vector<std::array<std::uint8_t, kNumTags>> back(n);
    for (std::size_t j = 0; j < kNumTags; ++j) score[j] = start[j] + em.at(0, j);
    for (std::size_t t = 1; t < n; ++t) {
        std::array<double, kNumTags> next{};
        for (std::size_t j = 0; j < kNumTags; ++j) {
            double best = score[0] + trans.at(0, j);
            std::uint8_t arg = 0;
            for (std::size_t i = 1; i < kNumTags; ++i) {
                double s = score[i] + trans.at(i, j);
                if (s > best) {
                    best = s;
                    arg = static_cast<std::uint8_t>(i);
                }
            }
            next[j] = best + em.at(t, j);
            back[t][j] = arg;
        }
        score = next;
    }

    std::size_t last = 0;
    double best = score[0] + end[0];
    for (std::size_t j = 1; j < kNumTags; ++j) {
        double s = score[j] + end[j];
        if (s > best) {
            best = s;
            last = j;
        }
    }

    std::vector<Tag> tags(n);
    tags[n - 1] = static_cast<Tag>(last);
    for (std::size_t t = n - 1; t > 0; --t) {
        last = back[t][last];
        tags[t - 1] = static_cast<Tag>(last);
    }
    return tags;
}

} // namespace fourie
