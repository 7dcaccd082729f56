#pragma once

#include <set>
#include <utility>
#include <vector>

#include "fourie/autodiff.hpp"
#include "fourie/errors.hpp"
#include "fourie/gcn.hpp"
#include "fourie/instances.hpp"
#include "fourie/rng.hpp"
#include "fourie/types.hpp"

namespace fourie {

// Gumbel noise supply for the relaxed type indices. Record/Replay make the
// noise reproducible for finite-difference checks; training uses Fresh
// (resampled every step).
class GumbelSource {
public:
    enum class Mode { Fresh, Record, Replay };

    explicit GumbelSource(Rng& rng, Mode mode = Mode::Fresh) : rng_(&rng), mode_(mode) {}

    std::vector<double> draw(std::size_t k) {
        if (mode_ == Mode::Replay) {
            if (cursor_ >= tape_.size() || tape_[cursor_].size() != k) {
                throw ContractError("gumbel replay: tape exhausted or shape drifted");
            }
            return tape_[cursor_++];
        }
        std::vector<double> g(k);
        for (auto& v : g) v = rng_->gumbel();
        if (mode_ == Mode::Record) tape_.push_back(g);
        return g;
    }

    void replay_from_start() {
        mode_ = Mode::Replay;
        cursor_ = 0;
    }

private:
    Rng* rng_;
    Mode mode_;
    std::vector<std::vector<double>> tape_;
    std::size_t cursor_ = 0;
};

// Hard binary dependency adjacency over the union type set, built from a
// per-node type assignment (local ids). Shared by the gold graph and the
// hard predicted graph:
//   - relation type <-> entity type of each participant, when rel != None
//   - role <-> event type of the trigger and entity type of the entity,
//     when role != None
// plus unit self-loops; symmetric; duplicates collapse.
inline Tensor dependency_adjacency(const InstanceSet& set, const TypeInventory& inv,
                                   const std::vector<int>& local_types) {
    if (local_types.size() != set.size()) {
        throw ContractError("dependency_adjacency: one type per instance required");
    }
    std::size_t n_t = inv.n_total();
    Tensor a = Tensor::eye(n_t);
    auto connect = [&](std::size_t g1, std::size_t g2) {
        a.at(g1, g2) = 1.0;
        a.at(g2, g1) = 1.0;
    };
    for (std::size_t k = 0; k < set.size(); ++k) {
        const Instance& inst = set.items[k];
        int ty = local_types[k];
        if (ty < 0) throw ContractError("dependency_adjacency: missing type assignment");
        if (inst.task == Task::Rel) {
            if (static_cast<std::size_t>(ty) == inv.none_local(Task::Rel)) continue;
            std::size_t g_rel = inv.global_index(Task::Rel, static_cast<std::size_t>(ty));
            std::size_t g_ei = inv.global_index(
                Task::Ent, static_cast<std::size_t>(local_types[set.ent_node(inst.a)]));
            std::size_t g_ej = inv.global_index(
                Task::Ent, static_cast<std::size_t>(local_types[set.ent_node(inst.b)]));
            connect(g_rel, g_ei);
            connect(g_rel, g_ej);
        } else if (inst.task == Task::Arg) {
            if (static_cast<std::size_t>(ty) == inv.none_local(Task::Arg)) continue;
            std::size_t g_role = inv.global_index(Task::Arg, static_cast<std::size_t>(ty));
            std::size_t g_evt = inv.global_index(
                Task::Trg, static_cast<std::size_t>(local_types[set.trg_node(inst.a)]));
            std::size_t g_ent = inv.global_index(
                Task::Ent, static_cast<std::size_t>(local_types[set.ent_node(inst.b)]));
            connect(g_role, g_evt);
            connect(g_role, g_ent);
        }
    }
    return a;
}

inline std::vector<int> gold_assignment(const InstanceSet& set) {
    std::vector<int> types;
    types.reserve(set.size());
    for (const Instance& inst : set.items) {
        if (inst.gold_local < 0) throw ContractError("gold graph: instance lacks gold type");
        types.push_back(inst.gold_local);
    }
    return types;
}

inline std::vector<int> predicted_assignment(const InstanceSet& set) {
    std::vector<int> types;
    types.reserve(set.size());
    for (const Instance& inst : set.items) {
        if (inst.pred_local < 0) throw ContractError("pred graph: instance not classified");
        types.push_back(inst.pred_local);
    }
    return types;
}

inline Tensor build_gold_adjacency(const InstanceSet& set, const TypeInventory& inv) {
    return dependency_adjacency(set, inv, gold_assignment(set));
}

inline Tensor build_pred_hard_adjacency(const InstanceSet& set, const TypeInventory& inv) {
    return dependency_adjacency(set, inv, predicted_assignment(set));
}

// Gumbel-Softmax relaxation of one predicted type index.
struct RelaxedIndex {
    ad::Var pi;              // 1 x K predicted distribution
    std::vector<double> noise;
    double tau = 0.1;
    ad::Var soft_onehot;     // 1 x K
    std::vector<std::size_t> c; // global indices of the partition's types
    ad::Var index;           // 1 x 1 soft index, h . c^T
};

inline ad::Var soft_index(const ad::Var& soft_onehot, const std::vector<std::size_t>& c) {
    if (soft_onehot.value().cols() != c.size()) {
        throw ShapeError("soft_index: one-hot width " +
                         std::to_string(soft_onehot.value().cols()) + " vs index vector " +
                         std::to_string(c.size()));
    }
    Tensor col({c.size(), 1});
    for (std::size_t i = 0; i < c.size(); ++i) col[i] = static_cast<double>(c[i]);
    return ad::matmul(soft_onehot, ad::cst(col));
}

inline RelaxedIndex sample_relaxed_index(const ad::Var& pi, std::vector<std::size_t> c,
                                         double tau, std::vector<double> noise) {
    std::size_t k = pi.value().cols();
    if (noise.size() != k || c.size() != k) {
        throw ContractError("relaxed index: distribution, noise and index vector sizes differ");
    }
    RelaxedIndex r;
    r.pi = pi;
    r.noise = std::move(noise);
    r.tau = tau;
    r.c = std::move(c);
    ad::Var logits = ad::vlog(ad::clamp_min(pi, 1e-12));
    logits = ad::add(logits, ad::cst(Tensor::row(std::vector<double>(r.noise))));
    r.soft_onehot = ad::softmax_rows(ad::scale(logits, 1.0 / tau));
    r.index = soft_index(r.soft_onehot, r.c);
    return r;
}

// Sum over edge index pairs of exp(-beta (B - i*n_t - j)^2) where
// b_pq = p*n_t + q. No self-loop diagonal; callers add that afterwards.
inline ad::Var soft_adjacency_sum(const std::vector<std::pair<ad::Var, ad::Var>>& edges,
                                  std::size_t n_t, double beta) {
    Tensor b({n_t, n_t});
    for (std::size_t p = 0; p < n_t; ++p)
        for (std::size_t q = 0; q < n_t; ++q) b.at(p, q) = static_cast<double>(p * n_t + q);
    ad::Var acc = ad::cst(Tensor({n_t, n_t}));
    for (const auto& [i, j] : edges) {
        auto broadcast = [&](const ad::Var& s) {
            return ad::matmul(ad::matmul(ad::ones_col(n_t), s), ad::ones_row(n_t));
        };
        ad::Var d = ad::sub(ad::sub(ad::cst(b), broadcast(ad::scale(i, static_cast<double>(n_t)))),
                            broadcast(j));
        acc = ad::add(acc, ad::vexp(ad::scale(ad::mul(d, d), -beta)));
    }
    return acc;
}

// Differentiable predicted dependency adjacency. The None gate stays
// discrete (hard argmax); edge endpoint positions use the relaxed indices,
// so gradients reach the instance-representation parameters. Edges are
// deduplicated by their hard endpoint pair, inserted in both orientations,
// and a hard unit diagonal is added at the end.
inline ad::Var build_pred_soft_adjacency(const InstanceSet& set, const TypeInventory& inv,
                                         double beta, double tau, GumbelSource& noise) {
    std::vector<RelaxedIndex> relaxed(set.size());
    for (std::size_t k = 0; k < set.size(); ++k) {
        const Instance& inst = set.items[k];
        if (inst.pred_local < 0) throw ContractError("pred graph: instance not classified");
        relaxed[k] = sample_relaxed_index(inst.dist, inv.global_indices(inst.task), tau,
                                          noise.draw(inst.dist.value().cols()));
    }

    std::size_t n_t = inv.n_total();
    std::vector<std::pair<ad::Var, ad::Var>> edges;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    auto push_edge = [&](std::size_t node_x, std::size_t node_y, std::size_t hard_x,
                         std::size_t hard_y) {
        std::size_t lo = std::min(hard_x, hard_y), hi = std::max(hard_x, hard_y);
        if (!seen.insert({lo, hi}).second) return;
        edges.emplace_back(relaxed[node_x].index, relaxed[node_y].index);
        edges.emplace_back(relaxed[node_y].index, relaxed[node_x].index);
    };

    for (std::size_t k = 0; k < set.size(); ++k) {
        const Instance& inst = set.items[k];
        if (inst.task == Task::Rel) {
            if (static_cast<std::size_t>(inst.pred_local) == inv.none_local(Task::Rel)) continue;
            std::size_t hard_rel =
                inv.global_index(Task::Rel, static_cast<std::size_t>(inst.pred_local));
            std::size_t ei = set.ent_node(inst.a), ej = set.ent_node(inst.b);
            std::size_t hard_ei = inv.global_index(
                Task::Ent, static_cast<std::size_t>(set.items[ei].pred_local));
            std::size_t hard_ej = inv.global_index(
                Task::Ent, static_cast<std::size_t>(set.items[ej].pred_local));
            push_edge(k, ei, hard_rel, hard_ei);
            push_edge(k, ej, hard_rel, hard_ej);
        } else if (inst.task == Task::Arg) {
            if (static_cast<std::size_t>(inst.pred_local) == inv.none_local(Task::Arg)) continue;
            std::size_t hard_role =
                inv.global_index(Task::Arg, static_cast<std::size_t>(inst.pred_local));
            std::size_t ti = set.trg_node(inst.a), ej = set.ent_node(inst.b);
            std::size_t hard_evt = inv.global_index(
                Task::Trg, static_cast<std::size_t>(set.items[ti].pred_local));
            std::size_t hard_ent = inv.global_index(
                Task::Ent, static_cast<std::size_t>(set.items[ej].pred_local));
            push_edge(k, ti, hard_role, hard_evt);
            push_edge(k, ej, hard_role, hard_ent);
        }
    }

    return ad::add(soft_adjacency_sum(edges, n_t, beta), ad::cst(Tensor::eye(n_t)));
}

// Same edge set as build_pred_soft_adjacency but with the hard integer
// indices as constants; the smooth route for diagnostics and hard-limit
// comparisons against dependency_adjacency.
inline ad::Var build_pred_eq1_hard_adjacency(const InstanceSet& set, const TypeInventory& inv,
                                             double beta) {
    std::size_t n_t = inv.n_total();
    std::vector<std::pair<ad::Var, ad::Var>> edges;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    auto as_var = [](std::size_t g) { return ad::cst(Tensor::scalar(static_cast<double>(g))); };
    auto push_edge = [&](std::size_t hard_x, std::size_t hard_y) {
        std::size_t lo = std::min(hard_x, hard_y), hi = std::max(hard_x, hard_y);
        if (!seen.insert({lo, hi}).second) return;
        edges.emplace_back(as_var(hard_x), as_var(hard_y));
        edges.emplace_back(as_var(hard_y), as_var(hard_x));
    };
    for (std::size_t k = 0; k < set.size(); ++k) {
        const Instance& inst = set.items[k];
        if (inst.pred_local < 0) throw ContractError("pred graph: instance not classified");
        if (inst.task == Task::Rel) {
            if (static_cast<std::size_t>(inst.pred_local) == inv.none_local(Task::Rel)) continue;
            std::size_t hard_rel =
                inv.global_index(Task::Rel, static_cast<std::size_t>(inst.pred_local));
            push_edge(hard_rel, inv.global_index(Task::Ent, static_cast<std::size_t>(
                                                                set.items[set.ent_node(inst.a)]
                                                                    .pred_local)));
            push_edge(hard_rel, inv.global_index(Task::Ent, static_cast<std::size_t>(
                                                                set.items[set.ent_node(inst.b)]
                                                                    .pred_local)));
        } else if (inst.task == Task::Arg) {
            if (static_cast<std::size_t>(inst.pred_local) == inv.none_local(Task::Arg)) continue;
            std::size_t hard_role =
                inv.global_index(Task::Arg, static_cast<std::size_t>(inst.pred_local));
            push_edge(hard_role, inv.global_index(Task::Trg, static_cast<std::size_t>(
                                                                 set.items[set.trg_node(inst.a)]
                                                                     .pred_local)));
            push_edge(hard_role, inv.global_index(Task::Ent, static_cast<std::size_t>(
                                                                 set.items[set.ent_node(inst.b)]
                                                                     .pred_local)));
        }
    }
    return ad::add(soft_adjacency_sum(edges, n_t, beta), ad::cst(Tensor::eye(n_t)));
}

// Squared L2 difference between the GCN outputs on the gold and predicted
// dependency graphs, with one shared parameter set and the type embeddings
// as inputs.
inline ad::Var dep_loss(const Tensor& gold_adjacency, const ad::Var& pred_adjacency,
                        const ad::Var& type_embeddings, const GcnParams& gcn_type) {
    ad::Var out_gold = gcn(ad::cst(gold_adjacency), type_embeddings, gcn_type);
    ad::Var out_pred = gcn(pred_adjacency, type_embeddings, gcn_type);
    return ad::sq_norm(ad::sub(out_gold, out_pred));
}

} // namespace fourie
