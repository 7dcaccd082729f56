#pragma once

#include <set>
#include <string>
#include <vector>

#include "fourie/autodiff.hpp"
#include "fourie/data.hpp"
#include "fourie/encoder.hpp"
#include "fourie/errors.hpp"
#include "fourie/gcn.hpp"
#include "fourie/types.hpp"

namespace fourie {

// One prediction instance. `a`/`b` index into the sentence's entity and
// trigger lists: ent uses a, trg uses a, rel uses (a,b) with a<b over
// entities, arg uses (a=trigger, b=entity).
struct Instance {
    Task task = Task::Ent;
    std::size_t a = 0, b = 0;
    ad::Var init_rep; // 1 x d
    ad::Var enriched; // 1 x d, filled by classify_instances
    ad::Var scores;   // 1 x |partition|, pre-softmax
    ad::Var dist;     // 1 x |partition|, softmax
    int gold_local = -1;
    int pred_local = -1;
};

struct InstanceSet {
    std::vector<Instance> items;
    std::size_t n_ent = 0, n_trg = 0, n_rel = 0, n_arg = 0;

    std::size_t size() const { return items.size(); }
    std::size_t ent_node(std::size_t i) const { return i; }
    std::size_t trg_node(std::size_t i) const { return n_ent + i; }
    std::size_t rel_node(std::size_t k) const { return n_ent + n_trg + k; }
    std::size_t arg_node(std::size_t k) const { return n_ent + n_trg + n_rel + k; }
};

// Linear maps folding the concatenated pair representations back to size d.
struct ProjectionParams {
    ad::Var rel_w, rel_b; // 2d x d, 1 x d
    ad::Var arg_w, arg_b;

    static ProjectionParams init(std::size_t hidden, Rng& rng) {
        ProjectionParams p;
        double bound = 1.0 / std::sqrt(static_cast<double>(2 * hidden));
        auto make_w = [&]() {
            Tensor w({2 * hidden, hidden});
            for (auto& v : w.data()) v = rng.uniform(-bound, bound);
            return ad::Var::leaf(std::move(w), true);
        };
        p.rel_w = make_w();
        p.rel_b = ad::Var::leaf(Tensor({1, hidden}), true);
        p.arg_w = make_w();
        p.arg_b = ad::Var::leaf(Tensor({1, hidden}), true);
        return p;
    }
};

// Entity instances, trigger instances, one relation instance per entity pair
// (i<j), one argument instance per (trigger, entity) pair.
inline InstanceSet build_instances(const std::vector<Span>& ent_spans,
                                   const std::vector<Span>& trg_spans, const ad::Var& enc,
                                   const ProjectionParams& proj) {
    std::size_t n = enc.value().rows();
    for (const auto* list : {&ent_spans, &trg_spans}) {
        std::set<Span> seen;
        for (const Span& s : *list) {
            if (s.start > s.end || s.end >= n) {
                throw ContractError("build_instances: span out of sentence bounds");
            }
            if (!seen.insert(s).second) {
                throw ContractError("build_instances: duplicate span in list");
            }
        }
    }

    InstanceSet set;
    set.n_ent = ent_spans.size();
    set.n_trg = trg_spans.size();
    set.n_rel = set.n_ent < 2 ? 0 : set.n_ent * (set.n_ent - 1) / 2;
    set.n_arg = set.n_trg * set.n_ent;
    set.items.reserve(set.n_ent + set.n_trg + set.n_rel + set.n_arg);

    std::vector<ad::Var> ent_reps, trg_reps;
    for (const Span& s : ent_spans) ent_reps.push_back(span_rep(enc, s.start, s.end));
    for (const Span& s : trg_spans) trg_reps.push_back(span_rep(enc, s.start, s.end));

    for (std::size_t i = 0; i < set.n_ent; ++i) {
        set.items.push_back({Task::Ent, i, 0, ent_reps[i], {}, {}, {}, -1, -1});
    }
    for (std::size_t i = 0; i < set.n_trg; ++i) {
        set.items.push_back({Task::Trg, i, 0, trg_reps[i], {}, {}, {}, -1, -1});
    }
    for (std::size_t i = 0; i < set.n_ent; ++i) {
        for (std::size_t j = i + 1; j < set.n_ent; ++j) {
            ad::Var rep = ad::add(
                ad::matmul(ad::concat_cols(ent_reps[i], ent_reps[j]), proj.rel_w), proj.rel_b);
            set.items.push_back({Task::Rel, i, j, rep, {}, {}, {}, -1, -1});
        }
    }
    for (std::size_t t = 0; t < set.n_trg; ++t) {
        for (std::size_t e = 0; e < set.n_ent; ++e) {
            ad::Var rep = ad::add(
                ad::matmul(ad::concat_cols(trg_reps[t], ent_reps[e]), proj.arg_w), proj.arg_b);
            set.items.push_back({Task::Arg, t, e, rep, {}, {}, {}, -1, -1});
        }
    }
    return set;
}

// Binary interaction adjacency with self-loops: instances connect when they
// share an entity mention or an event trigger.
inline Tensor build_interaction_adjacency(const InstanceSet& set) {
    std::size_t n = set.size();
    Tensor a({n, n});
    for (std::size_t i = 0; i < n; ++i) a.at(i, i) = 1.0;
    auto connect = [&](std::size_t x, std::size_t y) {
        a.at(x, y) = 1.0;
        a.at(y, x) = 1.0;
    };
    for (std::size_t k = 0; k < set.items.size(); ++k) {
        const Instance& inst = set.items[k];
        if (inst.task == Task::Rel) {
            connect(set.ent_node(inst.a), k);
            connect(set.ent_node(inst.b), k);
        } else if (inst.task == Task::Arg) {
            connect(set.trg_node(inst.a), k);
            connect(set.ent_node(inst.b), k);
        }
    }
    return a;
}

// Copy gold types onto instances; relation/argument pairs absent from the
// annotation are gold None.
inline void assign_gold_types(InstanceSet& set, const AnnotatedSentence& s,
                              const TypeInventory& inv) {
    for (Instance& inst : set.items) {
        switch (inst.task) {
            case Task::Ent:
                inst.gold_local =
                    static_cast<int>(inv.local_id(Task::Ent, s.entities[inst.a].type));
                break;
            case Task::Trg:
                inst.gold_local =
                    static_cast<int>(inv.local_id(Task::Trg, s.triggers[inst.a].type));
                break;
            case Task::Rel: {
                inst.gold_local = static_cast<int>(inv.none_local(Task::Rel));
                for (const auto& r : s.relations) {
                    if (r.a == inst.a && r.b == inst.b) {
                        inst.gold_local = static_cast<int>(inv.local_id(Task::Rel, r.type));
                        break;
                    }
                }
                break;
            }
            case Task::Arg: {
                inst.gold_local = static_cast<int>(inv.none_local(Task::Arg));
                for (const auto& a : s.arguments) {
                    if (a.trigger == inst.a && a.entity == inst.b) {
                        inst.gold_local = static_cast<int>(inv.local_id(Task::Arg, a.role));
                        break;
                    }
                }
                break;
            }
        }
    }
}

// Dot products against the task's own type embeddings, softmax-normalized;
// the predicted type is the greedy argmax.
inline void classify_instances(InstanceSet& set, const ad::Var& reps,
                               const TypeInventory& inv, const ad::Var& type_embeddings) {
    if (set.size() == 0) return;
    if (reps.value().rows() != set.size()) {
        throw ContractError("classify_instances: rep matrix rows do not match instance count");
    }
    // one slice per task, shared across that task's instances
    ad::Var part_t[4];
    for (Task t : {Task::Ent, Task::Trg, Task::Rel, Task::Arg}) {
        part_t[static_cast<int>(t)] =
            ad::transpose(ad::select_rows(type_embeddings, inv.global_indices(t)));
    }
    for (std::size_t k = 0; k < set.size(); ++k) {
        Instance& inst = set.items[k];
        inst.enriched = ad::select_rows(reps, {k});
        inst.scores = ad::matmul(inst.enriched, part_t[static_cast<int>(inst.task)]);
        inst.dist = ad::softmax_rows(inst.scores);
        const Tensor& d = inst.dist.value();
        std::size_t best = 0;
        for (std::size_t j = 1; j < d.cols(); ++j)
            if (d[j] > d[best]) best = j;
        inst.pred_local = static_cast<int>(best);
    }
}

// Sum of negative gold log-probabilities over every instance.
inline ad::Var type_loss(const InstanceSet& set) {
    ad::Var total = ad::cst(Tensor::scalar(0.0));
    for (const Instance& inst : set.items) {
        if (inst.gold_local < 0) {
            throw ContractError("type_loss: instance lacks a gold type");
        }
        ad::Var logp = ad::pick(ad::log_softmax_row(inst.scores), 0,
                                static_cast<std::size_t>(inst.gold_local));
        total = ad::sub(total, logp);
    }
    return total;
}

} // namespace fourie
