#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fourie/crf.hpp"
#include "fourie/data.hpp"
#include "fourie/encoder.hpp"
#include "fourie/errors.hpp"
#include "fourie/gcn.hpp"
#include "fourie/instances.hpp"
#include "fourie/rng.hpp"
#include "fourie/type_graph.hpp"
#include "fourie/types.hpp"

namespace fourie {

struct HyperParams {
    double lambda = 0.5;   // trade-off weight on the dependency regularizer
    double beta = 100.0;   // sharpness of the adjacency approximation
    double tau = 0.1;      // Gumbel-Softmax temperature
    int n_layers_inst = 2; // GCN layers over the instance graph
    int n_layers_type = 3; // GCN layers over the type graphs
    int hidden = 300;
    int batch_size = 10;
    double learning_rate = 1e-3;
    int epochs = 50;
    std::uint64_t seed = 1;
    int context_window = 0;
    double grad_clip = 5.0;

    void validate() const {
        if (lambda < 0.0) throw ConfigError("hyperparams: lambda must be >= 0");
        if (beta <= 0.0) throw ConfigError("hyperparams: beta must be > 0");
        if (tau <= 0.0) throw ConfigError("hyperparams: tau must be > 0");
        if (n_layers_inst < 1 || n_layers_type < 1) {
            throw ConfigError("hyperparams: GCN layer counts must be >= 1");
        }
        if (hidden < 1 || batch_size < 1 || epochs < 0 || context_window < 0) {
            throw ConfigError("hyperparams: sizes must be positive");
        }
        if (learning_rate <= 0.0) throw ConfigError("hyperparams: learning rate must be > 0");
    }

    nlohmann::json to_json() const {
        return {{"lambda", lambda},       {"beta", beta},
                {"tau", tau},             {"n_layers_inst", n_layers_inst},
                {"n_layers_type", n_layers_type}, {"hidden", hidden},
                {"batch_size", batch_size}, {"learning_rate", learning_rate},
                {"epochs", epochs},       {"seed", seed},
                {"context_window", context_window}, {"grad_clip", grad_clip}};
    }

    static HyperParams from_json(const nlohmann::json& j) {
        HyperParams hp;
        hp.lambda = j.at("lambda").get<double>();
        hp.beta = j.at("beta").get<double>();
        hp.tau = j.at("tau").get<double>();
        hp.n_layers_inst = j.at("n_layers_inst").get<int>();
        hp.n_layers_type = j.at("n_layers_type").get<int>();
        hp.hidden = j.at("hidden").get<int>();
        hp.batch_size = j.at("batch_size").get<int>();
        hp.learning_rate = j.at("learning_rate").get<double>();
        hp.epochs = j.at("epochs").get<int>();
        hp.seed = j.at("seed").get<std::uint64_t>();
        hp.context_window = j.at("context_window").get<int>();
        hp.grad_clip = j.at("grad_clip").get<double>();
        hp.validate();
        return hp;
    }
};

struct AblationFlags {
    bool use_gcn_inst = true;
    bool use_gcn_type = true;
    bool use_soft_adjacency = true;

    // soft adjacency only exists inside the dependency regularizer
    AblationFlags normalized() const {
        AblationFlags f = *this;
        if (!f.use_gcn_type) f.use_soft_adjacency = false;
        return f;
    }

    nlohmann::json to_json() const {
        return {{"use_gcn_inst", use_gcn_inst},
                {"use_gcn_type", use_gcn_type},
                {"use_soft_adjacency", use_soft_adjacency}};
    }

    static AblationFlags from_json(const nlohmann::json& j) {
        AblationFlags f;
        f.use_gcn_inst = j.at("use_gcn_inst").get<bool>();
        f.use_gcn_type = j.at("use_gcn_type").get<bool>();
        f.use_soft_adjacency = j.at("use_soft_adjacency").get<bool>();
        return f.normalized();
    }
};

// Per-sentence training losses, still attached to the graph.
struct SentenceLosses {
    ad::Var span_ent;
    ad::Var span_trg;
    ad::Var type;
    ad::Var dep; // undefined when the type regularizer is off
};

class Model {
public:
    Model(const HyperParams& hp, Vocabulary vocab, TypeInventory inventory, Rng& rng)
        : hp_(hp), vocab_(std::move(vocab)), inventory_(std::move(inventory)) {
        hp_.validate();
        std::size_t d = static_cast<std::size_t>(hp_.hidden);
        encoder_ = EncoderParams::init(vocab_.size(), d, hp_.context_window, rng);
        crf_ent_ = CrfParams::init(d, rng);
        crf_trg_ = CrfParams::init(d, rng);
        proj_ = ProjectionParams::init(d, rng);
        gcn_inst_ = GcnParams::init(static_cast<std::size_t>(hp_.n_layers_inst), d, rng);
        gcn_type_ = GcnParams::init(static_cast<std::size_t>(hp_.n_layers_type), d, rng);
        Tensor emb({inventory_.n_total(), d});
        for (auto& v : emb.data()) v = rng.uniform(-0.1, 0.1);
        type_embeddings_ = ad::Var::leaf(std::move(emb), true);
    }

    const HyperParams& hp() const { return hp_; }
    const Vocabulary& vocab() const { return vocab_; }
    const TypeInventory& inventory() const { return inventory_; }
    const EncoderParams& encoder() const { return encoder_; }
    const CrfParams& crf_ent() const { return crf_ent_; }
    const CrfParams& crf_trg() const { return crf_trg_; }
    const ProjectionParams& proj() const { return proj_; }
    const GcnParams& gcn_inst() const { return gcn_inst_; }
    const GcnParams& gcn_type() const { return gcn_type_; }
    const ad::Var& type_embeddings() const { return type_embeddings_; }

    // Named trainable tensors in a fixed order (update + checkpoint order).
    std::vector<std::pair<std::string, ad::Var>> parameters() const {
        std::vector<std::pair<std::string, ad::Var>> ps;
        ps.emplace_back("encoder.embeddings", encoder_.embeddings);
        if (encoder_.window > 0) ps.emplace_back("encoder.window", encoder_.window_weights);
        auto crf = [&](const char* prefix, const CrfParams& c) {
            std::string p = prefix;
            ps.emplace_back(p + ".proj", c.proj);
            ps.emplace_back(p + ".bias", c.bias);
            ps.emplace_back(p + ".trans", c.trans);
            ps.emplace_back(p + ".start", c.start);
            ps.emplace_back(p + ".end", c.end);
        };
        crf("crf_ent", crf_ent_);
        crf("crf_trg", crf_trg_);
        ps.emplace_back("proj.rel_w", proj_.rel_w);
        ps.emplace_back("proj.rel_b", proj_.rel_b);
        ps.emplace_back("proj.arg_w", proj_.arg_w);
        ps.emplace_back("proj.arg_b", proj_.arg_b);
        for (std::size_t l = 0; l < gcn_inst_.layers.size(); ++l) {
            ps.emplace_back("gcn_inst." + std::to_string(l) + ".w", gcn_inst_.layers[l].weight);
            ps.emplace_back("gcn_inst." + std::to_string(l) + ".b", gcn_inst_.layers[l].bias);
        }
        for (std::size_t l = 0; l < gcn_type_.layers.size(); ++l) {
            ps.emplace_back("gcn_type." + std::to_string(l) + ".w", gcn_type_.layers[l].weight);
            ps.emplace_back("gcn_type." + std::to_string(l) + ".b", gcn_type_.layers[l].bias);
        }
        ps.emplace_back("type_embeddings", type_embeddings_);
        return ps;
    }

    // Training-mode forward pass over one validated sentence (gold spans).
    SentenceLosses forward_train(const AnnotatedSentence& s, const AblationFlags& raw_flags,
                                 GumbelSource& noise) const {
        AblationFlags flags = raw_flags.normalized();
        ad::Var enc = encode(encoder_, vocab_, s.tokens);

        std::vector<Span> ent_spans = s.entity_spans();
        std::vector<Span> trg_spans = s.trigger_spans();
        SentenceLosses out;
        out.span_ent = crf_nll(crf_ent_, enc, spans_to_tags(ent_spans, s.size()));
        out.span_trg = crf_nll(crf_trg_, enc, spans_to_tags(trg_spans, s.size()));

        InstanceSet set = build_instances(ent_spans, trg_spans, enc, proj_);
        assign_gold_types(set, s, inventory_);
        if (set.size() == 0) {
            out.type = ad::cst(Tensor::scalar(0.0));
            if (flags.use_gcn_type) out.dep = ad::cst(Tensor::scalar(0.0));
            return out;
        }

        classify_with_flags(set, flags);
        out.type = type_loss(set);

        if (flags.use_gcn_type) {
            Tensor a_gold = build_gold_adjacency(set, inventory_);
            ad::Var a_pred =
                flags.use_soft_adjacency
                    ? build_pred_soft_adjacency(set, inventory_, hp_.beta, hp_.tau, noise)
                    : ad::cst(build_pred_hard_adjacency(set, inventory_));
            out.dep = dep_loss(a_gold, a_pred, type_embeddings_, gcn_type_);
        }
        return out;
    }

    // Decode one sentence. With use_gold_spans the instance set comes from
    // the gold annotation (type predictions only); otherwise spans come from
    // the two Viterbi heads.
    AnnotatedSentence predict(const AnnotatedSentence& s, const AblationFlags& raw_flags,
                              bool use_gold_spans = false) const {
        AblationFlags flags = raw_flags.normalized();
        ad::Var enc = encode(encoder_, vocab_, s.tokens);

        std::vector<Span> ent_spans, trg_spans;
        if (use_gold_spans) {
            ent_spans = s.entity_spans();
            trg_spans = s.trigger_spans();
        } else {
            ent_spans = tags_to_spans(crf_viterbi(crf_ent_, enc));
            trg_spans = tags_to_spans(crf_viterbi(crf_trg_, enc));
        }

        AnnotatedSentence out;
        out.tokens = s.tokens;
        InstanceSet set = build_instances(ent_spans, trg_spans, enc, proj_);
        classify_with_flags(set, flags);

        for (const Instance& inst : set.items) {
            std::size_t ty = static_cast<std::size_t>(inst.pred_local);
            switch (inst.task) {
                case Task::Ent:
                    out.entities.push_back(
                        {ent_spans[inst.a], inventory_.partition(Task::Ent)[ty]});
                    break;
                case Task::Trg:
                    out.triggers.push_back(
                        {trg_spans[inst.a], inventory_.partition(Task::Trg)[ty]});
                    break;
                case Task::Rel:
                    if (ty != inventory_.none_local(Task::Rel)) {
                        out.relations.push_back(
                            {inst.a, inst.b, inventory_.partition(Task::Rel)[ty]});
                    }
                    break;
                case Task::Arg:
                    if (ty != inventory_.none_local(Task::Arg)) {
                        out.arguments.push_back(
                            {inst.a, inst.b, inventory_.partition(Task::Arg)[ty]});
                    }
                    break;
            }
        }
        return out;
    }

    // Shared by training and decoding: stack instance representations, run
    // the interaction GCN unless ablated, attach distributions.
    void classify_with_flags(InstanceSet& set, const AblationFlags& flags) const {
        if (set.size() == 0) return;
        std::vector<ad::Var> reps;
        reps.reserve(set.size());
        for (const Instance& inst : set.items) reps.push_back(inst.init_rep);
        ad::Var stacked = ad::stack_rows(reps);
        ad::Var enriched =
            flags.use_gcn_inst
                ? gcn(ad::cst(build_interaction_adjacency(set)), stacked, gcn_inst_)
                : stacked;
        classify_instances(set, enriched, inventory_, type_embeddings_);
    }

private:
    HyperParams hp_;
    Vocabulary vocab_;
    TypeInventory inventory_;
    EncoderParams encoder_;
    CrfParams crf_ent_, crf_trg_;
    ProjectionParams proj_;
    GcnParams gcn_inst_, gcn_type_;
    ad::Var type_embeddings_;
};

} // namespace fourie
