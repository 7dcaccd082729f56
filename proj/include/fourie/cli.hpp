#pragma once

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fourie/checkpoint.hpp"
#include "fourie/data.hpp"
#include "fourie/errors.hpp"
#include "fourie/model.hpp"
#include "fourie/trainer.hpp"
#include "fourie/type_graph.hpp"

namespace fourie {

struct RunConfig {
    std::string train_path;
    std::string dev_path;
    std::string test_path; // input corpus for predict / gold corpus for eval
    std::string pred_path; // predictions for eval
    std::string inventory_path;
    std::string ckpt_path;
    std::string out_path;
    std::string synth_spec_path;
    HyperParams hp;
    AblationFlags flags;
    bool gold_spans = false;
    bool hard_adjacency_dump = false;
};

namespace cli_detail {

inline void require_path(const std::string& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("missing required path: ") + what);
}

} // namespace cli_detail

inline void cmd_train(const RunConfig& cfg, std::ostream& status = std::cout) {
    cli_detail::require_path(cfg.train_path, "--train");
    cli_detail::require_path(cfg.dev_path, "--dev");
    cli_detail::require_path(cfg.inventory_path, "--inventory");
    cli_detail::require_path(cfg.ckpt_path, "--ckpt");
    cli_detail::require_path(cfg.out_path, "--out");
    cfg.hp.validate();

    TypeInventory inv = TypeInventory::load(cfg.inventory_path);
    Corpus train = load_corpus(cfg.train_path, inv);
    Corpus dev = load_corpus(cfg.dev_path, inv);

    FitResult result = fit(train, dev, cfg.hp, cfg.flags, inv);

    std::ofstream log(cfg.out_path, std::ios::binary);
    if (!log) throw DataError("train: cannot write " + cfg.out_path);
    for (const auto& line : result.log_lines) log << line << "\n";
    result.checkpoint.save(cfg.ckpt_path);

    status << "trained " << cfg.hp.epochs << " epoch(s); best epoch " << result.best_epoch
           << " (dev avg4 F1 " << std::fixed << std::setprecision(4)
           << std::max(result.best_avg4, 0.0) << "); checkpoint: " << cfg.ckpt_path
           << "; log: " << cfg.out_path << "\n";
}

inline void cmd_predict(const RunConfig& cfg, std::ostream& status = std::cout) {
    cli_detail::require_path(cfg.ckpt_path, "--ckpt");
    cli_detail::require_path(cfg.test_path, "--test");
    cli_detail::require_path(cfg.out_path, "--out");

    Checkpoint ck = Checkpoint::load(cfg.ckpt_path);
    Model model = restore_model(ck);
    Corpus input = load_corpus(cfg.test_path, model.inventory());

    Corpus pred;
    pred.reserve(input.size());
    for (const auto& s : input) pred.push_back(model.predict(s, ck.flags, cfg.gold_spans));
    save_corpus(pred, cfg.out_path);
    status << "wrote " << pred.size() << " prediction(s) to " << cfg.out_path << "\n";
}

inline std::string format_report(const MetricReport& rep) {
    std::ostringstream os;
    os << std::left << std::setw(8) << "metric" << std::right << std::setw(10) << "precision"
       << std::setw(10) << "recall" << std::setw(10) << "f1" << std::setw(8) << "gold"
       << std::setw(8) << "pred" << std::setw(9) << "matched" << "\n";
    os << std::fixed << std::setprecision(3);
    for (const auto& [name, c] : rep.named()) {
        os << std::left << std::setw(8) << name << std::right << std::setw(10) << c->precision()
           << std::setw(10) << c->recall() << std::setw(10) << c->f1() << std::setw(8) << c->gold
           << std::setw(8) << c->pred << std::setw(9) << c->matched << "\n";
    }
    return os.str();
}

inline MetricReport cmd_eval(const RunConfig& cfg, std::ostream& out = std::cout) {
    cli_detail::require_path(cfg.test_path, "gold corpus");
    cli_detail::require_path(cfg.pred_path, "prediction corpus");
    cli_detail::require_path(cfg.inventory_path, "--inventory");

    TypeInventory inv = TypeInventory::load(cfg.inventory_path);
    Corpus gold = load_corpus(cfg.test_path, inv);
    Corpus pred = load_corpus(cfg.pred_path, inv);
    if (gold.size() != pred.size()) {
        throw DataError("eval: gold has " + std::to_string(gold.size()) +
                        " sentences but predictions have " + std::to_string(pred.size()));
    }
    MetricReport rep = score(gold, pred);
    out << format_report(rep);
    if (!cfg.out_path.empty()) {
        std::ofstream f(cfg.out_path, std::ios::binary);
        if (!f) throw DataError("eval: cannot write " + cfg.out_path);
        f << report_to_json(rep).dump() << "\n";
    }
    return rep;
}

inline void cmd_synth(const RunConfig& cfg, std::ostream& status = std::cout) {
    cli_detail::require_path(cfg.synth_spec_path, "--spec");
    cli_detail::require_path(cfg.out_path, "--out");

    std::ifstream in(cfg.synth_spec_path);
    if (!in) throw DataError("synth: cannot open " + cfg.synth_spec_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("synth: " + cfg.synth_spec_path + ": " + e.what());
    }
    SynthSpec spec = synth_spec_from_json(j);
    Corpus corpus = generate_synthetic(spec, cfg.hp.seed);
    save_corpus(corpus, cfg.out_path);
    if (!cfg.inventory_path.empty()) {
        std::ofstream f(cfg.inventory_path, std::ios::binary);
        if (!f) throw DataError("synth: cannot write " + cfg.inventory_path);
        f << spec.inventory.to_json().dump(2) << "\n";
    }
    status << "wrote " << corpus.size() << " sentence(s) to " << cfg.out_path << "\n";
}

// Diagnostic dump of the three graphs for a single annotated sentence.
inline void cmd_graph_dump(const RunConfig& cfg, std::ostream& out = std::cout) {
    cli_detail::require_path(cfg.ckpt_path, "--ckpt");
    cli_detail::require_path(cfg.test_path, "--test");

    Checkpoint ck = Checkpoint::load(cfg.ckpt_path);
    Model model = restore_model(ck);
    Corpus input = load_corpus(cfg.test_path, model.inventory());
    if (input.size() != 1) {
        throw ConfigError("graph-dump: input must contain exactly one sentence, found " +
                          std::to_string(input.size()));
    }
    const AnnotatedSentence& s = input[0];
    const TypeInventory& inv = model.inventory();

    ad::Var enc = encode(model.encoder(), model.vocab(), s.tokens);
    InstanceSet set = build_instances(s.entity_spans(), s.trigger_spans(), enc, model.proj());
    assign_gold_types(set, s, inv);
    model.classify_with_flags(set, ck.flags);

    auto label = [&](std::size_t node) {
        const Instance& inst = set.items[node];
        std::ostringstream os;
        switch (inst.task) {
            case Task::Ent: {
                const Span& sp = s.entities[inst.a].span;
                os << "ent" << inst.a << "[" << sp.start << "," << sp.end << "]";
                break;
            }
            case Task::Trg: {
                const Span& sp = s.triggers[inst.a].span;
                os << "trg" << inst.a << "[" << sp.start << "," << sp.end << "]";
                break;
            }
            case Task::Rel:
                os << "rel(e" << inst.a << ",e" << inst.b << ")";
                break;
            case Task::Arg:
                os << "arg(t" << inst.a << ",e" << inst.b << ")";
                break;
        }
        return os.str();
    };

    out << "sentence:";
    for (const auto& t : s.tokens) out << " " << t;
    out << "\n\ninstance nodes (" << set.size() << "):\n";
    for (std::size_t k = 0; k < set.size(); ++k) {
        const Instance& inst = set.items[k];
        out << "  " << k << ": " << label(k) << " pred="
            << inv.partition(inst.task)[static_cast<std::size_t>(inst.pred_local)];
        if (inst.gold_local >= 0) {
            out << " gold=" << inv.partition(inst.task)[static_cast<std::size_t>(inst.gold_local)];
        }
        out << "\n";
    }

    out << "\nG^inst edges:\n";
    Tensor a_inst = build_interaction_adjacency(set);
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (std::size_t j = i + 1; j < set.size(); ++j) {
            if (a_inst.at(i, j) != 0.0) out << "  " << label(i) << " -- " << label(j) << "\n";
        }
    }

    auto dump_type_edges = [&](const Tensor& a) {
        std::size_t n = inv.n_total();
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (a.at(i, j) != 0.0) {
                    out << "  " << inv.global_name(i) << " -- " << inv.global_name(j) << "\n";
                    any = true;
                }
            }
        }
        if (!any) out << "  (none)\n";
    };

    out << "\nG^gold edges:\n";
    dump_type_edges(build_gold_adjacency(set, inv));
    out << "\nG^pred edges:\n";
    dump_type_edges(build_pred_hard_adjacency(set, inv));

    ad::Var approx;
    if (cfg.hard_adjacency_dump) {
        approx = build_pred_eq1_hard_adjacency(set, inv, ck.hp.beta);
        out << "\napproximated adjacency (hard indices, beta=" << ck.hp.beta << "):\n";
    } else {
        Rng rng(cfg.hp.seed);
        GumbelSource noise(rng);
        approx = build_pred_soft_adjacency(set, inv, ck.hp.beta, ck.hp.tau, noise);
        out << "\napproximated adjacency (relaxed indices, beta=" << ck.hp.beta
            << ", tau=" << ck.hp.tau << ", seed=" << cfg.hp.seed << "):\n";
    }
    const Tensor& m = approx.value();
    out << std::fixed << std::setprecision(6);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out << " ";
        for (std::size_t j = 0; j < m.cols(); ++j) out << " " << m.at(i, j);
        out << "\n";
    }
}

} // namespace fourie
