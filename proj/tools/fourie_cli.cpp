#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fourie/cli.hpp"

namespace {

void add_hp_options(CLI::App* cmd, fourie::HyperParams& hp) {
    cmd->add_option("--seed", hp.seed, "run seed (all randomness derives from it)");
    cmd->add_option("--epochs", hp.epochs, "training epochs");
    cmd->add_option("--lambda", hp.lambda, "dependency regularizer weight");
    cmd->add_option("--beta", hp.beta, "adjacency approximation sharpness");
    cmd->add_option("--tau", hp.tau, "Gumbel-Softmax temperature");
    cmd->add_option("--ni", hp.n_layers_inst, "instance GCN layers");
    cmd->add_option("--nt", hp.n_layers_type, "type GCN layers");
    cmd->add_option("--hidden", hp.hidden, "hidden size");
    cmd->add_option("--batch", hp.batch_size, "batch size");
    cmd->add_option("--lr", hp.learning_rate, "learning rate");
    cmd->add_option("--window", hp.context_window, "encoder context window (0 = plain lookup)");
}

void add_flag_options(CLI::App* cmd, fourie::AblationFlags& flags) {
    cmd->add_flag("--no-gcn-inst{false}", flags.use_gcn_inst,
                  "bypass the instance interaction GCN");
    cmd->add_flag("--no-gcn-type{false}", flags.use_gcn_type,
                  "drop the type dependency regularizer");
    cmd->add_flag("--hard-adjacency{false}", flags.use_soft_adjacency,
                  "use the hard predicted adjacency (no relaxation)");
}

} // namespace

int main(int argc, char** argv) {
    fourie::RunConfig cfg;

    CLI::App app{"joint four-task information extraction (entities, triggers, "
                 "relations, argument roles)"};
    app.require_subcommand(1);
    app.set_config("--config", "", "config file with key=value lines; flags override it");

    auto* train = app.add_subcommand("train", "train a model and write checkpoint + metrics log");
    train->add_option("--train", cfg.train_path, "training corpus")->required();
    train->add_option("--dev", cfg.dev_path, "development corpus")->required();
    train->add_option("--inventory", cfg.inventory_path, "type inventory file")->required();
    train->add_option("--ckpt", cfg.ckpt_path, "checkpoint output path")->required();
    train->add_option("--out", cfg.out_path, "metrics log output path")->required();
    add_hp_options(train, cfg.hp);
    add_flag_options(train, cfg.flags);

    auto* predict = app.add_subcommand("predict", "decode a corpus with a trained checkpoint");
    predict->add_option("--ckpt", cfg.ckpt_path, "checkpoint path")->required();
    predict->add_option("--test", cfg.test_path, "input corpus")->required();
    predict->add_option("--out", cfg.out_path, "predictions output path")->required();
    predict->add_flag("--gold-spans", cfg.gold_spans,
                      "classify gold spans instead of decoded ones (diagnostic)");

    auto* eval = app.add_subcommand("eval", "score predictions against gold");
    eval->add_option("gold", cfg.test_path, "gold corpus")->required();
    eval->add_option("pred", cfg.pred_path, "prediction corpus")->required();
    eval->add_option("--inventory", cfg.inventory_path, "type inventory file")->required();
    eval->add_option("--out", cfg.out_path, "machine-readable report output path");

    auto* dump = app.add_subcommand("graph-dump",
                                    "dump instance and type dependency graphs for one sentence");
    dump->add_option("--ckpt", cfg.ckpt_path, "checkpoint path")->required();
    dump->add_option("--test", cfg.test_path, "one-sentence corpus")->required();
    dump->add_option("--seed", cfg.hp.seed, "seed for the relaxed indices");
    dump->add_flag("--hard-adjacency", cfg.hard_adjacency_dump,
                   "print the approximation at the hard indices");

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus from a spec file");
    synth->add_option("--spec", cfg.synth_spec_path, "synthetic spec (JSON)")->required();
    synth->add_option("--out", cfg.out_path, "corpus output path")->required();
    synth->add_option("--inventory", cfg.inventory_path, "also write the inventory here");
    synth->add_option("--seed", cfg.hp.seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (train->parsed()) fourie::cmd_train(cfg);
        else if (predict->parsed()) fourie::cmd_predict(cfg);
        else if (eval->parsed()) fourie::cmd_eval(cfg);
        else if (dump->parsed()) fourie::cmd_graph_dump(cfg);
        else if (synth->parsed()) fourie::cmd_synth(cfg);
    } catch (const fourie::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
