#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "fourie/cli.hpp"

using namespace fourie;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("fourie-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

TypeInventory demo_inventory() {
    return TypeInventory::make({"Person", "Org"}, {"Attack"}, {"WorksFor"}, {"Target"});
}

SynthSpec demo_spec(std::size_t sentences) {
    SynthSpec spec;
    spec.inventory = demo_inventory();
    spec.sentences = sentences;
    spec.relation_rules = {{"Person", "WorksFor", "Org"}};
    spec.argument_rules = {{"Attack", "Target", "Person"}};
    spec.surface_forms = 2;
    return spec;
}

// Writes inventory + train/dev corpora and returns a ready train config.
RunConfig training_setup(const TempDir& dir) {
    TypeInventory inv = demo_inventory();
    {
        std::ofstream f(dir.file("inventory.json"));
        f << inv.to_json().dump() << "\n";
    }
    save_corpus(generate_synthetic(demo_spec(6), 31), dir.file("train.jsonl"));
    save_corpus(generate_synthetic(demo_spec(3), 32), dir.file("dev.jsonl"));

    RunConfig cfg;
    cfg.train_path = dir.file("train.jsonl");
    cfg.dev_path = dir.file("dev.jsonl");
    cfg.inventory_path = dir.file("inventory.json");
    cfg.ckpt_path = dir.file("model.ckpt");
    cfg.out_path = dir.file("metrics.jsonl");
    cfg.hp.hidden = 10;
    cfg.hp.epochs = 2;
    cfg.hp.batch_size = 3;
    cfg.hp.learning_rate = 1e-2;
    cfg.hp.seed = 5;
    return cfg;
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(FOURIE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST_CASE("train writes a reproducible checkpoint and metrics log") {
    TempDir dir;
    RunConfig cfg = training_setup(dir);
    std::ostringstream sink;
    cmd_train(cfg, sink);

    std::string ckpt1 = slurp(cfg.ckpt_path);
    std::string log1 = slurp(cfg.out_path);
    CHECK(ckpt1.rfind(kCheckpointTag, 0) == 0);
    CHECK(log1.find("\"epoch\":2") != std::string::npos);
    CHECK(log1.find("\"seed\":5") != std::string::npos);

    cmd_train(cfg, sink);
    CHECK(slurp(cfg.ckpt_path) == ckpt1);
    CHECK(slurp(cfg.out_path) == log1);
}

TEST_CASE("lambda zero records l_dep but keeps it out of the total") {
    TempDir dir;
    RunConfig cfg = training_setup(dir);
    cfg.hp.lambda = 0.0;
    cfg.hp.epochs = 1;
    std::ostringstream sink;
    cmd_train(cfg, sink);

    std::string log = slurp(cfg.out_path);
    std::istringstream lines(log);
    std::string header, epoch_line;
    std::getline(lines, header);
    std::getline(lines, epoch_line);
    auto j = nlohmann::json::parse(epoch_line);
    CHECK(j.at("l_dep").get<double>() > 0.0);
    double total = j.at("total").get<double>();
    double sum3 = j.at("l_span_ent").get<double>() + j.at("l_span_trg").get<double>() +
                  j.at("l_type").get<double>();
    CHECK(total == sum3);
}

TEST_CASE("predict emits the corpus format and eval scores it") {
    TempDir dir;
    RunConfig cfg = training_setup(dir);
    std::ostringstream sink;
    cmd_train(cfg, sink);

    RunConfig pcfg;
    pcfg.ckpt_path = cfg.ckpt_path;
    pcfg.test_path = cfg.train_path;
    pcfg.out_path = dir.file("pred.jsonl");
    cmd_predict(pcfg, sink);

    std::string pred = slurp(pcfg.out_path);
    CHECK(pred.rfind(kCorpusHeader, 0) == 0);
    // loads cleanly and aligns with the gold corpus
    Corpus loaded = load_corpus(pcfg.out_path, demo_inventory());
    CHECK(loaded.size() == 6);

    RunConfig ecfg;
    ecfg.test_path = cfg.train_path;
    ecfg.pred_path = pcfg.out_path;
    ecfg.inventory_path = cfg.inventory_path;
    ecfg.out_path = dir.file("report.json");
    std::ostringstream table;
    MetricReport rep = cmd_eval(ecfg, table);
    CHECK(table.str().find("Ent-C") != std::string::npos);
    CHECK(table.str().find("Arg-C") != std::string::npos);
    auto rj = nlohmann::json::parse(slurp(ecfg.out_path));
    CHECK(rj.at("Ent-C").at("f1").get<double>() == Catch::Approx(rep.ent_c.f1()));
    CHECK(rj.at("Trg-I").contains("matched"));
}

TEST_CASE("eval of identical files is all ones and swapping transposes P and R") {
    TempDir dir;
    TypeInventory inv = demo_inventory();
    {
        std::ofstream f(dir.file("inventory.json"));
        f << inv.to_json().dump() << "\n";
    }
    Corpus gold = generate_synthetic(demo_spec(5), 33);
    Corpus pred = gold;
    pred[0].entities.pop_back(); // drop one prediction (monotone direction known)
    pred[0].relations.clear();
    pred[0].arguments.clear();
    save_corpus(gold, dir.file("gold.jsonl"));
    save_corpus(pred, dir.file("pred.jsonl"));

    std::ostringstream sink;
    RunConfig same;
    same.test_path = dir.file("gold.jsonl");
    same.pred_path = dir.file("gold.jsonl");
    same.inventory_path = dir.file("inventory.json");
    MetricReport identical = cmd_eval(same, sink);
    for (const auto& [name, c] : identical.named()) {
        if (c->gold > 0) CHECK(c->f1() == 1.0);
    }

    RunConfig fwd = same;
    fwd.pred_path = dir.file("pred.jsonl");
    RunConfig rev = same;
    rev.test_path = dir.file("pred.jsonl");
    rev.pred_path = dir.file("gold.jsonl");
    MetricReport a = cmd_eval(fwd, sink);
    MetricReport b = cmd_eval(rev, sink);
    CHECK(a.ent_c.precision() == Catch::Approx(b.ent_c.recall()));
    CHECK(a.ent_c.recall() == Catch::Approx(b.ent_c.precision()));
    CHECK(a.rel_c.precision() == Catch::Approx(b.rel_c.recall()));
}

TEST_CASE("predict on an empty corpus writes only the header record") {
    TempDir dir;
    RunConfig cfg = training_setup(dir);
    cfg.hp.epochs = 0;
    std::ostringstream sink;
    cmd_train(cfg, sink);

    { std::ofstream f(dir.file("empty.jsonl")); }
    RunConfig pcfg;
    pcfg.ckpt_path = cfg.ckpt_path;
    pcfg.test_path = dir.file("empty.jsonl");
    pcfg.out_path = dir.file("pred.jsonl");
    cmd_predict(pcfg, sink);
    CHECK(slurp(pcfg.out_path) == std::string(kCorpusHeader) + "\n");
}

TEST_CASE("corrupted checkpoint tag is rejected before compute") {
    TempDir dir;
    {
        std::ofstream f(dir.file("bad.ckpt"));
        f << "not-a-checkpoint\n{}\n";
    }
    RunConfig cfg;
    cfg.ckpt_path = dir.file("bad.ckpt");
    cfg.test_path = dir.file("whatever.jsonl");
    cfg.out_path = dir.file("pred.jsonl");
    CHECK_THROWS_AS(cmd_predict(cfg), DataError);
}

TEST_CASE("graph dump prints instance edges and the approximated adjacency") {
    TempDir dir;
    RunConfig cfg = training_setup(dir);
    cfg.hp.epochs = 0;
    std::ostringstream sink;
    cmd_train(cfg, sink);

    // one entity + one trigger: the interaction edges are exactly ent--arg
    // and trg--arg
    TypeInventory inv = demo_inventory();
    AnnotatedSentence s;
    s.tokens = {"person_0", "attack_0"};
    s.entities = {{{0, 0}, "Person"}};
    s.triggers = {{{1, 1}, "Attack"}};
    s.arguments = {{0, 0, "Target"}};
    save_corpus({s}, dir.file("one.jsonl"));

    RunConfig dcfg;
    dcfg.ckpt_path = cfg.ckpt_path;
    dcfg.test_path = dir.file("one.jsonl");
    dcfg.hp.seed = 9;

    std::ostringstream out;
    cmd_graph_dump(dcfg, out);
    std::string text = out.str();
    CHECK(text.find("ent0[0,0] -- arg(t0,e0)") != std::string::npos);
    CHECK(text.find("trg0[0,0]") == std::string::npos); // trigger label uses its own span
    CHECK(text.find("trg0[1,1] -- arg(t0,e0)") != std::string::npos);
    CHECK(text.find("G^gold edges:") != std::string::npos);
    CHECK(text.find("Person -- Target") != std::string::npos);
    CHECK(text.find("Attack -- Target") != std::string::npos);

    // deterministic given the seed
    std::ostringstream out2;
    cmd_graph_dump(dcfg, out2);
    CHECK(out.str() == out2.str());

    // hard indices print a 0/1 matrix
    dcfg.hard_adjacency_dump = true;
    std::ostringstream hard;
    cmd_graph_dump(dcfg, hard);
    std::istringstream lines(hard.str());
    std::string line;
    bool in_matrix = false;
    while (std::getline(lines, line)) {
        if (line.rfind("approximated adjacency", 0) == 0) {
            in_matrix = true;
            continue;
        }
        if (!in_matrix || line.empty()) continue;
        std::istringstream cells(line);
        std::string cell;
        while (cells >> cell) {
            CHECK((cell == "0.000000" || cell == "1.000000"));
        }
    }
}

TEST_CASE("graph dump refuses multi-sentence input") {
    TempDir dir;
    RunConfig cfg = training_setup(dir);
    cfg.hp.epochs = 0;
    std::ostringstream sink;
    cmd_train(cfg, sink);

    RunConfig dcfg;
    dcfg.ckpt_path = cfg.ckpt_path;
    dcfg.test_path = cfg.train_path;
    CHECK_THROWS_AS(cmd_graph_dump(dcfg, sink), ConfigError);
}

TEST_CASE("synth command writes corpus and inventory from a spec file") {
    TempDir dir;
    nlohmann::json spec = {
        {"sentences", 4},
        {"inventory", demo_inventory().to_json()},
        {"relation_rules", {{"Person", "WorksFor", "Org"}}},
        {"argument_rules", {{"Attack", "Target", "Person"}}},
    };
    {
        std::ofstream f(dir.file("spec.json"));
        f << spec.dump() << "\n";
    }
    RunConfig cfg;
    cfg.synth_spec_path = dir.file("spec.json");
    cfg.out_path = dir.file("corpus.jsonl");
    cfg.inventory_path = dir.file("inv.json");
    cfg.hp.seed = 77;
    std::ostringstream sink;
    cmd_synth(cfg, sink);

    TypeInventory inv = TypeInventory::load(dir.file("inv.json"));
    Corpus c = load_corpus(dir.file("corpus.jsonl"), inv);
    CHECK(c.size() == 4);
}

TEST_CASE("predictions reproduce the gold file after overfitting") {
    TempDir dir;
    TypeInventory inv = demo_inventory();
    {
        std::ofstream f(dir.file("inventory.json"));
        f << inv.to_json().dump() << "\n";
    }
    SynthSpec spec = demo_spec(4);
    save_corpus(generate_synthetic(spec, 71), dir.file("train.jsonl"));
    save_corpus(generate_synthetic(spec, 72), dir.file("dev.jsonl"));

    RunConfig cfg;
    cfg.train_path = dir.file("train.jsonl");
    cfg.dev_path = dir.file("dev.jsonl");
    cfg.inventory_path = dir.file("inventory.json");
    cfg.ckpt_path = dir.file("model.ckpt");
    cfg.out_path = dir.file("metrics.jsonl");
    cfg.hp.hidden = 16;
    cfg.hp.epochs = 120;
    cfg.hp.batch_size = 4;
    cfg.hp.learning_rate = 2e-2;
    cfg.hp.seed = 8;
    std::ostringstream sink;
    cmd_train(cfg, sink);

    RunConfig pcfg;
    pcfg.ckpt_path = cfg.ckpt_path;
    pcfg.test_path = cfg.train_path;
    pcfg.out_path = dir.file("pred.jsonl");
    cmd_predict(pcfg, sink);
    CHECK(slurp(pcfg.out_path) == slurp(cfg.train_path));
}

TEST_CASE("config files feed defaults that flags override") {
    TempDir dir;
    TypeInventory inv = demo_inventory();
    {
        std::ofstream f(dir.file("inventory.json"));
        f << inv.to_json().dump() << "\n";
    }
    save_corpus(generate_synthetic(demo_spec(3), 51), dir.file("train.jsonl"));
    save_corpus(generate_synthetic(demo_spec(2), 52), dir.file("dev.jsonl"));
    {
        std::ofstream f(dir.file("run.cfg"));
        f << "[train]\n";
        f << "train=" << dir.file("train.jsonl") << "\n";
        f << "dev=" << dir.file("dev.jsonl") << "\n";
        f << "inventory=" << dir.file("inventory.json") << "\n";
        f << "ckpt=" << dir.file("m.ckpt") << "\n";
        f << "out=" << dir.file("log.jsonl") << "\n";
        f << "hidden=8\n";
        f << "epochs=7\n";
        f << "batch=2\n";
    }
    // flag overrides the config value for epochs
    CHECK(run_cli("--config " + dir.file("run.cfg") + " train --epochs 1") == 0);
    std::string log = slurp(dir.file("log.jsonl"));
    CHECK(log.find("\"epoch\":1") != std::string::npos);
    CHECK(log.find("\"epoch\":7") == std::string::npos);
    CHECK(log.find("\"hidden\":8") != std::string::npos);
}

TEST_CASE("binary exit codes distinguish usage from runtime errors") {
    TempDir dir;
    CHECK(run_cli("") == 2);                        // no subcommand
    CHECK(run_cli("train --train x.jsonl") == 2);   // missing required flags
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("nonsense-subcommand") == 2);

    // runtime error: checkpoint does not exist
    CHECK(run_cli("predict --ckpt " + dir.file("missing.ckpt") + " --test " +
                  dir.file("missing.jsonl") + " --out " + dir.file("pred.jsonl")) == 1);
}

TEST_CASE("cli smoke test through the real binary") {
    TempDir dir;
    TypeInventory inv = demo_inventory();
    {
        std::ofstream f(dir.file("inventory.json"));
        f << inv.to_json().dump() << "\n";
    }
    save_corpus(generate_synthetic(demo_spec(4), 41), dir.file("train.jsonl"));
    save_corpus(generate_synthetic(demo_spec(2), 42), dir.file("dev.jsonl"));

    std::string common = " --train " + dir.file("train.jsonl") + " --dev " +
                         dir.file("dev.jsonl") + " --inventory " + dir.file("inventory.json") +
                         " --ckpt " + dir.file("m.ckpt") + " --out " + dir.file("log.jsonl") +
                         " --hidden 8 --epochs 1 --batch 2 --seed 3";
    CHECK(run_cli("train" + common) == 0);
    CHECK(run_cli("predict --ckpt " + dir.file("m.ckpt") + " --test " + dir.file("dev.jsonl") +
                  " --out " + dir.file("pred.jsonl")) == 0);
    CHECK(run_cli("eval " + dir.file("dev.jsonl") + " " + dir.file("pred.jsonl") +
                  " --inventory " + dir.file("inventory.json")) == 0);

    // ablation flags are accepted and change the objective
    CHECK(run_cli("train" + common + " --no-gcn-inst --no-gcn-type") == 0);
}
