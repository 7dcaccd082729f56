#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fourie/instances.hpp"
#include "test_support.hpp"

using namespace fourie;

namespace {

TypeInventory demo_inventory() {
    return TypeInventory::make({"Person", "Org", "Place"}, {"Attack", "Meet"},
                               {"WorksFor", "BasedIn"}, {"Target", "Attacker", "Participant"});
}

struct Fixture {
    Rng rng{31};
    std::size_t d = 4;
    ProjectionParams proj = ProjectionParams::init(d, rng);

    ad::Var enc(std::size_t n) {
        Tensor t({n, d});
        for (auto& x : t.data()) x = rng.uniform(-1.0, 1.0);
        return ad::Var::leaf(t, true);
    }

    std::vector<Span> spans(std::initializer_list<Span> s) { return s; }
};

// Independent edge oracle: apply the sharing rules pairwise.
bool oracle_edge(const InstanceSet& set, std::size_t x, std::size_t y) {
    const Instance& a = set.items[x];
    const Instance& b = set.items[y];
    auto rel_ent = [&](const Instance& rel, const Instance& ent) {
        return rel.task == Task::Rel && ent.task == Task::Ent &&
               (rel.a == ent.a || rel.b == ent.a);
    };
    auto arg_ent = [&](const Instance& arg, const Instance& ent) {
        return arg.task == Task::Arg && ent.task == Task::Ent && arg.b == ent.a;
    };
    auto arg_trg = [&](const Instance& arg, const Instance& trg) {
        return arg.task == Task::Arg && trg.task == Task::Trg && arg.a == trg.a;
    };
    return rel_ent(a, b) || rel_ent(b, a) || arg_ent(a, b) || arg_ent(b, a) || arg_trg(a, b) ||
           arg_trg(b, a);
}

} // namespace

TEST_CASE("instance counts follow the pairing formulas") {
    Fixture f;
    ad::Var enc = f.enc(8);
    InstanceSet set = build_instances(
        {{0, 0}, {2, 2}, {4, 4}}, {{5, 5}, {6, 7}}, enc, f.proj);
    CHECK(set.n_ent == 3);
    CHECK(set.n_trg == 2);
    CHECK(set.n_rel == 3);
    CHECK(set.n_arg == 6);
    CHECK(set.size() == 14);
}

TEST_CASE("no entities means no relation or argument instances") {
    Fixture f;
    InstanceSet set = build_instances({}, {{0, 0}}, f.enc(2), f.proj);
    CHECK(set.n_rel == 0);
    CHECK(set.n_arg == 0);
    CHECK(set.size() == 1);
}

TEST_CASE("single entity gives one instance") {
    Fixture f;
    InstanceSet set = build_instances({{1, 1}}, {}, f.enc(3), f.proj);
    CHECK(set.size() == 1);
    CHECK(set.items[0].task == Task::Ent);
}

TEST_CASE("duplicate spans are rejected") {
    Fixture f;
    CHECK_THROWS_AS(build_instances({{0, 0}, {0, 0}}, {}, f.enc(2), f.proj), ContractError);
}

TEST_CASE("pair representations are projections of the concatenations") {
    Fixture f;
    ad::Var enc = f.enc(4);
    InstanceSet set = build_instances({{0, 0}, {2, 2}}, {{3, 3}}, enc, f.proj);
    REQUIRE(set.n_rel == 1);

    const Instance& rel = set.items[set.rel_node(0)];
    ad::Var manual = ad::add(
        ad::matmul(ad::concat_cols(span_rep(enc, 0, 0), span_rep(enc, 2, 2)), f.proj.rel_w),
        f.proj.rel_b);
    for (std::size_t i = 0; i < manual.value().numel(); ++i) {
        CHECK(rel.init_rep.value()[i] == Catch::Approx(manual.value()[i]).epsilon(1e-12));
    }
}

TEST_CASE("two entities connect through their relation node") {
    Fixture f;
    InstanceSet set = build_instances({{0, 0}, {1, 1}}, {}, f.enc(2), f.proj);
    Tensor a = build_interaction_adjacency(set);
    REQUIRE(a.rows() == 3);
    // rel node is index 2; edges only rel-ent
    CHECK(a.at(0, 2) == 1.0);
    CHECK(a.at(1, 2) == 1.0);
    CHECK(a.at(0, 1) == 0.0);
    std::size_t off_diag = 0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j)
            if (a.at(i, j) != 0.0) ++off_diag;
    CHECK(off_diag == 2);
}

TEST_CASE("one entity and one trigger connect only via the argument node") {
    Fixture f;
    InstanceSet set = build_instances({{0, 0}}, {{1, 1}}, f.enc(2), f.proj);
    Tensor a = build_interaction_adjacency(set);
    REQUIRE(a.rows() == 3);
    std::size_t ent = set.ent_node(0), trg = set.trg_node(0), arg = set.arg_node(0);
    CHECK(a.at(ent, arg) == 1.0);
    CHECK(a.at(trg, arg) == 1.0);
    CHECK(a.at(ent, trg) == 0.0);
}

TEST_CASE("lone trigger only carries its self-loop") {
    Fixture f;
    InstanceSet set = build_instances({}, {{0, 0}}, f.enc(1), f.proj);
    Tensor a = build_interaction_adjacency(set);
    REQUIRE(a.rows() == 1);
    CHECK(a.at(0, 0) == 1.0);
}

TEST_CASE("interaction graph matches the pairwise rule oracle") {
    Rng rng(32);
    Fixture f;
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n_ent = rng.below(4);
        std::size_t n_trg = rng.below(3);
        std::size_t n = std::max<std::size_t>(1, n_ent + n_trg);
        std::vector<Span> es, ts;
        for (std::size_t i = 0; i < n_ent; ++i) es.push_back({i, i});
        for (std::size_t i = 0; i < n_trg; ++i) ts.push_back({n_ent + i, n_ent + i});
        ad::Var enc = ad::cst(Tensor({std::max<std::size_t>(1, n_ent + n_trg), f.d}));
        InstanceSet set = build_instances(es, ts, enc, f.proj);
        Tensor a = build_interaction_adjacency(set);

        for (std::size_t x = 0; x < set.size(); ++x) {
            for (std::size_t y = 0; y < set.size(); ++y) {
                double want = x == y ? 1.0 : (oracle_edge(set, x, y) ? 1.0 : 0.0);
                CHECK(a.at(x, y) == want);
            }
        }
    }
}

TEST_CASE("every relation and argument node has off-diagonal degree two") {
    Fixture f;
    InstanceSet set = build_instances(
        {{0, 0}, {1, 1}, {2, 2}}, {{3, 3}, {4, 4}}, f.enc(5), f.proj);
    Tensor a = build_interaction_adjacency(set);
    for (std::size_t k = 0; k < set.size(); ++k) {
        if (set.items[k].task != Task::Rel && set.items[k].task != Task::Arg) continue;
        std::size_t deg = 0;
        for (std::size_t j = 0; j < set.size(); ++j)
            if (j != k && a.at(k, j) != 0.0) ++deg;
        CHECK(deg == 2);
    }
}

TEST_CASE("adjacency is invariant under instance relabeling") {
    // permuting the entity order permutes the graph consistently
    Fixture f;
    ad::Var enc = f.enc(4);
    InstanceSet s1 = build_instances({{0, 0}, {1, 1}, {2, 2}}, {}, enc, f.proj);
    InstanceSet s2 = build_instances({{2, 2}, {0, 0}, {1, 1}}, {}, enc, f.proj);
    Tensor a1 = build_interaction_adjacency(s1);
    Tensor a2 = build_interaction_adjacency(s2);

    // s1 entity i sits at span (i,i); in s2 the entity with span (i,i)
    // has index perm[i]
    std::vector<std::size_t> perm = {1, 2, 0};
    auto node2 = [&](std::size_t node1) -> std::size_t {
        const Instance& inst = s1.items[node1];
        if (inst.task == Task::Ent) return s2.ent_node(perm[inst.a]);
        // rel node over entities (a,b) in s1 -> entities (perm[a], perm[b]) in s2
        std::size_t x = perm[inst.a], y = perm[inst.b];
        if (x > y) std::swap(x, y);
        std::size_t k = 0;
        for (std::size_t i = 0; i < s2.n_ent; ++i) {
            for (std::size_t j = i + 1; j < s2.n_ent; ++j, ++k) {
                if (i == x && j == y) return s2.rel_node(k);
            }
        }
        FAIL("pair not found");
        return 0;
    };
    for (std::size_t i = 0; i < s1.size(); ++i) {
        for (std::size_t j = 0; j < s1.size(); ++j) {
            CHECK(a1.at(i, j) == a2.at(node2(i), node2(j)));
        }
    }
}

TEST_CASE("classification stays inside the task partition and normalizes") {
    Fixture f;
    TypeInventory inv = demo_inventory();
    ad::Var enc = f.enc(4);
    InstanceSet set = build_instances({{0, 0}, {1, 1}}, {{2, 2}}, enc, f.proj);

    Rng rng(33);
    Tensor emb({inv.n_total(), f.d});
    for (auto& x : emb.data()) x = rng.uniform(-0.3, 0.3);
    ad::Var type_emb = ad::Var::leaf(emb, true);

    std::vector<ad::Var> reps;
    for (const Instance& inst : set.items) reps.push_back(inst.init_rep);
    classify_instances(set, ad::stack_rows(reps), inv, type_emb);

    for (const Instance& inst : set.items) {
        CHECK(inst.dist.value().cols() == inv.partition(inst.task).size());
        double sum = 0.0;
        for (double v : inst.dist.value().data()) sum += v;
        CHECK(sum == Catch::Approx(1.0).margin(1e-9));
        CHECK(inst.pred_local >= 0);
    }
    CHECK(set.items[set.ent_node(0)].dist.value().cols() == 3);
    CHECK(set.items[set.rel_node(0)].dist.value().cols() == 3);
    CHECK(set.items[set.arg_node(0)].dist.value().cols() == 4);
}

TEST_CASE("equal type embeddings give a uniform distribution") {
    Fixture f;
    TypeInventory inv = demo_inventory();
    ad::Var enc = f.enc(2);
    InstanceSet set = build_instances({{0, 0}}, {}, enc, f.proj);
    ad::Var type_emb = ad::Var::leaf(Tensor::full(inv.n_total(), f.d, 0.25), false);

    classify_instances(set, ad::stack_rows({set.items[0].init_rep}), inv, type_emb);
    for (double v : set.items[0].dist.value().data()) {
        CHECK(v == Catch::Approx(1.0 / 3.0).margin(1e-12));
    }
}

TEST_CASE("an aligned dominant type embedding takes all the probability") {
    Fixture f;
    TypeInventory inv = demo_inventory();
    Tensor encv({1, f.d}, {1.0, 0.0, 0.0, 0.0});
    InstanceSet set = build_instances({{0, 0}}, {}, ad::cst(encv), f.proj);

    Tensor emb({inv.n_total(), f.d});
    emb.at(1, 0) = 1e3; // Org aligned with the rep, scaled
    emb.at(0, 1) = 1.0; // others orthogonal
    emb.at(2, 2) = 1.0;
    classify_instances(set, ad::stack_rows({set.items[0].init_rep}), inv,
                       ad::Var::leaf(emb, false));
    CHECK(set.items[0].dist.value()[1] == Catch::Approx(1.0).margin(1e-9));
    CHECK(set.items[0].pred_local == 1);
}

TEST_CASE("type loss sums negative log-probabilities") {
    Fixture f;
    TypeInventory inv = demo_inventory();

    // single instance, uniform over |T_arg| + 2 more entity types case
    ad::Var enc = f.enc(3);
    InstanceSet set = build_instances({{0, 0}, {1, 1}}, {}, enc, f.proj);
    ad::Var uniform_emb = ad::Var::leaf(Tensor::full(inv.n_total(), f.d, 0.1), false);
    std::vector<ad::Var> reps;
    for (const Instance& inst : set.items) reps.push_back(inst.init_rep);
    classify_instances(set, ad::stack_rows(reps), inv, uniform_emb);

    set.items[0].gold_local = 0;
    set.items[1].gold_local = 1;
    set.items[2].gold_local = 0;
    double loss = type_loss(set).value().item();
    // two 3-way uniform entity instances + one 3-way uniform relation instance
    CHECK(loss == Catch::Approx(3.0 * std::log(3.0)).margin(1e-9));

    SECTION("additivity over instances") {
        double a = -std::log(set.items[0].dist.value()[0]);
        double b = -std::log(set.items[1].dist.value()[1]);
        double c = -std::log(set.items[2].dist.value()[0]);
        CHECK(loss == Catch::Approx(a + b + c).margin(1e-9));
    }

    SECTION("missing gold type is a contract violation") {
        set.items[1].gold_local = -1;
        CHECK_THROWS_AS(type_loss(set), ContractError);
    }
}

TEST_CASE("near-perfect predictions drive the type loss to zero") {
    TypeInventory inv = demo_inventory();
    Fixture f;
    InstanceSet set = build_instances({{0, 0}}, {}, ad::cst(Tensor({1, 4}, {1.0, 0, 0, 0})),
                                      f.proj);
    Tensor emb({inv.n_total(), 4});
    emb.at(0, 0) = 1e3;
    classify_instances(set, ad::stack_rows({set.items[0].init_rep}), inv,
                       ad::Var::leaf(emb, false));
    set.items[0].gold_local = 0;
    CHECK(type_loss(set).value().item() < 1e-6);
}

TEST_CASE("type loss gradient reaches the encoder rows") {
    Fixture f;
    TypeInventory inv = demo_inventory();
    ad::Var enc = f.enc(4);
    InstanceSet set = build_instances({{0, 0}, {2, 2}}, {{3, 3}}, enc, f.proj);

    Rng rng(34);
    Tensor emb({inv.n_total(), f.d});
    for (auto& x : emb.data()) x = rng.uniform(-0.4, 0.4);
    ad::Var type_emb = ad::Var::leaf(emb, true);

    auto forward = [&]() {
        InstanceSet s = build_instances({{0, 0}, {2, 2}}, {{3, 3}}, enc, f.proj);
        std::vector<ad::Var> reps;
        for (const Instance& inst : s.items) reps.push_back(inst.init_rep);
        classify_instances(s, ad::stack_rows(reps), inv, type_emb);
        for (std::size_t k = 0; k < s.size(); ++k) s.items[k].gold_local = 0;
        return type_loss(s);
    };
    ad::backward(forward());
    auto f_val = [&]() { return forward().value().item(); };

    for (ad::Var leaf : {enc, type_emb, f.proj.rel_w, f.proj.arg_b}) {
        for (std::size_t i = 0; i < leaf.value().numel(); i += 3) {
            double numeric = testsup::central_diff(f_val, leaf, i);
            CHECK(testsup::rel_err(leaf.grad()[i], numeric) < 1e-4);
        }
    }
}
