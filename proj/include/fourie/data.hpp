#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fourie/crf.hpp"
#include "fourie/errors.hpp"
#include "fourie/rng.hpp"
#include "fourie/types.hpp"

namespace fourie {

constexpr const char* kCorpusHeader = "# fourie-corpus/1";

struct EntityMention {
    Span span;
    std::string type;
};

struct EventTrigger {
    Span span;
    std::string type;
};

struct RelationMention {
    std::size_t a = 0, b = 0; // entity indices, a < b; direction is as stored
    std::string type;
};

struct ArgumentMention {
    std::size_t trigger = 0, entity = 0;
    std::string role;
};

struct AnnotatedSentence {
    std::vector<std::string> tokens;
    std::vector<EntityMention> entities;
    std::vector<EventTrigger> triggers;
    std::vector<RelationMention> relations;
    std::vector<ArgumentMention> arguments;

    std::size_t size() const { return tokens.size(); }

    std::vector<Span> entity_spans() const {
        std::vector<Span> s;
        for (const auto& e : entities) s.push_back(e.span);
        return s;
    }
    std::vector<Span> trigger_spans() const {
        std::vector<Span> s;
        for (const auto& t : triggers) s.push_back(t.span);
        return s;
    }
};

using Corpus = std::vector<AnnotatedSentence>;

namespace data_detail {

inline bool overlaps(const Span& a, const Span& b) {
    return a.start <= b.end && b.start <= a.end;
}

inline void check_span_list(const std::vector<Span>& spans, std::size_t n, const char* what,
                            const std::string& where) {
    for (std::size_t i = 0; i < spans.size(); ++i) {
        if (spans[i].start > spans[i].end || spans[i].end >= n) {
            throw DataError(where + ": " + what + " span (" + std::to_string(spans[i].start) +
                            "," + std::to_string(spans[i].end) + ") out of range for " +
                            std::to_string(n) + " tokens");
        }
        for (std::size_t j = i + 1; j < spans.size(); ++j) {
            if (overlaps(spans[i], spans[j])) {
                throw DataError(where + ": overlapping " + std::string(what) + " spans");
            }
        }
    }
}

} // namespace data_detail

// Full structural validation against the inventory. `where` names the source
// location for error messages (e.g. "corpus.jsonl:7").
inline void validate_sentence(const AnnotatedSentence& s, const TypeInventory& inv,
                              const std::string& where) {
    if (s.tokens.empty()) throw DataError(where + ": sentence has no tokens");
    for (const auto& t : s.tokens)
        if (t.empty()) throw DataError(where + ": empty token");

    data_detail::check_span_list(s.entity_spans(), s.size(), "entity", where);
    data_detail::check_span_list(s.trigger_spans(), s.size(), "trigger", where);

    for (const auto& e : s.entities) inv.local_id(Task::Ent, e.type);
    for (const auto& t : s.triggers) inv.local_id(Task::Trg, t.type);

    std::set<std::pair<std::size_t, std::size_t>> rel_pairs;
    for (const auto& r : s.relations) {
        if (r.b >= s.entities.size() || r.a >= r.b) {
            throw DataError(where + ": relation pair (" + std::to_string(r.a) + "," +
                            std::to_string(r.b) + ") must reference entities with a < b");
        }
        if (r.type == TypeInventory::kNone) {
            throw DataError(where + ": gold relations never carry None; omit the pair instead");
        }
        inv.local_id(Task::Rel, r.type);
        if (!rel_pairs.insert({r.a, r.b}).second) {
            throw DataError(where + ": duplicate relation for entity pair (" +
                            std::to_string(r.a) + "," + std::to_string(r.b) + ")");
        }
    }

    std::set<std::pair<std::size_t, std::size_t>> arg_pairs;
    for (const auto& a : s.arguments) {
        if (a.trigger >= s.triggers.size() || a.entity >= s.entities.size()) {
            throw DataError(where + ": argument references trigger " + std::to_string(a.trigger) +
                            " / entity " + std::to_string(a.entity) + " of " +
                            std::to_string(s.triggers.size()) + "/" +
                            std::to_string(s.entities.size()));
        }
        if (a.role == TypeInventory::kNone) {
            throw DataError(where + ": gold arguments never carry None; omit the pair instead");
        }
        inv.local_id(Task::Arg, a.role);
        if (!arg_pairs.insert({a.trigger, a.entity}).second) {
            throw DataError(where + ": duplicate argument for (trigger " +
                            std::to_string(a.trigger) + ", entity " + std::to_string(a.entity) +
                            ")");
        }
    }
}

// Sort mentions by span and remap relation/argument indices accordingly.
inline AnnotatedSentence canonicalize(const AnnotatedSentence& s) {
    AnnotatedSentence out = s;
    std::vector<std::size_t> eperm(s.entities.size()), tperm(s.triggers.size());
    for (std::size_t i = 0; i < eperm.size(); ++i) eperm[i] = i;
    for (std::size_t i = 0; i < tperm.size(); ++i) tperm[i] = i;
    std::sort(eperm.begin(), eperm.end(),
              [&](std::size_t a, std::size_t b) { return s.entities[a].span < s.entities[b].span; });
    std::sort(tperm.begin(), tperm.end(),
              [&](std::size_t a, std::size_t b) { return s.triggers[a].span < s.triggers[b].span; });

    std::vector<std::size_t> einv(eperm.size()), tinv(tperm.size());
    for (std::size_t i = 0; i < eperm.size(); ++i) {
        out.entities[i] = s.entities[eperm[i]];
        einv[eperm[i]] = i;
    }
    for (std::size_t i = 0; i < tperm.size(); ++i) {
        out.triggers[i] = s.triggers[tperm[i]];
        tinv[tperm[i]] = i;
    }
    for (auto& r : out.relations) {
        r.a = einv[r.a];
        r.b = einv[r.b];
        if (r.a > r.b) std::swap(r.a, r.b);
    }
    for (auto& a : out.arguments) {
        a.trigger = tinv[a.trigger];
        a.entity = einv[a.entity];
    }
    std::sort(out.relations.begin(), out.relations.end(),
              [](const RelationMention& x, const RelationMention& y) {
                  return std::tie(x.a, x.b) < std::tie(y.a, y.b);
              });
    std::sort(out.arguments.begin(), out.arguments.end(),
              [](const ArgumentMention& x, const ArgumentMention& y) {
                  return std::tie(x.trigger, x.entity) < std::tie(y.trigger, y.entity);
              });
    return out;
}

inline nlohmann::json sentence_to_json(const AnnotatedSentence& s) {
    nlohmann::json j;
    j["tokens"] = s.tokens;
    j["entities"] = nlohmann::json::array();
    for (const auto& e : s.entities) {
        j["entities"].push_back({{"span", {e.span.start, e.span.end}}, {"type", e.type}});
    }
    j["triggers"] = nlohmann::json::array();
    for (const auto& t : s.triggers) {
        j["triggers"].push_back({{"span", {t.span.start, t.span.end}}, {"type", t.type}});
    }
    j["relations"] = nlohmann::json::array();
    for (const auto& r : s.relations) {
        j["relations"].push_back({{"args", {r.a, r.b}}, {"type", r.type}});
    }
    j["arguments"] = nlohmann::json::array();
    for (const auto& a : s.arguments) {
        j["arguments"].push_back(
            {{"trigger", a.trigger}, {"entity", a.entity}, {"role", a.role}});
    }
    return j;
}

inline AnnotatedSentence sentence_from_json(const nlohmann::json& j, const std::string& where) {
    try {
        AnnotatedSentence s;
        s.tokens = j.at("tokens").get<std::vector<std::string>>();
        if (j.contains("entities")) {
            for (const auto& e : j.at("entities")) {
                s.entities.push_back(
                    {{e.at("span").at(0).get<std::size_t>(), e.at("span").at(1).get<std::size_t>()},
                     e.at("type").get<std::string>()});
            }
        }
        if (j.contains("triggers")) {
            for (const auto& t : j.at("triggers")) {
                s.triggers.push_back(
                    {{t.at("span").at(0).get<std::size_t>(), t.at("span").at(1).get<std::size_t>()},
                     t.at("type").get<std::string>()});
            }
        }
        if (j.contains("relations")) {
            for (const auto& r : j.at("relations")) {
                s.relations.push_back({r.at("args").at(0).get<std::size_t>(),
                                       r.at("args").at(1).get<std::size_t>(),
                                       r.at("type").get<std::string>()});
            }
        }
        if (j.contains("arguments")) {
            for (const auto& a : j.at("arguments")) {
                s.arguments.push_back({a.at("trigger").get<std::size_t>(),
                                       a.at("entity").get<std::size_t>(),
                                       a.at("role").get<std::string>()});
            }
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(where + ": malformed record: " + e.what());
    }
}

inline Corpus load_corpus(const std::string& path, const TypeInventory& inv) {
    std::ifstream in(path);
    if (!in) throw DataError("corpus: cannot open " + path);
    Corpus corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::string where = path + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": invalid JSON: " + e.what());
        }
        AnnotatedSentence s = sentence_from_json(j, where);
        validate_sentence(s, inv, where);
        corpus.push_back(canonicalize(s)); // downstream code assumes span order
    }
    return corpus;
}

inline void save_corpus(const Corpus& corpus, std::ostream& out) {
    out << kCorpusHeader << "\n";
    for (const auto& s : corpus) out << sentence_to_json(canonicalize(s)).dump() << "\n";
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("corpus: cannot write " + path);
    save_corpus(corpus, out);
}

// ----- synthetic corpus generation -----

// Planted dependency rules. Relations are a function of the unordered entity
// type pair and roles a function of (event type, entity type), so the tasks
// stay learnable from surface tokens alone.
struct SynthSpec {
    std::size_t sentences = 20;
    TypeInventory inventory;
    std::vector<std::array<std::string, 3>> relation_rules; // (ent_a, rel, ent_b)
    std::vector<std::array<std::string, 3>> argument_rules; // (evt, role, ent)
    std::size_t min_entities = 1, max_entities = 3;
    std::size_t min_triggers = 0, max_triggers = 2;
    std::size_t surface_forms = 3; // distinct token shapes per type
};

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    SynthSpec spec;
    try {
        spec.inventory = TypeInventory::from_json(j.at("inventory"));
        spec.sentences = j.value("sentences", spec.sentences);
        spec.min_entities = j.value("min_entities", spec.min_entities);
        spec.max_entities = j.value("max_entities", spec.max_entities);
        spec.min_triggers = j.value("min_triggers", spec.min_triggers);
        spec.max_triggers = j.value("max_triggers", spec.max_triggers);
        spec.surface_forms = j.value("surface_forms", spec.surface_forms);
        for (const auto& r : j.value("relation_rules", nlohmann::json::array())) {
            spec.relation_rules.push_back({r.at(0).get<std::string>(), r.at(1).get<std::string>(),
                                           r.at(2).get<std::string>()});
        }
        for (const auto& r : j.value("argument_rules", nlohmann::json::array())) {
            spec.argument_rules.push_back({r.at(0).get<std::string>(), r.at(1).get<std::string>(),
                                           r.at(2).get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("synthetic spec: ") + e.what());
    }
    return spec;
}

inline Corpus generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
    const TypeInventory& inv = spec.inventory;
    if (spec.sentences == 0 || spec.min_entities == 0 || spec.min_entities > spec.max_entities ||
        spec.min_triggers > spec.max_triggers || spec.surface_forms == 0) {
        throw ConfigError("synthetic: inconsistent size parameters");
    }

    // rule tables must be functional in their key pair; relation rules apply
    // to the unordered type pair
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> rel_rule, arg_rule;
    for (const auto& r : spec.relation_rules) {
        std::size_t ta = inv.local_id(Task::Ent, r[0]);
        std::size_t tb = inv.local_id(Task::Ent, r[2]);
        auto key = std::make_pair(std::min(ta, tb), std::max(ta, tb));
        std::size_t rel = inv.local_id(Task::Rel, r[1]);
        if (rel == inv.none_local(Task::Rel)) throw ConfigError("synthetic: rule labels None");
        auto [it, fresh] = rel_rule.emplace(key, rel);
        if (!fresh && it->second != rel) {
            throw ConfigError("synthetic: conflicting relation rules for (" + r[0] + "," + r[2] +
                              ")");
        }
    }
    for (const auto& r : spec.argument_rules) {
        auto key = std::make_pair(inv.local_id(Task::Trg, r[0]), inv.local_id(Task::Ent, r[2]));
        std::size_t role = inv.local_id(Task::Arg, r[1]);
        if (role == inv.none_local(Task::Arg)) throw ConfigError("synthetic: rule labels None");
        auto [it, fresh] = arg_rule.emplace(key, role);
        if (!fresh && it->second != role) {
            throw ConfigError("synthetic: conflicting argument rules for (" + r[0] + "," + r[2] +
                              ")");
        }
    }

    auto lower = [](std::string s) {
        for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    const std::vector<std::string> fillers = {"the", "a", "and", "then", "near", "said"};

    Rng rng(seed);
    Corpus corpus;
    corpus.reserve(spec.sentences);
    for (std::size_t si = 0; si < spec.sentences; ++si) {
        AnnotatedSentence s;
        std::size_t n_ent =
            spec.min_entities + rng.below(spec.max_entities - spec.min_entities + 1);
        std::size_t n_trg =
            spec.min_triggers + rng.below(spec.max_triggers - spec.min_triggers + 1);

        // mention plan: entity/trigger ids in random interleaving
        std::vector<int> plan; // >=0: entity slot, <0: trigger slot -(k+1)
        for (std::size_t i = 0; i < n_ent; ++i) plan.push_back(static_cast<int>(i));
        for (std::size_t i = 0; i < n_trg; ++i) plan.push_back(-static_cast<int>(i) - 1);
        rng.shuffle(plan);

        std::vector<std::size_t> ent_types(n_ent), trg_types(n_trg);
        for (auto& t : ent_types) t = rng.below(inv.partition(Task::Ent).size());
        for (auto& t : trg_types) t = rng.below(inv.partition(Task::Trg).size());

        std::vector<EntityMention> ents(n_ent);
        std::vector<EventTrigger> trgs(n_trg);
        for (int slot : plan) {
            for (std::size_t f = rng.below(3); f > 0; --f)
                s.tokens.push_back(fillers[rng.below(fillers.size())]);
            if (slot >= 0) {
                std::size_t t = ent_types[static_cast<std::size_t>(slot)];
                std::string base = lower(inv.partition(Task::Ent)[t]) + "_" +
                                   std::to_string(rng.below(spec.surface_forms));
                std::size_t start = s.tokens.size();
                s.tokens.push_back(base);
                ents[static_cast<std::size_t>(slot)] = {{start, start},
                                                        inv.partition(Task::Ent)[t]};
            } else {
                std::size_t k = static_cast<std::size_t>(-slot - 1);
                std::size_t t = trg_types[k];
                std::string base = lower(inv.partition(Task::Trg)[t]) + "_" +
                                   std::to_string(rng.below(spec.surface_forms));
                std::size_t start = s.tokens.size();
                s.tokens.push_back(base);
                std::size_t end = start;
                if (rng.below(4) == 0) { // occasional multi-word trigger
                    s.tokens.push_back(base + "_x");
                    end = start + 1;
                }
                trgs[k] = {{start, end}, inv.partition(Task::Trg)[t]};
            }
        }
        if (rng.below(2) == 0) s.tokens.push_back(fillers[rng.below(fillers.size())]);

        s.entities = std::move(ents);
        s.triggers = std::move(trgs);

        for (std::size_t i = 0; i < n_ent; ++i) {
            for (std::size_t j = i + 1; j < n_ent; ++j) {
                auto it = rel_rule.find({std::min(ent_types[i], ent_types[j]),
                                         std::max(ent_types[i], ent_types[j])});
                if (it != rel_rule.end()) {
                    s.relations.push_back({i, j, inv.partition(Task::Rel)[it->second]});
                }
            }
        }
        for (std::size_t t = 0; t < n_trg; ++t) {
            for (std::size_t e = 0; e < n_ent; ++e) {
                auto it = arg_rule.find({trg_types[t], ent_types[e]});
                if (it != arg_rule.end()) {
                    s.arguments.push_back({t, e, inv.partition(Task::Arg)[it->second]});
                }
            }
        }

        AnnotatedSentence canon = canonicalize(s);
        validate_sentence(canon, inv, "synthetic:" + std::to_string(si));
        corpus.push_back(std::move(canon));
    }
    return corpus;
}

// ----- scoring -----

struct MetricCounts {
    std::size_t gold = 0, pred = 0, matched = 0;

    double precision() const { return pred == 0 ? 0.0 : static_cast<double>(matched) / pred; }
    double recall() const { return gold == 0 ? 0.0 : static_cast<double>(matched) / gold; }
    double f1() const {
        double p = precision(), r = recall();
        return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
};

struct MetricReport {
    MetricCounts ent_c, trg_i, trg_c, rel_c, arg_i, arg_c;

    double avg4_f1() const {
        return (ent_c.f1() + trg_c.f1() + rel_c.f1() + arg_c.f1()) / 4.0;
    }

    std::vector<std::pair<std::string, const MetricCounts*>> named() const {
        return {{"Ent-C", &ent_c}, {"Trg-I", &trg_i}, {"Trg-C", &trg_c},
                {"Rel-C", &rel_c}, {"Arg-I", &arg_i}, {"Arg-C", &arg_c}};
    }
};

namespace data_detail {

// Greedy one-to-one matching of key multisets.
template <class Key>
inline void match_counts(const std::vector<Key>& gold, const std::vector<Key>& pred,
                         MetricCounts& m) {
    m.gold += gold.size();
    m.pred += pred.size();
    std::multiset<Key> pool(gold.begin(), gold.end());
    for (const Key& k : pred) {
        auto it = pool.find(k);
        if (it != pool.end()) {
            pool.erase(it);
            ++m.matched;
        }
    }
}

} // namespace data_detail

inline MetricReport score(const Corpus& gold, const Corpus& pred) {
    if (gold.size() != pred.size()) {
        throw ContractError("score: corpus sizes differ (" + std::to_string(gold.size()) +
                            " vs " + std::to_string(pred.size()) + ")");
    }
    MetricReport rep;
    using SpanKey = std::tuple<std::size_t, std::size_t>;
    using TypedSpan = std::tuple<std::size_t, std::size_t, std::string>;
    using RelKey = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t, std::string>;
    using ArgKey = std::tuple<std::size_t, std::size_t, std::string>;          // ent span + evt type
    using ArgCKey = std::tuple<std::size_t, std::size_t, std::string, std::string>;

    for (std::size_t si = 0; si < gold.size(); ++si) {
        const auto& g = gold[si];
        const auto& p = pred[si];

        auto typed_spans = [](const auto& items) {
            std::vector<TypedSpan> out;
            for (const auto& e : items) out.push_back({e.span.start, e.span.end, e.type});
            return out;
        };
        auto bare_spans = [](const auto& items) {
            std::vector<SpanKey> out;
            for (const auto& e : items) out.push_back({e.span.start, e.span.end});
            return out;
        };

        data_detail::match_counts(typed_spans(g.entities), typed_spans(p.entities), rep.ent_c);
        data_detail::match_counts(bare_spans(g.triggers), bare_spans(p.triggers), rep.trg_i);
        data_detail::match_counts(typed_spans(g.triggers), typed_spans(p.triggers), rep.trg_c);

        auto rel_keys = [](const AnnotatedSentence& s) {
            std::vector<RelKey> out;
            for (const auto& r : s.relations) {
                const Span& a = s.entities[r.a].span;
                const Span& b = s.entities[r.b].span;
                out.push_back({a.start, a.end, b.start, b.end, r.type});
            }
            return out;
        };
        data_detail::match_counts(rel_keys(g), rel_keys(p), rep.rel_c);

        // argument identification: entity span + event type of the trigger
        auto arg_i_keys = [](const AnnotatedSentence& s) {
            std::vector<ArgKey> out;
            for (const auto& a : s.arguments) {
                const Span& e = s.entities[a.entity].span;
                out.push_back({e.start, e.end, s.triggers[a.trigger].type});
            }
            return out;
        };
        auto arg_c_keys = [](const AnnotatedSentence& s) {
            std::vector<ArgCKey> out;
            for (const auto& a : s.arguments) {
                const Span& e = s.entities[a.entity].span;
                out.push_back({e.start, e.end, s.triggers[a.trigger].type, a.role});
            }
            return out;
        };
        data_detail::match_counts(arg_i_keys(g), arg_i_keys(p), rep.arg_i);
        data_detail::match_counts(arg_c_keys(g), arg_c_keys(p), rep.arg_c);
    }
    return rep;
}

} // namespace fourie
