#pragma once

#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fourie/errors.hpp"

namespace fourie {

enum class Task : std::uint8_t { Ent = 0, Trg = 1, Rel = 2, Arg = 3 };

inline const char* task_name(Task t) {
    switch (t) {
        case Task::Ent: return "ent";
        case Task::Trg: return "trg";
        case Task::Rel: return "rel";
        case Task::Arg: return "arg";
    }
    return "?";
}

// The union type set: entity types, event types, relation types and argument
// roles, with one global index per type. Relation and role partitions carry
// an implicit None at local index 0; inventory files list real types only.
class TypeInventory {
public:
    static constexpr const char* kNone = "None";

    TypeInventory() = default;

    static TypeInventory make(std::vector<std::string> ents, std::vector<std::string> evts,
                              std::vector<std::string> rels, std::vector<std::string> roles) {
        TypeInventory inv;
        inv.ent_ = std::move(ents);
        inv.trg_ = std::move(evts);
        inv.rel_ = {kNone};
        for (auto& r : rels) inv.rel_.push_back(std::move(r));
        inv.arg_ = {kNone};
        for (auto& r : roles) inv.arg_.push_back(std::move(r));
        inv.finish();
        return inv;
    }

    static TypeInventory from_json(const nlohmann::json& j) {
        auto grab = [&](const char* key) {
            if (!j.contains(key) || !j.at(key).is_array()) {
                throw DataError(std::string("inventory: missing list \"") + key + "\"");
            }
            return j.at(key).get<std::vector<std::string>>();
        };
        auto ents = grab("entity_types");
        auto evts = grab("event_types");
        auto rels = grab("relation_types");
        auto roles = grab("argument_roles");
        for (const auto* part : {&rels, &roles}) {
            for (const auto& t : *part) {
                if (t == kNone) throw DataError("inventory: None is implicit, do not list it");
            }
        }
        return make(std::move(ents), std::move(evts), std::move(rels), std::move(roles));
    }

    static TypeInventory load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("inventory: cannot open " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError("inventory: " + path + ": " + e.what());
        }
        return from_json(j);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["entity_types"] = ent_;
        j["event_types"] = trg_;
        j["relation_types"] = std::vector<std::string>(rel_.begin() + 1, rel_.end());
        j["argument_roles"] = std::vector<std::string>(arg_.begin() + 1, arg_.end());
        return j;
    }

    const std::vector<std::string>& partition(Task t) const {
        switch (t) {
            case Task::Ent: return ent_;
            case Task::Trg: return trg_;
            case Task::Rel: return rel_;
            case Task::Arg: return arg_;
        }
        throw ContractError("inventory: bad task");
    }

    std::size_t offset(Task t) const {
        switch (t) {
            case Task::Ent: return 0;
            case Task::Trg: return ent_.size();
            case Task::Rel: return ent_.size() + trg_.size();
            case Task::Arg: return ent_.size() + trg_.size() + rel_.size();
        }
        throw ContractError("inventory: bad task");
    }

    std::size_t n_total() const { return ent_.size() + trg_.size() + rel_.size() + arg_.size(); }

    std::size_t global_index(Task t, std::size_t local) const { return offset(t) + local; }

    // Global indices of a partition, in local order (the paper's c_k vector).
    std::vector<std::size_t> global_indices(Task t) const {
        std::vector<std::size_t> out(partition(t).size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = offset(t) + i;
        return out;
    }

    // Local id of a named type within a partition; DataError if unknown.
    std::size_t local_id(Task t, const std::string& name) const {
        const auto& part = partition(t);
        for (std::size_t i = 0; i < part.size(); ++i)
            if (part[i] == name) return i;
        throw DataError(std::string("inventory: unknown ") + task_name(t) + " type \"" + name +
                        "\"");
    }

    const std::string& global_name(std::size_t g) const {
        for (Task t : {Task::Ent, Task::Trg, Task::Rel, Task::Arg}) {
            const auto& part = partition(t);
            if (g < offset(t) + part.size()) return part[g - offset(t)];
        }
        throw ContractError("inventory: global index out of range");
    }

    std::size_t none_local(Task t) const {
        if (t != Task::Rel && t != Task::Arg) {
            throw ContractError("inventory: None only exists for rel/arg");
        }
        return 0;
    }

private:
    void finish() {
        if (ent_.empty() || trg_.empty()) {
            throw DataError("inventory: entity and event partitions must be non-empty");
        }
        // None sits in both rel and arg partitions; everything else is unique
        std::unordered_map<std::string, int> seen;
        for (std::size_t pi = 0; pi < 4; ++pi) {
            const auto& part = partition(static_cast<Task>(pi));
            std::unordered_map<std::string, int> local;
            for (const auto& t : part) {
                if (t.empty()) throw DataError("inventory: empty type name");
                if (++local[t] > 1) throw DataError("inventory: duplicate type \"" + t + "\"");
                if (t != kNone && ++seen[t] > 1) {
                    throw DataError("inventory: type \"" + t + "\" appears in two partitions");
                }
            }
        }
    }

    std::vector<std::string> ent_, trg_, rel_, arg_;
};

} // namespace fourie
