#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fourie/errors.hpp"
#include "fourie/model.hpp"

namespace fourie {

constexpr const char* kCheckpointTag = "fourie-ckpt/1";

// Self-describing model container: the format tag on the first line, then a
// single JSON object holding hyper-parameters, ablation flags, vocabulary,
// inventory and every parameter tensor with its shape.
struct Checkpoint {
    HyperParams hp;
    AblationFlags flags;
    std::vector<std::string> vocab_tokens;
    nlohmann::json inventory_json;
    std::vector<std::pair<std::string, Tensor>> params;

    static Checkpoint from_model(const Model& model, const AblationFlags& flags) {
        Checkpoint ck;
        ck.hp = model.hp();
        ck.flags = flags.normalized();
        ck.vocab_tokens = model.vocab().tokens();
        ck.inventory_json = model.inventory().to_json();
        for (const auto& [name, var] : model.parameters()) {
            ck.params.emplace_back(name, var.value());
        }
        return ck;
    }

    void save(std::ostream& out) const {
        nlohmann::json j;
        j["hp"] = hp.to_json();
        j["flags"] = flags.to_json();
        j["vocab"] = vocab_tokens;
        j["inventory"] = inventory_json;
        j["params"] = nlohmann::json::array();
        for (const auto& [name, tensor] : params) {
            j["params"].push_back(
                {{"name", name}, {"shape", tensor.shape()}, {"data", tensor.data()}});
        }
        out << kCheckpointTag << "\n" << j.dump() << "\n";
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("checkpoint: cannot write " + path);
        save(out);
    }

    static Checkpoint load(std::istream& in, const std::string& where) {
        std::string tag;
        if (!std::getline(in, tag) || tag != kCheckpointTag) {
            throw DataError(where + ": bad checkpoint tag \"" + tag + "\", expected " +
                            kCheckpointTag);
        }
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": corrupt checkpoint body: " + e.what());
        }
        Checkpoint ck;
        try {
            ck.hp = HyperParams::from_json(j.at("hp"));
            ck.flags = AblationFlags::from_json(j.at("flags"));
            ck.vocab_tokens = j.at("vocab").get<std::vector<std::string>>();
            ck.inventory_json = j.at("inventory");
            for (const auto& p : j.at("params")) {
                ck.params.emplace_back(
                    p.at("name").get<std::string>(),
                    Tensor(p.at("shape").get<std::vector<std::size_t>>(),
                           p.at("data").get<std::vector<double>>()));
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": incomplete checkpoint: " + e.what());
        }
        return ck;
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("checkpoint: cannot open " + path);
        return load(in, path);
    }
};

// Rebuild a model from a checkpoint; parameter names and shapes must match
// the architecture the hyper-parameters describe.
inline Model restore_model(const Checkpoint& ck) {
    Vocabulary vocab = Vocabulary::from_tokens(ck.vocab_tokens);
    TypeInventory inv = TypeInventory::from_json(ck.inventory_json);
    Rng rng(ck.hp.seed);
    Model model(ck.hp, std::move(vocab), std::move(inv), rng);
    auto live = model.parameters();
    if (live.size() != ck.params.size()) {
        throw DataError("checkpoint: expected " + std::to_string(live.size()) +
                        " parameter tensors, found " + std::to_string(ck.params.size()));
    }
    for (std::size_t i = 0; i < live.size(); ++i) {
        const auto& [name, tensor] = ck.params[i];
        if (name != live[i].first || tensor.shape() != live[i].second.value().shape()) {
            throw DataError("checkpoint: parameter " + std::to_string(i) + " is " + name +
                            tensor.shape_str() + ", expected " + live[i].first +
                            live[i].second.value().shape_str());
        }
        live[i].second.mutable_value() = tensor;
    }
    return model;
}

} // namespace fourie
