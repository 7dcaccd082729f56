#pragma once

#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fourie/checkpoint.hpp"
#include "fourie/data.hpp"
#include "fourie/errors.hpp"
#include "fourie/model.hpp"
#include "fourie/rng.hpp"

namespace fourie {

struct LossBundle {
    double l_span_ent = 0.0;
    double l_span_trg = 0.0;
    double l_type = 0.0;
    double l_dep = 0.0;
    double total = 0.0;

    static LossBundle of(double e, double t, double ty, double d, double lambda) {
        LossBundle b{e, t, ty, d, 0.0};
        b.total = e + t + ty + lambda * d;
        return b;
    }
};

class Adam {
public:
    Adam(std::vector<std::pair<std::string, ad::Var>> params, double lr)
        : params_(std::move(params)), lr_(lr) {
        for (const auto& [name, var] : params_) {
            m_.emplace_back(var.value().shape(), 0.0);
            v_.emplace_back(var.value().shape(), 0.0);
        }
    }

    void step() {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, t_);
        double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t p = 0; p < params_.size(); ++p) {
            ad::Var& var = params_[p].second;
            const Tensor& g = var.grad();
            Tensor& value = var.mutable_value();
            for (std::size_t i = 0; i < value.numel(); ++i) {
                m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g[i];
                v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g[i] * g[i];
                double mhat = m_[p][i] / bc1;
                double vhat = v_[p][i] / bc2;
                value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    void zero_grad() {
        for (auto& [name, var] : params_) var.zero_grad();
    }

private:
    std::vector<std::pair<std::string, ad::Var>> params_;
    std::vector<Tensor> m_, v_;
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
};

inline void clip_global_norm(const std::vector<std::pair<std::string, ad::Var>>& params,
                             double max_norm) {
    double sq = 0.0;
    for (const auto& [name, var] : params)
        for (double g : var.grad().data()) sq += g * g;
    double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return;
    double s = max_norm / norm;
    for (const auto& [name, var] : params) {
        ad::Var v = var;
        for (double& g : v.grad().data()) g *= s;
    }
}

// One optimizer update over a batch of validated sentences.
inline LossBundle train_step(Model& model, const std::vector<const AnnotatedSentence*>& batch,
                             const AblationFlags& raw_flags, GumbelSource& noise, Adam& adam) {
    if (batch.empty()) throw ContractError("train_step: empty batch");
    AblationFlags flags = raw_flags.normalized();
    const HyperParams& hp = model.hp();

    // contributions summed in sentence order to keep accumulation
    // deterministic
    ad::Var sum_ent, sum_trg, sum_type, sum_dep;
    auto acc = [](ad::Var& slot, const ad::Var& term) {
        slot = slot.defined() ? ad::add(slot, term) : term;
    };
    for (const AnnotatedSentence* s : batch) {
        SentenceLosses l = model.forward_train(*s, flags, noise);
        acc(sum_ent, l.span_ent);
        acc(sum_trg, l.span_trg);
        acc(sum_type, l.type);
        if (flags.use_gcn_type) acc(sum_dep, l.dep);
    }

    double dep_value = flags.use_gcn_type ? sum_dep.value().item() : 0.0;
    LossBundle bundle = LossBundle::of(sum_ent.value().item(), sum_trg.value().item(),
                                       sum_type.value().item(), dep_value, hp.lambda);
    auto check = [](double v, const char* term) {
        if (!std::isfinite(v)) {
            throw Error(std::string("train_step: non-finite loss term ") + term + " = " +
                        std::to_string(v));
        }
    };
    check(bundle.l_span_ent, "l_span_ent");
    check(bundle.l_span_trg, "l_span_trg");
    check(bundle.l_type, "l_type");
    check(bundle.l_dep, "l_dep");

    ad::Var total = ad::add(ad::add(sum_ent, sum_trg), sum_type);
    if (flags.use_gcn_type && hp.lambda != 0.0) {
        total = ad::add(total, ad::scale(sum_dep, hp.lambda));
    }

    auto params = model.parameters();
    adam.zero_grad();
    ad::backward(total);
    clip_global_norm(params, hp.grad_clip);
    adam.step();
    return bundle;
}

struct EpochRow {
    int epoch = 0;
    LossBundle losses;
    MetricReport dev;
    bool best = false;
};

struct FitResult {
    Checkpoint checkpoint;
    std::vector<std::string> log_lines; // header line + one line per epoch
    int best_epoch = 0;
    double best_avg4 = 0.0;
    std::vector<EpochRow> rows;
};

inline nlohmann::json report_to_json(const MetricReport& rep) {
    nlohmann::json j;
    for (const auto& [name, counts] : rep.named()) {
        j[name] = {{"precision", counts->precision()},
                   {"recall", counts->recall()},
                   {"f1", counts->f1()},
                   {"gold", counts->gold},
                   {"pred", counts->pred},
                   {"matched", counts->matched}};
    }
    return j;
}

// Full training loop: shuffled mini-batches, per-epoch dev decoding, best
// epoch selected by the mean dev F1 of the four classification metrics.
inline FitResult fit(const Corpus& train, const Corpus& dev, const HyperParams& hp,
                     const AblationFlags& raw_flags, const TypeInventory& inv) {
    hp.validate();
    if (train.empty()) throw ConfigError("fit: training split is empty");
    if (dev.empty()) throw ConfigError("fit: dev split is empty");
    AblationFlags flags = raw_flags.normalized();

    std::vector<std::vector<std::string>> token_lists;
    for (const auto& s : train) token_lists.push_back(s.tokens);
    Vocabulary vocab = Vocabulary::build(token_lists);

    Rng rng(hp.seed);
    Model model(hp, vocab, inv, rng);
    Adam adam(model.parameters(), hp.learning_rate);
    GumbelSource noise(rng, GumbelSource::Mode::Fresh);

    FitResult result;
    nlohmann::json header = {{"run", "fourie-train"},
                             {"seed", hp.seed},
                             {"hp", hp.to_json()},
                             {"flags", flags.to_json()},
                             {"train_sentences", train.size()},
                             {"dev_sentences", dev.size()}};
    result.log_lines.push_back(header.dump());

    auto snapshot = [&]() { return Checkpoint::from_model(model, flags); };
    result.checkpoint = snapshot();
    result.best_epoch = 0;
    result.best_avg4 = -1.0;

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        rng.shuffle(order);
        LossBundle epoch_sum;
        for (std::size_t off = 0; off < order.size();
             off += static_cast<std::size_t>(hp.batch_size)) {
            std::vector<const AnnotatedSentence*> batch;
            for (std::size_t i = off;
                 i < std::min(order.size(), off + static_cast<std::size_t>(hp.batch_size)); ++i) {
                batch.push_back(&train[order[i]]);
            }
            LossBundle b = train_step(model, batch, flags, noise, adam);
            epoch_sum.l_span_ent += b.l_span_ent;
            epoch_sum.l_span_trg += b.l_span_trg;
            epoch_sum.l_type += b.l_type;
            epoch_sum.l_dep += b.l_dep;
        }
        epoch_sum.total = epoch_sum.l_span_ent + epoch_sum.l_span_trg + epoch_sum.l_type +
                          hp.lambda * epoch_sum.l_dep;

        Corpus dev_pred;
        dev_pred.reserve(dev.size());
        for (const auto& s : dev) dev_pred.push_back(model.predict(s, flags));
        MetricReport rep = score(dev, dev_pred);
        double avg4 = rep.avg4_f1();

        EpochRow row{epoch, epoch_sum, rep, false};
        if (avg4 > result.best_avg4) {
            result.best_avg4 = avg4;
            result.best_epoch = epoch;
            result.checkpoint = snapshot();
            row.best = true;
        }
        result.rows.push_back(row);

        nlohmann::json line = {{"epoch", epoch},
                               {"l_span_ent", epoch_sum.l_span_ent},
                               {"l_span_trg", epoch_sum.l_span_trg},
                               {"l_type", epoch_sum.l_type},
                               {"l_dep", epoch_sum.l_dep},
                               {"total", epoch_sum.total},
                               {"dev", report_to_json(rep)},
                               {"dev_avg4", avg4},
                               {"best", row.best}};
        result.log_lines.push_back(line.dump());
    }
    return result;
}

} // namespace fourie
