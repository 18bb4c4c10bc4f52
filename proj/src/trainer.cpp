#include "tapir/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "tapir/evalkit.hpp"
#include "tapir/init.hpp"
#include "tapir/memory.hpp"
#include "tapir/ops.hpp"
#include "tapir/optim.hpp"

namespace tapir {

namespace {

void log_line(std::ostream* log, int epoch, const char* split, double loss, double metric,
              double lr) {
    if (log == nullptr) return;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch=%d split=%s loss=%.6f metric=%.6f lr=%.8f\n", epoch,
                  split, loss, metric, lr);
    *log << buf;
    log->flush();
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
        std::swap(idx[i - 1], idx[j]);
    }
}

struct ParamSnapshot {
    std::vector<std::vector<real>> values;

    static ParamSnapshot take(const std::vector<Tensor>& params) {
        ParamSnapshot s;
        for (const Tensor& p : params) s.values.push_back(p.value());
        return s;
    }
    void restore(std::vector<Tensor>& params) const {
        for (std::size_t i = 0; i < params.size(); ++i) params[i].value() = values[i];
    }
};

std::vector<Tensor> to_plain(const std::vector<NamedTensor>& named) {
    std::vector<Tensor> out;
    out.reserve(named.size());
    for (const auto& nt : named) out.push_back(nt.tensor);
    return out;
}

void ensure_labels_covered(const Corpus& corpus, const LabelSet& labels) {
    for (const auto& name : corpus.label_set) labels.id_of(name);
}

}  // namespace

double encoder_task_metric(const EncoderModel& model, const Corpus& corpus) {
    if (model.labels.is_iob()) {
        std::vector<std::vector<std::string>> pred, gold;
        for (const auto& s : corpus.sentences) {
            const auto ids = encode(s, model.vocab);
            const auto y = model.predict(ids, AttentionMask::None);
            std::vector<std::string> row;
            for (int id : y) row.push_back(model.labels.id_to_label[static_cast<std::size_t>(id)]);
            pred.push_back(std::move(row));
            gold.push_back(s.labels);
        }
        return span_f1_iob(pred, gold).f1;
    }
    std::vector<std::vector<int>> pred, gold;
    for (const auto& s : corpus.sentences) {
        pred.push_back(model.predict(encode(s, model.vocab), AttentionMask::None));
        gold.push_back(encode_labels(s, model.labels));
    }
    return token_accuracy(pred, gold);
}

EncoderModel train_encoder(const Corpus& train, const Corpus* val, const Config& cfg,
                           EncoderPurpose purpose, std::ostream* log, TrainStats* stats) {
    const bool generator = purpose == EncoderPurpose::ActionGenerator;
    if (generator && cfg.reviser_layers != 1) {
        throw ConfigError("the action generator requires reviser_layers=1");
    }

    EncoderModel model;
    model.kind = generator ? ReviserKind::LinearTransformer : cfg.reviser_kind;
    model.vocab = Vocab::build(train);
    model.labels = LabelSet::build(train);
    if (val != nullptr) ensure_labels_covered(*val, model.labels);

    Rng master(cfg.seed);
    Rng init_rng = master.fork(1);
    Rng dropout_rng = master.fork(2);
    Rng unk_rng = master.fork(3);
    Rng shuffle_rng = master.fork(4);

    model.embeddings = cfg.embeddings_path.empty()
                           ? random_embeddings(model.vocab, cfg.embed_dim, init_rng)
                           : load_embeddings(cfg.embeddings_path, model.vocab, cfg.embed_dim,
                                             init_rng);
    if (model.kind == ReviserKind::Transformer) {
        model.trf = TransformerEncoder(cfg.embed_dim, cfg.d_model, cfg.ffn_dim, cfg.heads,
                                       cfg.reviser_layers, model.labels.size(), init_rng);
    } else {
        model.lt = LinearTransformerEncoder(cfg.embed_dim, cfg.d_model, cfg.ffn_dim, cfg.heads,
                                            cfg.reviser_layers, model.labels.size(), init_rng);
    }

    std::vector<NamedTensor> named;
    model.collect_params(named, true);
    std::vector<Tensor> params = to_plain(named);
    AdamW opt(params, {static_cast<real>(cfg.lr), real(0.9), real(0.98),
                       static_cast<real>(cfg.adam_eps), static_cast<real>(cfg.weight_decay)});

    // the generator mimics an RNN: causal mask during training
    const AttentionMask mask = generator ? AttentionMask::Causal : AttentionMask::None;

    std::vector<std::vector<int>> all_ids, all_gold;
    for (const auto& s : train.sentences) {
        all_ids.push_back(encode(s, model.vocab));
        all_gold.push_back(encode_labels(s, model.labels));
    }

    std::vector<std::size_t> order(train.sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const bool early_stop = !generator && val != nullptr;
    ParamSnapshot best;
    double best_metric = -1.0;
    int best_epoch = -1;
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const real lr = lr_schedule(epoch, static_cast<real>(cfg.lr), cfg.warmup_epochs);
        shuffle_indices(order, shuffle_rng);
        double loss_sum = 0.0;
        long correct = 0, total = 0;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t batch_end = std::min(done + static_cast<std::size_t>(cfg.batch),
                                                   order.size());
            const real inv_batch = real(1) / static_cast<real>(batch_end - done);
            opt.zero_grad();
            for (std::size_t b = done; b < batch_end; ++b) {
                std::vector<int> ids = all_ids[order[b]];
                apply_unk_mask(ids, cfg.unk_prob, unk_rng);
                const auto& gold = all_gold[order[b]];
                Tape tape;
                {
                    TapeScope scope(tape);
                    Tensor logits = model.logits(ids, mask, static_cast<real>(cfg.dropout),
                                                 &dropout_rng, true);
                    Tensor loss = cross_entropy(logits, gold);
                    const double lv = static_cast<double>(loss.item());
                    if (!std::isfinite(lv)) {
                        throw NumericError("training diverged: non-finite loss at epoch " +
                                           std::to_string(epoch));
                    }
                    loss_sum += lv;
                    for (int i = 0; i < logits.dim(0); ++i) {
                        ++total;
                        if (argmax_row(logits, i) == gold[static_cast<std::size_t>(i)]) ++correct;
                    }
                    tape.backward(scale(loss, inv_batch));
                }
            }
            clip_global_norm(params, static_cast<real>(cfg.clip));
            opt.step(lr);
            done = batch_end;
        }
        const double train_loss = loss_sum / static_cast<double>(order.size());
        const double train_acc = total > 0 ? static_cast<double>(correct) / total : 0.0;
        log_line(log, epoch, "train", train_loss, train_acc, lr);
        if (stats != nullptr) stats->train_losses.push_back(train_loss);

        if (early_stop) {
            const double metric = encoder_task_metric(model, *val);
            log_line(log, epoch, "val", 0.0, metric, lr);
            if (metric > best_metric) {
                best_metric = metric;
                best_epoch = epoch;
                best = ParamSnapshot::take(params);
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                if (stats != nullptr) stats->epochs_run = epoch + 1;
                break;
            }
        }
        if (stats != nullptr) stats->epochs_run = epoch + 1;
    }

    if (early_stop && best_epoch >= 0) {
        best.restore(params);
        if (stats != nullptr) {
            stats->best_epoch = best_epoch;
            stats->best_metric = best_metric;
        }
    }
    return model;
}

TapirModel train_tapir(const Corpus& train, const Corpus* val, const Config& cfg,
                       const std::vector<ActionSeq>& actions, const EncoderModel& reviser,
                       std::ostream* log, TrainStats* stats) {
    if (actions.size() != train.sentences.size()) {
        throw DataError("actions file sentence count does not match the corpus");
    }
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (actions[i].size() != train.sentences[i].tokens.size()) {
            throw DataError("actions length mismatch at sentence " + std::to_string(i));
        }
    }
    ensure_labels_covered(train, reviser.labels);  // inventory mismatch is an error
    if (val != nullptr) ensure_labels_covered(*val, reviser.labels);

    TapirModel model;
    model.vocab = reviser.vocab;
    model.labels = reviser.labels;
    model.embeddings = reviser.embeddings;  // shared table, frozen in this step
    model.reviser = reviser;
    model.memory_size = cfg.memory_size;
    model.tau = cfg.tau;
    model.delay = cfg.delay;

    Rng master(cfg.seed);
    Rng init_rng = master.fork(11);
    Rng dropout_rng = master.fork(12);
    Rng unk_rng = master.fork(13);
    Rng shuffle_rng = master.fork(14);

    const int n_labels = model.labels.size();
    model.lstm = LstmStack(cfg.embed_dim, cfg.lstm_hidden, cfg.lstm_layers, n_labels, init_rng);
    model.proj = CacheProjections(cfg.lstm_hidden, n_labels, init_rng);
    model.ctrl = LstmnController(cfg.lstm_hidden, cfg.embed_dim, cfg.ctrl_hidden, cfg.ctrl_layers,
                                 init_rng);
    model.policy = PolicyHead(cfg.ctrl_hidden, init_rng);

    std::vector<NamedTensor> named;
    model.lstm.collect_params(named, "lstm.");
    model.proj.collect_params(named, "proj.");
    model.ctrl.collect_params(named, "ctrl.");
    model.policy.collect_params(named, "policy.");
    std::vector<Tensor> params = to_plain(named);
    AdamW opt(params, {static_cast<real>(cfg.lr), real(0.9), real(0.98),
                       static_cast<real>(cfg.adam_eps), static_cast<real>(cfg.weight_decay)});

    std::vector<std::vector<int>> all_ids, all_gold;
    for (const auto& s : train.sentences) {
        all_ids.push_back(encode(s, model.vocab));
        all_gold.push_back(encode_labels(s, model.labels));
    }

    const int d = cfg.delay;
    std::vector<std::size_t> order(train.sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    // training-time forward runs the first-pass path only: the cache fills
    // from LSTM logits every step and the reviser never enters the graph
    auto sentence_loss = [&](const std::vector<int>& ids, const std::vector<int>& gold,
                             const ActionSeq& acts, bool train_mode) -> Tensor {
        const int t_total = static_cast<int>(ids.size()) + d;
        LstmStack::State lstm_state = model.lstm.initial_state();
        LstmnController::State ctrl_state = model.ctrl.initial_state();
        CacheSet cache(model.memory_size);
        std::vector<Tensor> step_logits;
        std::vector<int> shifted_gold(static_cast<std::size_t>(t_total), -1);
        std::vector<Tensor> bce_terms;
        for (int t = 1; t <= t_total; ++t) {
            const int input_id =
                t <= static_cast<int>(ids.size()) ? ids[static_cast<std::size_t>(t - 1)] : Vocab::kPad;
            Tensor x_t = slice_row(embedding(model.embeddings, {input_id}), 0);
            Tensor h_t = model.lstm.step(lstm_state, x_t, static_cast<real>(cfg.dropout),
                                         &dropout_rng, train_mode);
            Tensor logits_t = model.lstm.logits(h_t);
            step_logits.push_back(logits_t);
            if (t - d >= 1) shifted_gold[static_cast<std::size_t>(t - 1)] =
                gold[static_cast<std::size_t>(t - d - 1)];

            auto ctrl_out =
                model.ctrl.step(ctrl_state, cache.phi_slots(), cache.phi_times(), h_t, x_t);
            if (t <= static_cast<int>(acts.size())) {
                const real target =
                    acts.actions[static_cast<std::size_t>(t - 1)] == Action::Revise ? real(1)
                                                                                    : real(0);
                bce_terms.push_back(bce(model.policy.score(ctrl_out.k_t), target));
            }
            Tensor z = model.proj.project_z(logits_t);
            Tensor phi = model.proj.fuse_phi(h_t, z);
            cache.push(t, h_t, z, phi);
        }
        Tensor ce = cross_entropy(stack_rows(step_logits), shifted_gold);
        Tensor bce_mean = scale(sum(stack_scalars(bce_terms)),
                                real(1) / static_cast<real>(bce_terms.size()));
        return add(ce, bce_mean);
    };

    const bool early_stop = val != nullptr;
    ParamSnapshot best;
    double best_metric = -1.0;
    int best_epoch = -1;
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const real lr = lr_schedule(epoch, static_cast<real>(cfg.lr), cfg.warmup_epochs);
        shuffle_indices(order, shuffle_rng);
        double loss_sum = 0.0;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t batch_end = std::min(done + static_cast<std::size_t>(cfg.batch),
                                                   order.size());
            const real inv_batch = real(1) / static_cast<real>(batch_end - done);
            opt.zero_grad();
            for (std::size_t b = done; b < batch_end; ++b) {
                std::vector<int> ids = all_ids[order[b]];
                apply_unk_mask(ids, cfg.unk_prob, unk_rng);
                Tape tape;
                {
                    TapeScope scope(tape);
                    Tensor loss = sentence_loss(ids, all_gold[order[b]],
                                                actions[order[b]], true);
                    const double lv = static_cast<double>(loss.item());
                    if (!std::isfinite(lv)) {
                        throw NumericError("training diverged: non-finite loss at epoch " +
                                           std::to_string(epoch));
                    }
                    loss_sum += lv;
                    tape.backward(scale(loss, inv_batch));
                }
            }
            clip_global_norm(params, static_cast<real>(cfg.clip));
            opt.step(lr);
            done = batch_end;
        }
        const double train_loss = loss_sum / static_cast<double>(order.size());
        log_line(log, epoch, "train", train_loss, 0.0, lr);
        if (stats != nullptr) stats->train_losses.push_back(train_loss);

        if (early_stop) {
            // model selection on final-output quality at the working threshold,
            // with the revision mechanism active
            double metric;
            {
                std::vector<std::vector<int>> pred, gold_all;
                for (const auto& s : val->sentences) {
                    PrefixTimeline tl = run_sentence(model, encode(s, model.vocab), d, cfg.tau);
                    pred.push_back(tl.final_labels());
                    gold_all.push_back(encode_labels(s, model.labels));
                }
                if (model.labels.is_iob()) {
                    std::vector<std::vector<std::string>> ps, gs;
                    for (std::size_t k = 0; k < pred.size(); ++k) {
                        std::vector<std::string> pr, gr;
                        for (int id : pred[k])
                            pr.push_back(model.labels.id_to_label[static_cast<std::size_t>(id)]);
                        for (int id : gold_all[k])
                            gr.push_back(model.labels.id_to_label[static_cast<std::size_t>(id)]);
                        ps.push_back(std::move(pr));
                        gs.push_back(std::move(gr));
                    }
                    metric = span_f1_iob(ps, gs).f1;
                } else {
                    metric = token_accuracy(pred, gold_all);
                }
            }
            log_line(log, epoch, "val", 0.0, metric, lr);
            if (metric > best_metric) {
                best_metric = metric;
                best_epoch = epoch;
                best = ParamSnapshot::take(params);
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                if (stats != nullptr) stats->epochs_run = epoch + 1;
                break;
            }
        }
        if (stats != nullptr) stats->epochs_run = epoch + 1;
    }

    if (early_stop && best_epoch >= 0) {
        best.restore(params);
        if (stats != nullptr) {
            stats->best_epoch = best_epoch;
            stats->best_metric = best_metric;
        }
    }
    return model;
}

}  // namespace tapir
