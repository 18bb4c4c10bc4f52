#include "tapir/engine.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "tapir/ops.hpp"

namespace tapir {

namespace {

Tensor embed_one(const Tensor& table, int id) {
    return slice_row(embedding(table, {id}), 0);
}

std::vector<int> argmax_rows(const Tensor& logits, int count) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(argmax_row(logits, i));
    return out;
}

}  // namespace

Tensor EncoderModel::logits(const std::vector<int>& ids, AttentionMask mask, real dropout_rate,
                            Rng* rng, bool train) const {
    if (ids.empty()) throw DataError("encoder forward on empty sentence");
    Tensor embeds = embedding(embeddings, ids);
    if (kind == ReviserKind::Transformer) {
        return trf.forward(embeds, mask, dropout_rate, rng, train);
    }
    return lt.forward(embeds, mask, dropout_rate, rng, train);
}

std::vector<int> EncoderModel::predict(const std::vector<int>& ids, AttentionMask mask) const {
    Tensor l = logits(ids, mask);
    return argmax_rows(l, l.dim(0));
}

void EncoderModel::collect_params(std::vector<NamedTensor>& out, bool include_embeddings) const {
    if (include_embeddings) out.push_back({"embed.table", embeddings});
    if (kind == ReviserKind::Transformer) {
        trf.collect_params(out, "enc.");
    } else {
        lt.collect_params(out, "enc.");
    }
}

void EncoderModel::save(const std::string& path,
                        const std::map<std::string, std::string>& extra) const {
    std::vector<NamedTensor> params;
    collect_params(params, true);
    std::map<std::string, std::string> hypers = extra;
    hypers["model"] = "encoder";
    hypers["encoder_kind"] = reviser_kind_name(kind);
    hypers["heads"] = std::to_string(kind == ReviserKind::Transformer ? trf.heads() : lt.heads());
    vocab_to_hypers(vocab, hypers);
    labels_to_hypers(labels, hypers);
    save_checkpoint(path, params, hypers);
}

EncoderModel EncoderModel::load_from(const LoadedCheckpoint& ck, const std::string& prefix,
                                     Tensor shared_embeddings, const Vocab& vocab,
                                     const LabelSet& labels, ReviserKind kind, int heads) {
    EncoderModel m;
    m.kind = kind;
    m.embeddings = std::move(shared_embeddings);
    m.vocab = vocab;
    m.labels = labels;
    if (kind == ReviserKind::Transformer) {
        m.trf = TransformerEncoder::from_checkpoint(ck, prefix);
        m.trf.set_heads(heads);
    } else {
        m.lt = LinearTransformerEncoder::from_checkpoint(ck, prefix);
        m.lt.set_heads(heads);
    }
    return m;
}

EncoderModel EncoderModel::load(const std::string& path) {
    LoadedCheckpoint ck = load_checkpoint(path);
    if (ck.hyper_or("model", "") != "encoder") throw DataError(path + " is not an encoder checkpoint");
    const ReviserKind kind = reviser_kind_from(ck.hyper("encoder_kind"));
    const int heads = std::stoi(ck.hyper("heads"));
    return load_from(ck, "enc.", ck.get("embed.table"), vocab_from_hypers(ck.hypers),
                     labels_from_hypers(ck.hypers), kind, heads);
}

void TapirModel::save(const std::string& path,
                      const std::map<std::string, std::string>& extra) const {
    std::vector<NamedTensor> params;
    params.push_back({"embed.table", embeddings});
    lstm.collect_params(params, "lstm.");
    proj.collect_params(params, "proj.");
    ctrl.collect_params(params, "ctrl.");
    policy.collect_params(params, "policy.");
    reviser.collect_params(params, false);  // embeddings shared, stored once
    std::vector<NamedTensor> renamed;
    for (auto& nt : params) {
        if (nt.name.rfind("enc.", 0) == 0) nt.name = "reviser." + nt.name;
        renamed.push_back(nt);
    }
    std::map<std::string, std::string> hypers = extra;
    hypers["model"] = "tapir";
    hypers["memory_size"] = std::to_string(memory_size);
    char tau_buf[32];
    std::snprintf(tau_buf, sizeof(tau_buf), "%.9g", tau);
    hypers["tau"] = tau_buf;
    hypers["delay"] = std::to_string(delay);
    hypers["reviser_kind"] = reviser_kind_name(reviser.kind);
    hypers["heads"] = std::to_string(reviser.kind == ReviserKind::Transformer ? reviser.trf.heads()
                                                                              : reviser.lt.heads());
    vocab_to_hypers(vocab, hypers);
    labels_to_hypers(labels, hypers);
    save_checkpoint(path, renamed, hypers);
}

TapirModel TapirModel::load(const std::string& path) {
    LoadedCheckpoint ck = load_checkpoint(path);
    if (ck.hyper_or("model", "") != "tapir") throw DataError(path + " is not a tapir checkpoint");
    TapirModel m;
    m.embeddings = ck.get("embed.table");
    m.lstm = LstmStack::from_checkpoint(ck, "lstm.");
    m.proj = CacheProjections::from_checkpoint(ck, "proj.");
    m.ctrl = LstmnController::from_checkpoint(ck, "ctrl.");
    m.policy = PolicyHead::from_checkpoint(ck, "policy.");
    m.memory_size = std::stoi(ck.hyper("memory_size"));
    m.tau = std::stod(ck.hyper("tau"));
    m.delay = std::stoi(ck.hyper("delay"));
    m.vocab = vocab_from_hypers(ck.hypers);
    m.labels = labels_from_hypers(ck.hypers);
    m.reviser = EncoderModel::load_from(ck, "reviser.enc.", m.embeddings, m.vocab, m.labels,
                                        reviser_kind_from(ck.hyper("reviser_kind")),
                                        std::stoi(ck.hyper("heads")));
    return m;
}

const std::vector<int>& PrefixTimeline::final_labels() const {
    if (rows.empty()) throw DataError("empty timeline");
    return rows.back().labels;
}

TapirSession::TapirSession(const TapirModel& model, double tau, int delay)
    : model_(model),
      tau_(tau),
      delay_(delay),
      lstm_state_(model.lstm.initial_state()),
      ctrl_state_(model.ctrl.initial_state()),
      cache_(model.memory_size) {}

TapirSession::StepInfo TapirSession::step(int token_id) {
    ++t_;
    const bool is_pad = token_id == kPadInput;
    const int input_id = is_pad ? Vocab::kPad : token_id;

    // first pass
    Tensor x_t = embed_one(model_.embeddings, input_id);
    Tensor h_t = model_.lstm.step(lstm_state_, x_t);
    Tensor y_logits = model_.lstm.logits(h_t);
    ++counters_.lstm_steps;

    // controller attends over the phi cache as of the previous step
    auto ctrl_out = model_.ctrl.step(ctrl_state_, cache_.phi_slots(), cache_.phi_times(), h_t, x_t);
    const double score = static_cast<double>(model_.policy.score(ctrl_out.k_t).item());
    const Action action = decide_action(score, tau_);

    if (!is_pad) x_buf_.push_back(token_id);

    // the h cache is updated regardless of the action taken
    cache_.push_h(t_, h_t);
    recent_logits_.push_back({t_, y_logits});
    if (static_cast<int>(recent_logits_.size()) > model_.memory_size) recent_logits_.pop_front();

    if (action == Action::Write) {
        if (t_ > delay_) y_buf_.push_back(argmax(y_logits.value()));
        Tensor z = model_.proj.project_z(y_logits);
        Tensor phi = model_.proj.fuse_phi(h_t, z);
        cache_.push_zp(t_, z, phi);
    } else {
        Tensor rev_logits = model_.reviser.logits(x_buf_, AttentionMask::None);
        ++counters_.reviser_calls;
        counters_.reviser_token_forwards += static_cast<long>(x_buf_.size());

        const int n_commit = std::max(0, t_ - delay_);
        y_buf_ = argmax_rows(rev_logits, n_commit);

        std::vector<std::pair<int, Tensor>> window;
        const int start = std::max(1, t_ - model_.memory_size + 1);
        for (int j = start; j <= t_; ++j) {
            const int tok = j - delay_;  // reviser rows are token-aligned
            if (tok >= 1 && tok <= static_cast<int>(x_buf_.size())) {
                window.emplace_back(j, slice_row(rev_logits, tok - 1));
            } else {
                // steps with no reviser counterpart keep the first-pass logits
                Tensor kept;
                for (const auto& slot : recent_logits_) {
                    if (slot.time == j) kept = slot.value;
                }
                if (!kept.defined()) throw std::logic_error("first-pass logits evicted early");
                window.emplace_back(j, kept);
            }
        }
        cache_.rebuild_zp(window, model_.proj);
    }
#ifndef NDEBUG
    cache_.check_aligned();
#endif
    return {action, score};
}

PrefixTimeline run_sentence(const TapirModel& model, const std::vector<int>& ids, int delay,
                            double tau_override, EngineCounters* counters) {
    if (ids.empty()) throw DataError("empty sentence");
    const double tau = tau_override >= 0.0 ? tau_override : model.tau;
    TapirSession session(model, tau, delay);
    PrefixTimeline tl;
    tl.n_tokens = static_cast<int>(ids.size());
    tl.delay = delay;
    auto record = [&](const TapirSession::StepInfo& info) {
        tl.rows.push_back({session.committed(), info.action, info.score});
    };
    for (int id : ids) record(session.step(id));
    for (int d = 0; d < delay; ++d) record(session.step(TapirSession::kPadInput));
    if (counters != nullptr) *counters = session.counters();
    return tl;
}

PrefixTimeline run_restart_incremental(const EncoderModel& encoder, const std::vector<int>& ids,
                                       int delay, EngineCounters* counters) {
    if (ids.empty()) throw DataError("empty sentence");
    const int t_total = static_cast<int>(ids.size());
    PrefixTimeline tl;
    tl.n_tokens = t_total;
    tl.delay = delay;
    EngineCounters c;
    std::vector<int> last_full;
    for (int t = 1; t <= t_total; ++t) {
        const std::vector<int> prefix(ids.begin(), ids.begin() + t);
        Tensor logits = encoder.logits(prefix, AttentionMask::None);
        ++c.encoder_calls;
        c.reviser_token_forwards += t;
        last_full = argmax_rows(logits, t);
        const int commit = std::max(0, t - delay);
        tl.rows.push_back(
            {std::vector<int>(last_full.begin(), last_full.begin() + commit), Action::Revise, 1.0});
    }
    // delayed variants flush the remaining labels from the full-sentence
    // output without recomputation
    for (int d = 1; d <= delay; ++d) {
        const int commit = std::min(t_total, t_total + d - delay);
        tl.rows.push_back(
            {std::vector<int>(last_full.begin(), last_full.begin() + commit), Action::Revise, 1.0});
    }
    if (counters != nullptr) *counters = c;
    return tl;
}

std::vector<int> finalize(const PrefixTimeline& timeline) { return timeline.final_labels(); }

void dump_timeline(std::ostream& os, const PrefixTimeline& timeline, const LabelSet& labels) {
    char head[64];
    for (std::size_t t = 0; t < timeline.rows.size(); ++t) {
        const TimelineRow& row = timeline.rows[t];
        std::snprintf(head, sizeof(head), "t=%zu a=%c p=%.6f", t + 1,
                      static_cast<char>(row.action), row.score);
        os << head;
        for (int id : row.labels) os << '\t' << labels.id_to_label[static_cast<std::size_t>(id)];
        os << '\n';
    }
    os << '\n';
}

}  // namespace tapir
