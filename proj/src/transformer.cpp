#include "tapir/transformer.hpp"

#include <cmath>
#include <stdexcept>

#include "tapir/init.hpp"
#include "tapir/ops.hpp"

namespace tapir {

Tensor sinusoidal_positions(int d_model) {
    std::vector<real> pe(static_cast<std::size_t>(kMaxPositions) * static_cast<std::size_t>(d_model));
    for (int pos = 0; pos < kMaxPositions; ++pos) {
        for (int i = 0; i < d_model; i += 2) {
            const double angle = pos / std::pow(10000.0, static_cast<double>(i) / d_model);
            pe[static_cast<std::size_t>(pos) * static_cast<std::size_t>(d_model) +
               static_cast<std::size_t>(i)] = static_cast<real>(std::sin(angle));
            if (i + 1 < d_model) {
                pe[static_cast<std::size_t>(pos) * static_cast<std::size_t>(d_model) +
                   static_cast<std::size_t>(i + 1)] = static_cast<real>(std::cos(angle));
            }
        }
    }
    return Tensor::from(std::move(pe), {kMaxPositions, d_model});
}

namespace {

EncoderBlockParams make_block(int d, int ffn, Rng& rng) {
    EncoderBlockParams b;
    b.wq = xavier_init({d, d}, rng);
    b.bq = xavier_init({d}, rng);
    b.wk = xavier_init({d, d}, rng);
    b.bk = xavier_init({d}, rng);
    b.wv = xavier_init({d, d}, rng);
    b.bv = xavier_init({d}, rng);
    b.wo = xavier_init({d, d}, rng);
    b.bo = xavier_init({d}, rng);
    b.ln1_g = Tensor::full({d}, real(1), true);
    b.ln1_b = Tensor::zeros({d}, true);
    b.w1 = xavier_init({ffn, d}, rng);
    b.b1 = xavier_init({ffn}, rng);
    b.w2 = xavier_init({d, ffn}, rng);
    b.b2 = xavier_init({d}, rng);
    b.ln2_g = Tensor::full({d}, real(1), true);
    b.ln2_b = Tensor::zeros({d}, true);
    return b;
}

void collect_block(const EncoderBlockParams& b, std::vector<NamedTensor>& out,
                   const std::string& p) {
    out.push_back({p + "wq", b.wq});
    out.push_back({p + "bq", b.bq});
    out.push_back({p + "wk", b.wk});
    out.push_back({p + "bk", b.bk});
    out.push_back({p + "wv", b.wv});
    out.push_back({p + "bv", b.bv});
    out.push_back({p + "wo", b.wo});
    out.push_back({p + "bo", b.bo});
    out.push_back({p + "ln1_g", b.ln1_g});
    out.push_back({p + "ln1_b", b.ln1_b});
    out.push_back({p + "w1", b.w1});
    out.push_back({p + "b1", b.b1});
    out.push_back({p + "w2", b.w2});
    out.push_back({p + "b2", b.b2});
    out.push_back({p + "ln2_g", b.ln2_g});
    out.push_back({p + "ln2_b", b.ln2_b});
}

EncoderBlockParams load_block(const LoadedCheckpoint& ck, const std::string& p) {
    EncoderBlockParams b;
    b.wq = ck.get(p + "wq");
    b.bq = ck.get(p + "bq");
    b.wk = ck.get(p + "wk");
    b.bk = ck.get(p + "bk");
    b.wv = ck.get(p + "wv");
    b.bv = ck.get(p + "bv");
    b.wo = ck.get(p + "wo");
    b.bo = ck.get(p + "bo");
    b.ln1_g = ck.get(p + "ln1_g");
    b.ln1_b = ck.get(p + "ln1_b");
    b.w1 = ck.get(p + "w1");
    b.b1 = ck.get(p + "b1");
    b.w2 = ck.get(p + "w2");
    b.b2 = ck.get(p + "b2");
    b.ln2_g = ck.get(p + "ln2_g");
    b.ln2_b = ck.get(p + "ln2_b");
    return b;
}

}  // namespace

TransformerEncoder::TransformerEncoder(int input_dim, int d_model, int ffn_dim, int heads,
                                       int layers, int n_labels, Rng& rng)
    : d_model_(d_model), heads_(heads) {
    if (d_model % heads != 0) throw std::invalid_argument("d_model must be divisible by heads");
    in_w_ = xavier_init({d_model, input_dim}, rng);
    in_b_ = xavier_init({d_model}, rng);
    positions_ = sinusoidal_positions(d_model);
    for (int l = 0; l < layers; ++l) blocks_.push_back(make_block(d_model, ffn_dim, rng));
    head_w_ = xavier_init({n_labels, d_model}, rng);
    head_b_ = xavier_init({n_labels}, rng);
}

Tensor TransformerEncoder::forward(const Tensor& embeds, AttentionMask mask, real dropout_rate,
                                   Rng* rng, bool train) const {
    const int t = embeds.dim(0);
    if (t > kMaxPositions) throw DataError("sequence exceeds position-encoding capacity");
    const int dk = d_model_ / heads_;
    const bool causal = mask == AttentionMask::Causal;
    const bool do_drop = train && dropout_rate > real(0) && rng != nullptr;

    Tensor x = linear(embeds, in_w_, in_b_);
    // first T rows of the fixed encoding
    {
        std::vector<real> pe(static_cast<std::size_t>(t) * static_cast<std::size_t>(d_model_));
        std::copy(positions_.value().begin(), positions_.value().begin() + pe.size(), pe.begin());
        x = add(x, Tensor::from(std::move(pe), {t, d_model_}));
    }
    if (do_drop) x = dropout(x, dropout_rate, *rng, true);

    for (const auto& blk : blocks_) {
        Tensor q = linear(x, blk.wq, blk.bq);
        Tensor k = linear(x, blk.wk, blk.bk);
        Tensor v = linear(x, blk.wv, blk.bv);
        std::vector<Tensor> heads_out;
        heads_out.reserve(static_cast<std::size_t>(heads_));
        for (int h = 0; h < heads_; ++h) {
            Tensor qh = slice_cols(q, h * dk, dk);
            Tensor kh = slice_cols(k, h * dk, dk);
            Tensor vh = slice_cols(v, h * dk, dk);
            Tensor scores = scale(matmul_bt(qh, kh), real(1) / static_cast<real>(std::sqrt(dk)));
            Tensor attn = row_softmax(scores, causal);
            heads_out.push_back(matmul(attn, vh));
        }
        Tensor att = linear(concat_cols(heads_out), blk.wo, blk.bo);
        if (do_drop) att = dropout(att, dropout_rate, *rng, true);
        x = layer_norm(add(x, att), blk.ln1_g, blk.ln1_b);

        Tensor ff = linear(relu(linear(x, blk.w1, blk.b1)), blk.w2, blk.b2);
        if (do_drop) ff = dropout(ff, dropout_rate, *rng, true);
        x = layer_norm(add(x, ff), blk.ln2_g, blk.ln2_b);
    }
    return linear(x, head_w_, head_b_);
}

void TransformerEncoder::collect_params(std::vector<NamedTensor>& out,
                                        const std::string& prefix) const {
    out.push_back({prefix + "in_w", in_w_});
    out.push_back({prefix + "in_b", in_b_});
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        collect_block(blocks_[l], out, prefix + "block" + std::to_string(l) + ".");
    }
    out.push_back({prefix + "head_w", head_w_});
    out.push_back({prefix + "head_b", head_b_});
}

TransformerEncoder TransformerEncoder::from_checkpoint(const LoadedCheckpoint& ck,
                                                       const std::string& prefix) {
    TransformerEncoder e;
    e.in_w_ = ck.get(prefix + "in_w");
    e.in_b_ = ck.get(prefix + "in_b");
    for (int l = 0;; ++l) {
        const std::string base = prefix + "block" + std::to_string(l) + ".";
        if (!ck.has(base + "wq")) break;
        e.blocks_.push_back(load_block(ck, base));
    }
    if (e.blocks_.empty()) throw DataError("checkpoint has no encoder blocks under " + prefix);
    e.head_w_ = ck.get(prefix + "head_w");
    e.head_b_ = ck.get(prefix + "head_b");
    e.d_model_ = e.in_w_.dim(0);
    e.heads_ = 0;  // restored by the owning model from hypers
    e.positions_ = sinusoidal_positions(e.d_model_);
    return e;
}

}  // namespace tapir
