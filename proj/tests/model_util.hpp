#pragma once

// Small randomly initialized models for engine/layer tests.

#include <string>
#include <vector>

#include "tapir/corpus.hpp"
#include "tapir/engine.hpp"

namespace testutil {

inline tapir::Vocab tiny_vocab(int extra_tokens) {
    tapir::Corpus c;
    tapir::Sentence s;
    for (int i = 0; i < extra_tokens; ++i) {
        s.tokens.push_back("tok" + std::to_string(i));
        s.labels.push_back("O");
    }
    c.sentences.push_back(s);
    c.rebuild_metadata();
    return tapir::Vocab::build(c);
}

inline tapir::LabelSet tiny_labels(int n) {
    std::vector<std::string> names;
    names.push_back("O");
    for (int i = 1; i < n; ++i) names.push_back("B-L" + std::to_string(i));
    return tapir::LabelSet::from_names(names);
}

inline tapir::EncoderModel random_encoder(tapir::ReviserKind kind, int vocab_tokens, int embed_dim,
                                          int d_model, int ffn, int heads, int layers, int n_labels,
                                          std::uint64_t seed) {
    tapir::Rng rng(seed);
    tapir::EncoderModel m;
    m.kind = kind;
    m.vocab = tiny_vocab(vocab_tokens);
    m.labels = tiny_labels(n_labels);
    m.embeddings = tapir::random_embeddings(m.vocab, embed_dim, rng);
    if (kind == tapir::ReviserKind::Transformer) {
        m.trf = tapir::TransformerEncoder(embed_dim, d_model, ffn, heads, layers, n_labels, rng);
    } else {
        m.lt = tapir::LinearTransformerEncoder(embed_dim, d_model, ffn, heads, layers, n_labels,
                                               rng);
    }
    return m;
}

struct TapirDims {
    int vocab_tokens = 12;
    int embed_dim = 10;
    int lstm_hidden = 12;
    int lstm_layers = 1;
    int ctrl_hidden = 8;
    int ctrl_layers = 1;
    int n_labels = 4;
    int memory_size = 3;
    int d_model = 8;
    int ffn = 16;
    int heads = 2;
    int reviser_layers = 1;
    double tau = 0.5;
};

inline tapir::TapirModel random_tapir_model(const TapirDims& d, std::uint64_t seed) {
    tapir::Rng rng(seed);
    tapir::TapirModel m;
    m.vocab = tiny_vocab(d.vocab_tokens);
    m.labels = tiny_labels(d.n_labels);
    m.embeddings = tapir::random_embeddings(m.vocab, d.embed_dim, rng);
    m.lstm = tapir::LstmStack(d.embed_dim, d.lstm_hidden, d.lstm_layers, d.n_labels, rng);
    m.proj = tapir::CacheProjections(d.lstm_hidden, d.n_labels, rng);
    m.ctrl = tapir::LstmnController(d.lstm_hidden, d.embed_dim, d.ctrl_hidden, d.ctrl_layers, rng);
    m.policy = tapir::PolicyHead(d.ctrl_hidden, rng);
    m.memory_size = d.memory_size;
    m.tau = d.tau;
    m.delay = 0;
    m.reviser.kind = tapir::ReviserKind::Transformer;
    m.reviser.vocab = m.vocab;
    m.reviser.labels = m.labels;
    m.reviser.embeddings = m.embeddings;
    m.reviser.trf = tapir::TransformerEncoder(d.embed_dim, d.d_model, d.ffn, d.heads,
                                              d.reviser_layers, d.n_labels, rng);
    return m;
}

inline std::vector<int> random_ids(int len, int vocab_size, tapir::Rng& rng) {
    std::vector<int> ids;
    for (int i = 0; i < len; ++i) ids.push_back(rng.uniform_int(2, vocab_size - 1));
    return ids;
}

}  // namespace testutil
