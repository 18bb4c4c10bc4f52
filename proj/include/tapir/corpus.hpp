#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "tapir/common.hpp"
#include "tapir/tensor.hpp"

namespace tapir {

struct Sentence {
    std::vector<std::string> tokens;
    std::vector<std::string> labels;
};

// Token sequences with gold labels, the unit of all processing. The sha256
// binds derived artifacts (actions files) to the exact corpus content.
struct Corpus {
    std::vector<Sentence> sentences;
    std::vector<std::string> label_set;  // sorted, deduplicated
    std::string sha256;

    std::size_t token_count() const;
    void rebuild_metadata();  // recompute label_set and sha256 from sentences
};

inline constexpr int kMaxSentenceLen = 200;

// CoNLL column format: token = first column, label = last column, columns
// separated by tabs or spaces; blank line ends a sentence; lines starting
// with -DOCSTART- are skipped. Over-length sentences are dropped with a
// warning on stderr.
Corpus load_conll(const std::string& path);
void save_conll(const Corpus& corpus, const std::string& path);

std::string corpus_sha256(const std::vector<Sentence>& sentences);
std::string sha256_hex(const void* data, std::size_t len);

struct Vocab {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    std::vector<std::string> id_to_token;  // [0]="<pad>", [1]="<unk>"
    std::unordered_map<std::string, int> token_to_id;

    // id assignment: frequency descending, ties lexicographic
    static Vocab build(const Corpus& corpus);
    int size() const { return static_cast<int>(id_to_token.size()); }
    int id_of(const std::string& token) const;  // OOV -> kUnk
};

std::vector<int> encode(const Sentence& sentence, const Vocab& vocab);

// Training-time UNK substitution, probability p per token.
void apply_unk_mask(std::vector<int>& ids, double p, Rng& rng);

// Label inventory frozen at training time; unseen labels are a DataError.
struct LabelSet {
    std::vector<std::string> id_to_label;
    std::unordered_map<std::string, int> label_to_id;

    static LabelSet build(const Corpus& corpus);
    static LabelSet from_names(const std::vector<std::string>& names);
    int size() const { return static_cast<int>(id_to_label.size()); }
    int id_of(const std::string& label) const;  // throws DataError when unseen
    // true when every label fits the IOB alphabet {O, B-X, I-X}
    bool is_iob() const;
};

std::vector<int> encode_labels(const Sentence& sentence, const LabelSet& labels);

// Embedding rows for in-vocab tokens: file-provided where available,
// Xavier-initialized otherwise. Whitespace format: "word v1 ... vdim".
Tensor load_embeddings(const std::string& path, const Vocab& vocab, int dim, Rng& rng);
Tensor random_embeddings(const Vocab& vocab, int dim, Rng& rng);

// Vocabulary and label inventories travel inside checkpoint hyper blocks.
void vocab_to_hypers(const Vocab& vocab, std::map<std::string, std::string>& hypers);
Vocab vocab_from_hypers(const std::map<std::string, std::string>& hypers);
void labels_to_hypers(const LabelSet& labels, std::map<std::string, std::string>& hypers);
LabelSet labels_from_hypers(const std::map<std::string, std::string>& hypers);

}  // namespace tapir
