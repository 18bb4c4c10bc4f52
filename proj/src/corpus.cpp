#include "tapir/corpus.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "tapir/init.hpp"

namespace tapir {

std::size_t Corpus::token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.tokens.size();
    return n;
}

std::string sha256_hex(const void* data, std::size_t len) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int out_len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data, len) != 1 || EVP_DigestFinal_ex(ctx, digest, &out_len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw DataError("sha256 computation failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string s;
    s.reserve(out_len * 2);
    for (unsigned int i = 0; i < out_len; ++i) {
        s.push_back(hex[digest[i] >> 4]);
        s.push_back(hex[digest[i] & 0xf]);
    }
    return s;
}

std::string corpus_sha256(const std::vector<Sentence>& sentences) {
    // canonical serialization: token<TAB>label lines, blank line after each
    // sentence, independent of the source file's column layout
    std::string canon;
    for (const auto& s : sentences) {
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            canon += s.tokens[i];
            canon += '\t';
            canon += s.labels[i];
            canon += '\n';
        }
        canon += '\n';
    }
    return sha256_hex(canon.data(), canon.size());
}

void Corpus::rebuild_metadata() {
    std::set<std::string> labels;
    for (const auto& s : sentences)
        for (const auto& l : s.labels) labels.insert(l);
    label_set.assign(labels.begin(), labels.end());
    sha256 = corpus_sha256(sentences);
}

Corpus load_conll(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open corpus file: " + path);

    Corpus corpus;
    Sentence cur;
    std::string line;
    int lineno = 0;
    int dropped = 0;
    auto flush = [&]() {
        if (cur.tokens.empty()) return;
        if (cur.tokens.size() > kMaxSentenceLen) {
            ++dropped;
        } else {
            corpus.sentences.push_back(std::move(cur));
        }
        cur = Sentence{};
    };
    bool any_line = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        any_line = true;
        if (line.empty()) {
            flush();
            continue;
        }
        if (line.rfind("-DOCSTART-", 0) == 0) continue;
        std::istringstream ls(line);
        std::vector<std::string> cols;
        std::string col;
        while (ls >> col) cols.push_back(col);
        if (cols.size() < 2) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": expected at least token and label columns");
        }
        cur.tokens.push_back(cols.front());
        cur.labels.push_back(cols.back());
    }
    flush();
    if (!any_line) throw DataError("empty corpus file: " + path);
    if (corpus.sentences.empty()) throw DataError("corpus has no sentences: " + path);
    if (dropped > 0) {
        std::cerr << "warning: dropped " << dropped << " sentence(s) longer than "
                  << kMaxSentenceLen << " tokens from " << path << "\n";
    }
    corpus.rebuild_metadata();
    return corpus;
}

void save_conll(const Corpus& corpus, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open corpus file for writing: " + path);
    for (const auto& s : corpus.sentences) {
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            f << s.tokens[i] << '\t' << s.labels[i] << '\n';
        }
        f << '\n';
    }
}

Vocab Vocab::build(const Corpus& corpus) {
    std::map<std::string, long> freq;
    for (const auto& s : corpus.sentences)
        for (const auto& t : s.tokens) ++freq[t];
    std::vector<std::pair<std::string, long>> items(freq.begin(), freq.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocab v;
    v.id_to_token = {"<pad>", "<unk>"};
    for (const auto& [tok, _] : items) v.id_to_token.push_back(tok);
    for (std::size_t i = 0; i < v.id_to_token.size(); ++i)
        v.token_to_id[v.id_to_token[i]] = static_cast<int>(i);
    return v;
}

int Vocab::id_of(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
}

std::vector<int> encode(const Sentence& sentence, const Vocab& vocab) {
    std::vector<int> ids;
    ids.reserve(sentence.tokens.size());
    for (const auto& t : sentence.tokens) ids.push_back(vocab.id_of(t));
    return ids;
}

void apply_unk_mask(std::vector<int>& ids, double p, Rng& rng) {
    if (p <= 0.0) return;
    for (int& id : ids) {
        if (rng.uniform() < p) id = Vocab::kUnk;
    }
}

LabelSet LabelSet::build(const Corpus& corpus) { return from_names(corpus.label_set); }

LabelSet LabelSet::from_names(const std::vector<std::string>& names) {
    LabelSet ls;
    ls.id_to_label = names;
    std::sort(ls.id_to_label.begin(), ls.id_to_label.end());
    ls.id_to_label.erase(std::unique(ls.id_to_label.begin(), ls.id_to_label.end()),
                         ls.id_to_label.end());
    for (std::size_t i = 0; i < ls.id_to_label.size(); ++i)
        ls.label_to_id[ls.id_to_label[i]] = static_cast<int>(i);
    return ls;
}

int LabelSet::id_of(const std::string& label) const {
    auto it = label_to_id.find(label);
    if (it == label_to_id.end()) throw DataError("label not in training inventory: " + label);
    return it->second;
}

bool LabelSet::is_iob() const {
    for (const auto& l : id_to_label) {
        if (l == "O") continue;
        if (l.size() >= 2 && (l[0] == 'B' || l[0] == 'I') && l[1] == '-') continue;
        return false;
    }
    return true;
}

std::vector<int> encode_labels(const Sentence& sentence, const LabelSet& labels) {
    std::vector<int> ids;
    ids.reserve(sentence.labels.size());
    for (const auto& l : sentence.labels) ids.push_back(labels.id_of(l));
    return ids;
}

Tensor random_embeddings(const Vocab& vocab, int dim, Rng& rng) {
    return xavier_init({vocab.size(), dim}, rng, true);
}

void vocab_to_hypers(const Vocab& vocab, std::map<std::string, std::string>& hypers) {
    hypers["vocab.count"] = std::to_string(vocab.size());
    for (int i = 0; i < vocab.size(); ++i) {
        hypers["vocab." + std::to_string(i)] = vocab.id_to_token[static_cast<std::size_t>(i)];
    }
}

Vocab vocab_from_hypers(const std::map<std::string, std::string>& hypers) {
    auto it = hypers.find("vocab.count");
    if (it == hypers.end()) throw DataError("checkpoint is missing the vocabulary");
    const int n = std::stoi(it->second);
    Vocab v;
    v.id_to_token.clear();
    for (int i = 0; i < n; ++i) {
        auto e = hypers.find("vocab." + std::to_string(i));
        if (e == hypers.end()) throw DataError("checkpoint vocabulary is incomplete");
        v.id_to_token.push_back(e->second);
    }
    for (std::size_t i = 0; i < v.id_to_token.size(); ++i)
        v.token_to_id[v.id_to_token[i]] = static_cast<int>(i);
    return v;
}

void labels_to_hypers(const LabelSet& labels, std::map<std::string, std::string>& hypers) {
    hypers["label.count"] = std::to_string(labels.size());
    for (int i = 0; i < labels.size(); ++i) {
        hypers["label." + std::to_string(i)] = labels.id_to_label[static_cast<std::size_t>(i)];
    }
}

LabelSet labels_from_hypers(const std::map<std::string, std::string>& hypers) {
    auto it = hypers.find("label.count");
    if (it == hypers.end()) throw DataError("checkpoint is missing the label inventory");
    const int n = std::stoi(it->second);
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) {
        auto e = hypers.find("label." + std::to_string(i));
        if (e == hypers.end()) throw DataError("checkpoint label inventory is incomplete");
        names.push_back(e->second);
    }
    return LabelSet::from_names(names);
}

Tensor load_embeddings(const std::string& path, const Vocab& vocab, int dim, Rng& rng) {
    Tensor table = random_embeddings(vocab, dim, rng);
    std::ifstream f(path);
    if (!f) throw DataError("cannot open embeddings file: " + path);
    std::string line;
    int lineno = 0;
    auto& tv = table.value();
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        std::vector<real> vals;
        double v;
        while (ls >> v) vals.push_back(static_cast<real>(v));
        if (static_cast<int>(vals.size()) != dim) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(dim) + " values, got " + std::to_string(vals.size()));
        }
        auto it = vocab.token_to_id.find(word);
        if (it == vocab.token_to_id.end()) continue;
        std::copy(vals.begin(), vals.end(),
                  tv.begin() + static_cast<std::size_t>(it->second) * static_cast<std::size_t>(dim));
    }
    return table;
}

}  // namespace tapir
