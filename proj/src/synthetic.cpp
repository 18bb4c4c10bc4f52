#include "tapir/synthetic.hpp"

#include <array>
#include <string>
#include <vector>

namespace tapir {

namespace {

const std::vector<std::string> kOpeners = {"please", "kindly", "now", "okay", "well"};
const std::vector<std::string> kVerbs = {"open", "close", "start", "stop", "move", "check"};
const std::vector<std::string> kDets = {"the", "a", "this"};
const std::vector<std::string> kMods = {"red", "big", "old", "new", "small"};
// noun pools lean towards one span type, so a partial span leaves the type
// genuinely uncertain until the cue arrives
const std::vector<std::string> kItemNouns = {"card", "file", "plan", "note", "code"};
const std::vector<std::string> kPlaceNouns = {"door", "desk", "gate", "room", "shed"};
const std::vector<std::string> kItemCues = {"quickly", "twice", "again", "soon", "today"};
const std::vector<std::string> kPlaceCues = {"inside", "nearby", "upstairs", "outside", "there"};
const std::vector<std::string> kItemPrecues = {"my", "your"};
const std::vector<std::string> kPlacePrecues = {"near", "behind"};
const std::vector<std::string> kFillers = {"and", "so", "just", "very", "really", "then", "also",
                                           "still"};

const std::string& pick(const std::vector<std::string>& pool, Rng& rng) {
    return pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
}

enum class SpanType { Item, Place };

void emit(Sentence& s, const std::string& tok, const std::string& lab) {
    s.tokens.push_back(tok);
    s.labels.push_back(lab);
}

void emit_clause(Sentence& s, Rng& rng) {
    emit(s, pick(kVerbs, rng), "O");
    if (rng.bernoulli(0.3)) emit(s, pick(kFillers, rng), "O");

    const bool has_precue = rng.bernoulli(0.45);
    SpanType type;
    if (has_precue) {
        type = rng.bernoulli(0.5) ? SpanType::Item : SpanType::Place;
        emit(s, pick(type == SpanType::Item ? kItemPrecues : kPlacePrecues, rng), "O");
    } else {
        type = rng.bernoulli(0.7) ? SpanType::Item : SpanType::Place;
        emit(s, pick(kDets, rng), "O");
    }

    const std::string tag = type == SpanType::Item ? "ITEM" : "PLACE";
    bool first = true;
    if (rng.bernoulli(0.35)) {
        emit(s, pick(kMods, rng), "B-" + tag);
        first = false;
    }
    const int noun_count = rng.bernoulli(0.3) ? 2 : 1;
    for (int i = 0; i < noun_count; ++i) {
        // usually draw from the matching pool, sometimes from the other one
        const bool matching = rng.bernoulli(0.8);
        const auto& pool = (type == SpanType::Item) == matching ? kItemNouns : kPlaceNouns;
        emit(s, pick(pool, rng), (first ? "B-" : "I-") + tag);
        first = false;
    }

    const int gap = rng.bernoulli(0.5) ? (rng.bernoulli(0.5) ? 2 : 1) : 0;
    for (int i = 0; i < gap; ++i) emit(s, pick(kFillers, rng), "O");
    emit(s, pick(type == SpanType::Item ? kItemCues : kPlaceCues, rng), "O");
    const int trail = rng.bernoulli(0.4) ? 1 : 0;
    for (int i = 0; i < trail; ++i) emit(s, pick(kFillers, rng), "O");
}

Sentence make_sentence(Rng& rng, int min_len, int max_len) {
    Sentence s;
    const int target = rng.uniform_int(min_len, max_len);
    if (rng.bernoulli(0.4)) emit(s, pick(kOpeners, rng), "O");
    while (static_cast<int>(s.tokens.size()) < target) emit_clause(s, rng);
    return s;
}

}  // namespace

Corpus make_synthetic(const SyntheticParams& params) {
    Rng rng(params.seed);
    Corpus corpus;
    corpus.sentences.reserve(static_cast<std::size_t>(params.n_sentences));
    for (int i = 0; i < params.n_sentences; ++i) {
        corpus.sentences.push_back(make_sentence(rng, params.min_len, params.max_len));
    }
    corpus.rebuild_metadata();
    return corpus;
}

}  // namespace tapir
