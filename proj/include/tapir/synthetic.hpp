#pragma once

#include "tapir/common.hpp"
#include "tapir/corpus.hpp"

namespace tapir {

struct SyntheticParams {
    int n_sentences = 2000;
    int min_len = 5;
    int max_len = 18;
    std::uint64_t seed = kDefaultSeed;
};

// Seeded command-language corpus with local ambiguities resolved by later
// tokens: entity spans (ITEM/PLACE) whose type is only fixed by a cue word
// appearing after the span, unless a pre-cue pins it from the left. Labels
// are IOB over a ~50-word vocabulary; every sentence is fully decidable once
// complete, so a bidirectional model can label it perfectly.
Corpus make_synthetic(const SyntheticParams& params);

}  // namespace tapir
