#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tapir/config.hpp"
#include "tapir/corpus.hpp"
#include "tapir/engine.hpp"

namespace tapir {

// Per-sentence WRITE/REVISE supervision symbols; the first is always W.
struct ActionSeq {
    std::vector<Action> actions;

    std::size_t size() const { return actions.size(); }
    double revise_share() const;
};

// a_1 = W; for t > 1, a_t = R iff any of the first t-1 labels of row t differ
// from row t-1.
ActionSeq derive_actions(const PrefixTimeline& timeline);

// Restart-incremental timeline of a single-layer LT with the mask removed:
// row t holds the argmax labels for positions 1..t of the unmasked forward
// on x_{1..t}. Rejects multi-layer encoders.
PrefixTimeline collect_prefix_timeline(const EncoderModel& lt_model, const std::vector<int>& ids);

// Actions file: header "#corpus-sha256=<hex>", then one sentence per line of
// space-separated W/R symbols.
void write_actions_file(const std::string& path, const std::string& corpus_sha256,
                        const std::vector<ActionSeq>& seqs);

struct ActionsFile {
    std::string corpus_sha256;
    std::vector<ActionSeq> seqs;
};

ActionsFile read_actions_file(const std::string& path);

}  // namespace tapir
