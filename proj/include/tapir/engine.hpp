#pragma once

#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tapir/checkpoint.hpp"
#include "tapir/common.hpp"
#include "tapir/config.hpp"
#include "tapir/corpus.hpp"
#include "tapir/linear_transformer.hpp"
#include "tapir/lstm.hpp"
#include "tapir/lstmn.hpp"
#include "tapir/memory.hpp"
#include "tapir/projections.hpp"
#include "tapir/transformer.hpp"

namespace tapir {

// Full-sequence labeller (reference model, reviser, or action generator):
// embeddings -> projection -> Transformer or Linear Transformer encoder.
struct EncoderModel {
    ReviserKind kind = ReviserKind::Transformer;
    Tensor embeddings;  // [V,E]
    TransformerEncoder trf;
    LinearTransformerEncoder lt;
    Vocab vocab;
    LabelSet labels;

    int layers() const {
        return kind == ReviserKind::Transformer ? trf.layers() : lt.layers();
    }
    int n_labels() const { return labels.size(); }

    Tensor logits(const std::vector<int>& ids, AttentionMask mask, real dropout_rate = real(0),
                  Rng* rng = nullptr, bool train = false) const;
    std::vector<int> predict(const std::vector<int>& ids, AttentionMask mask) const;

    void collect_params(std::vector<NamedTensor>& out, bool include_embeddings) const;
    void save(const std::string& path, const std::map<std::string, std::string>& extra = {}) const;
    static EncoderModel load(const std::string& path);
    static EncoderModel load_from(const LoadedCheckpoint& ck, const std::string& prefix,
                                  Tensor shared_embeddings, const Vocab& vocab,
                                  const LabelSet& labels, ReviserKind kind, int heads);
};

// Composed TAPIR parameters: incremental processor, controller, policy head,
// cache projections and the second-pass reviser. The embedding table is
// shared across all components.
struct TapirModel {
    Tensor embeddings;
    LstmStack lstm;
    CacheProjections proj;
    LstmnController ctrl;
    PolicyHead policy;
    EncoderModel reviser;  // reviser.embeddings aliases `embeddings`
    int memory_size = 5;
    double tau = 0.5;
    int delay = 0;
    Vocab vocab;
    LabelSet labels;

    void save(const std::string& path, const std::map<std::string, std::string>& extra = {}) const;
    static TapirModel load(const std::string& path);
};

struct TimelineRow {
    std::vector<int> labels;  // committed output after this step
    Action action = Action::Write;
    double score = 0.0;  // policy score (1.0 for restart-incremental rows)
};

// For one sentence, the committed label sequence after each step plus the
// action taken; the substrate of all incremental metrics.
struct PrefixTimeline {
    std::vector<TimelineRow> rows;
    int n_tokens = 0;
    int delay = 0;

    const std::vector<int>& final_labels() const;  // throws DataError when empty
};

struct EngineCounters {
    long lstm_steps = 0;
    long reviser_calls = 0;
    long reviser_token_forwards = 0;
    long encoder_calls = 0;  // restart runner forwards
};

// One inference session per sentence; thread-confined.
class TapirSession {
  public:
    TapirSession(const TapirModel& model, double tau, int delay);

    struct StepInfo {
        Action action;
        double score;
    };

    // Feed the next input token; kPadInput runs a delay-flush step.
    static constexpr int kPadInput = -1;
    StepInfo step(int token_id);

    const std::vector<int>& committed() const { return y_buf_; }
    const EngineCounters& counters() const { return counters_; }
    const CacheSet& cache() const { return cache_; }
    int steps_taken() const { return t_; }

  private:
    const TapirModel& model_;
    double tau_;
    int delay_;
    LstmStack::State lstm_state_;
    LstmnController::State ctrl_state_;
    CacheSet cache_;
    std::vector<int> x_buf_;
    std::vector<int> y_buf_;
    std::deque<TimedSlot> recent_logits_;  // last N first-pass logits, by step
    int t_ = 0;
    EngineCounters counters_;
};

// Runs the adaptive-revision loop over one sentence; with delay d the label
// for token i is committed at step i+d and d flush steps with a padding input
// finish the sentence. tau_override < 0 uses the model's threshold.
PrefixTimeline run_sentence(const TapirModel& model, const std::vector<int>& ids, int delay,
                            double tau_override = -1.0, EngineCounters* counters = nullptr);

// Restart-incremental reference: row t is the encoder output on the prefix
// x_{1..t} (first t-d positions when delayed at inference).
PrefixTimeline run_restart_incremental(const EncoderModel& encoder, const std::vector<int>& ids,
                                       int delay = 0, EngineCounters* counters = nullptr);

// Returns the last row verbatim; no terminal recomputation is injected.
std::vector<int> finalize(const PrefixTimeline& timeline);

// Text dump: per sentence one block, line t = "t=<n> a=<W|R> p=<score>"
// followed by tab-separated labels; blank line between sentences.
void dump_timeline(std::ostream& os, const PrefixTimeline& timeline, const LabelSet& labels);

}  // namespace tapir
