#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tapir/config.hpp"
#include "tapir/corpus.hpp"
#include "tapir/engine.hpp"
#include "tapir/signal.hpp"

namespace tapir {

enum class EncoderPurpose { Reviser, Reference, ActionGenerator };

struct TrainStats {
    int epochs_run = 0;
    int best_epoch = -1;
    double best_metric = 0.0;
    std::vector<double> train_losses;  // one entry per epoch
};

// Cross-entropy training of a full-sequence encoder. Revisers and reference
// models train unmasked with early stopping on the validation metric; the
// action generator trains causally for a fixed number of epochs and must be
// a single-layer linear transformer.
EncoderModel train_encoder(const Corpus& train, const Corpus* val, const Config& cfg,
                           EncoderPurpose purpose, std::ostream* log = nullptr,
                           TrainStats* stats = nullptr);

// Second training step: incremental processor, controller and policy head
// against gold labels and the generated action signal (combined CE + BCE
// loss). The reviser is taken as trained; its parameters and the shared
// embedding table stay fixed here.
TapirModel train_tapir(const Corpus& train, const Corpus* val, const Config& cfg,
                       const std::vector<ActionSeq>& actions, const EncoderModel& reviser,
                       std::ostream* log = nullptr, TrainStats* stats = nullptr);

// Validation-side task quality of an encoder (span F1 for IOB label sets,
// token accuracy otherwise).
double encoder_task_metric(const EncoderModel& model, const Corpus& corpus);

}  // namespace tapir
