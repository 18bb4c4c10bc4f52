#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tapir/common.hpp"
#include "tapir/engine.hpp"

namespace tapir {

// Edit overhead: S / (n + S) with n = final output length (each token costs
// one necessary addition) and S = substitutions counted over consecutive
// rows at positions present in both.
double edit_overhead(const PrefixTimeline& timeline);

// Correction time: mean over tokens of (FC - FD) / (T_emit - FD), where FD is
// the step of first emission, FC the earliest step from which the label never
// changes again, and T_emit the final step; tokens with FD = T_emit score 0.
double correction_time(const PrefixTimeline& timeline);

// Relative correctness: share of rows that are exact prefixes of the final row.
double relative_correctness(const PrefixTimeline& timeline);

struct SpanScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long pred_spans = 0;
    long gold_spans = 0;
    long matched = 0;
};

struct IobSpan {
    std::string type;
    int start;  // inclusive
    int end;    // exclusive

    bool operator==(const IobSpan& o) const = default;
};

// conlleval-style extraction: a span starts at B-X, or at I-X without a
// preceding B-X/I-X of the same type, and runs through contiguous I-X.
std::vector<IobSpan> extract_iob_spans(const std::vector<std::string>& labels);

SpanScore span_f1_iob(const std::vector<std::string>& pred, const std::vector<std::string>& gold);
// micro-averaged over a corpus
SpanScore span_f1_iob(const std::vector<std::vector<std::string>>& pred,
                      const std::vector<std::vector<std::string>>& gold);

double token_accuracy(const std::vector<int>& pred, const std::vector<int>& gold);
double token_accuracy(const std::vector<std::vector<int>>& pred,
                      const std::vector<std::vector<int>>& gold);

// Cross-distribution of actions and output-prefix states. The action at step
// t is paired with the committed prefix it acted on (the row of step t-1,
// empty and trivially correct at t = 1); a prefix is correct when all its
// labels match the final output.
struct PolicyDistribution {
    double overall_write = 0.0;
    double overall_revise = 0.0;
    // conditioned on the action
    double rc_given_r = 0.0, ri_given_r = 0.0;
    double wi_given_w = 0.0, wc_given_w = 0.0;
    // conditioned on the prefix state
    double rc_given_c = 0.0, wc_given_c = 0.0;
    double wi_given_i = 0.0, ri_given_i = 0.0;
    long steps = 0, writes = 0, revises = 0, correct = 0, incorrect = 0;
};

PolicyDistribution policy_distribution(const std::vector<PrefixTimeline>& timelines);

struct BenchSide {
    double sents_per_sec = 0.0;
    long token_forwards = 0;     // per full pass over the corpus
    long reviser_calls = 0;
    double revise_ratio = 0.0;
};

struct BenchResult {
    BenchSide tapir;
    BenchSide reference;
    double speedup = 0.0;  // tapir sents/sec over reference sents/sec
};

// Wall-clock sentences/sec under matched conditions, single-threaded, with
// warmup iterations excluded from timing.
BenchResult throughput_bench(const TapirModel& model, const EncoderModel& reference,
                             const std::vector<std::vector<int>>& sentences, int warmup_iters,
                             int timed_iters);

struct MetricsReport {
    double eo = 0.0;
    double ct = 0.0;
    double rc = 0.0;
    int delay = 0;
    std::optional<double> f1;
    std::optional<double> accuracy;
    std::optional<double> sents_per_sec;  // absent in deterministic mode
    double revise_ratio = 0.0;
    long reviser_calls = 0;
    PolicyDistribution table7;
};

void write_report_json(const std::string& path, const MetricsReport& report);

struct SweepRow {
    double tau, eo, ct, rc, score;
    long reviser_calls;
};

// CSV with columns tau,eo,ct,rc,score for external plotting.
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace tapir
