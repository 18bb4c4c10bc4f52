#include "tapir/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

namespace tapir {

double edit_overhead(const PrefixTimeline& timeline) {
    if (timeline.rows.empty()) throw DataError("empty timeline");
    long subs = 0;
    for (std::size_t t = 1; t < timeline.rows.size(); ++t) {
        const auto& prev = timeline.rows[t - 1].labels;
        const auto& cur = timeline.rows[t].labels;
        const std::size_t common = std::min(prev.size(), cur.size());
        for (std::size_t i = 0; i < common; ++i) {
            if (prev[i] != cur[i]) ++subs;
        }
    }
    const long n = static_cast<long>(timeline.rows.back().labels.size());
    if (n + subs == 0) return 0.0;
    return static_cast<double>(subs) / static_cast<double>(n + subs);
}

double correction_time(const PrefixTimeline& timeline) {
    if (timeline.rows.empty()) throw DataError("empty timeline");
    const auto& rows = timeline.rows;
    const int t_emit = static_cast<int>(rows.size());
    const std::size_t n_tokens = rows.back().labels.size();
    if (n_tokens == 0) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n_tokens; ++i) {
        int fd = 0;
        for (int t = 1; t <= t_emit; ++t) {
            if (rows[static_cast<std::size_t>(t - 1)].labels.size() > i) {
                fd = t;
                break;
            }
        }
        const int final_label = rows.back().labels[i];
        int fc = fd;
        for (int t = t_emit; t >= fd; --t) {
            if (rows[static_cast<std::size_t>(t - 1)].labels[i] != final_label) {
                fc = t + 1;
                break;
            }
        }
        if (t_emit > fd) total += static_cast<double>(fc - fd) / static_cast<double>(t_emit - fd);
    }
    return total / static_cast<double>(n_tokens);
}

double relative_correctness(const PrefixTimeline& timeline) {
    if (timeline.rows.empty()) throw DataError("empty timeline");
    const auto& final_row = timeline.rows.back().labels;
    long good = 0;
    for (const auto& row : timeline.rows) {
        bool prefix = row.labels.size() <= final_row.size();
        if (prefix) {
            for (std::size_t i = 0; i < row.labels.size(); ++i) {
                if (row.labels[i] != final_row[i]) {
                    prefix = false;
                    break;
                }
            }
        }
        if (prefix) ++good;
    }
    return static_cast<double>(good) / static_cast<double>(timeline.rows.size());
}

std::vector<IobSpan> extract_iob_spans(const std::vector<std::string>& labels) {
    std::vector<IobSpan> spans;
    std::string open_type;
    int open_start = -1;
    auto close = [&](int end) {
        if (open_start >= 0) spans.push_back({open_type, open_start, end});
        open_start = -1;
        open_type.clear();
    };
    for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
        const std::string& l = labels[static_cast<std::size_t>(i)];
        if (l == "O") {
            close(i);
            continue;
        }
        if (l.size() < 3 || (l[0] != 'B' && l[0] != 'I') || l[1] != '-') {
            throw DataError("unknown label format: " + l);
        }
        const std::string type = l.substr(2);
        if (l[0] == 'B') {
            close(i);
            open_type = type;
            open_start = i;
        } else {  // I-X continues a span of the same type, otherwise starts one
            if (open_start < 0 || open_type != type) {
                close(i);
                open_type = type;
                open_start = i;
            }
        }
    }
    close(static_cast<int>(labels.size()));
    return spans;
}

SpanScore span_f1_iob(const std::vector<std::vector<std::string>>& pred,
                      const std::vector<std::vector<std::string>>& gold) {
    if (pred.size() != gold.size()) throw DataError("span f1: sentence counts differ");
    SpanScore s;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        if (pred[k].size() != gold[k].size()) throw DataError("span f1: length mismatch");
        const auto ps = extract_iob_spans(pred[k]);
        const auto gs = extract_iob_spans(gold[k]);
        s.pred_spans += static_cast<long>(ps.size());
        s.gold_spans += static_cast<long>(gs.size());
        for (const auto& span : ps) {
            if (std::find(gs.begin(), gs.end(), span) != gs.end()) ++s.matched;
        }
    }
    s.precision = s.pred_spans > 0 ? static_cast<double>(s.matched) / s.pred_spans : 0.0;
    s.recall = s.gold_spans > 0 ? static_cast<double>(s.matched) / s.gold_spans : 0.0;
    if (s.pred_spans == 0 && s.gold_spans == 0) {
        s.f1 = 1.0;  // nothing to find, nothing predicted
    } else if (s.precision + s.recall > 0.0) {
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    }
    return s;
}

SpanScore span_f1_iob(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    return span_f1_iob(std::vector<std::vector<std::string>>{pred},
                       std::vector<std::vector<std::string>>{gold});
}

double token_accuracy(const std::vector<int>& pred, const std::vector<int>& gold) {
    if (pred.size() != gold.size()) throw DataError("accuracy: length mismatch");
    if (pred.empty()) throw DataError("accuracy: empty sequences");
    long hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == gold[i]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double token_accuracy(const std::vector<std::vector<int>>& pred,
                      const std::vector<std::vector<int>>& gold) {
    if (pred.size() != gold.size()) throw DataError("accuracy: sentence counts differ");
    long hit = 0, total = 0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        if (pred[k].size() != gold[k].size()) throw DataError("accuracy: length mismatch");
        for (std::size_t i = 0; i < pred[k].size(); ++i) {
            ++total;
            if (pred[k][i] == gold[k][i]) ++hit;
        }
    }
    if (total == 0) throw DataError("accuracy: empty corpus");
    return static_cast<double>(hit) / static_cast<double>(total);
}

PolicyDistribution policy_distribution(const std::vector<PrefixTimeline>& timelines) {
    PolicyDistribution d;
    long wc = 0, wi = 0, rc = 0, ri = 0;
    for (const auto& tl : timelines) {
        const auto& final_row = tl.final_labels();
        for (std::size_t t = 0; t < tl.rows.size(); ++t) {
            const bool write = tl.rows[t].action == Action::Write;
            bool correct = true;  // the prefix the action responded to
            if (t > 0) {
                const auto& prev = tl.rows[t - 1].labels;
                for (std::size_t i = 0; i < prev.size() && correct; ++i) {
                    correct = i < final_row.size() && prev[i] == final_row[i];
                }
            }
            ++d.steps;
            if (write) {
                ++d.writes;
                (correct ? wc : wi) += 1;
            } else {
                ++d.revises;
                (correct ? rc : ri) += 1;
            }
            (correct ? d.correct : d.incorrect) += 1;
        }
    }
    if (d.steps == 0) return d;
    d.overall_write = static_cast<double>(d.writes) / d.steps;
    d.overall_revise = static_cast<double>(d.revises) / d.steps;
    if (d.revises > 0) {
        d.rc_given_r = static_cast<double>(rc) / d.revises;
        d.ri_given_r = static_cast<double>(ri) / d.revises;
    }
    if (d.writes > 0) {
        d.wc_given_w = static_cast<double>(wc) / d.writes;
        d.wi_given_w = static_cast<double>(wi) / d.writes;
    }
    if (d.correct > 0) {
        d.rc_given_c = static_cast<double>(rc) / d.correct;
        d.wc_given_c = static_cast<double>(wc) / d.correct;
    }
    if (d.incorrect > 0) {
        d.wi_given_i = static_cast<double>(wi) / d.incorrect;
        d.ri_given_i = static_cast<double>(ri) / d.incorrect;
    }
    return d;
}

BenchResult throughput_bench(const TapirModel& model, const EncoderModel& reference,
                             const std::vector<std::vector<int>>& sentences, int warmup_iters,
                             int timed_iters) {
    if (sentences.empty()) throw DataError("benchmark on empty corpus");
    using clock = std::chrono::steady_clock;
    BenchResult r;

    for (int w = 0; w < warmup_iters; ++w) {
        for (const auto& ids : sentences) {
            run_sentence(model, ids, 0);
            run_restart_incremental(reference, ids);
        }
    }

    long steps = 0, revises = 0;
    {
        const auto start = clock::now();
        for (int it = 0; it < timed_iters; ++it) {
            for (const auto& ids : sentences) {
                EngineCounters c;
                PrefixTimeline tl = run_sentence(model, ids, 0, -1.0, &c);
                if (it == 0) {
                    r.tapir.token_forwards += c.lstm_steps + c.reviser_token_forwards;
                    r.tapir.reviser_calls += c.reviser_calls;
                    steps += static_cast<long>(tl.rows.size());
                    revises += c.reviser_calls;
                }
            }
        }
        const double secs = std::chrono::duration<double>(clock::now() - start).count();
        r.tapir.sents_per_sec =
            static_cast<double>(sentences.size()) * timed_iters / std::max(secs, 1e-9);
    }
    r.tapir.revise_ratio = steps > 0 ? static_cast<double>(revises) / steps : 0.0;

    {
        const auto start = clock::now();
        for (int it = 0; it < timed_iters; ++it) {
            for (const auto& ids : sentences) {
                EngineCounters c;
                run_restart_incremental(reference, ids, 0, &c);
                if (it == 0) r.reference.token_forwards += c.reviser_token_forwards;
            }
        }
        const double secs = std::chrono::duration<double>(clock::now() - start).count();
        r.reference.sents_per_sec =
            static_cast<double>(sentences.size()) * timed_iters / std::max(secs, 1e-9);
    }
    r.reference.revise_ratio = 1.0;

    r.speedup = r.tapir.sents_per_sec / std::max(r.reference.sents_per_sec, 1e-9);
    return r;
}

namespace {

nlohmann::ordered_json table7_json(const PolicyDistribution& d) {
    return nlohmann::ordered_json{{"overall_write", d.overall_write},
                                  {"overall_revise", d.overall_revise},
                                  {"rc_given_r", d.rc_given_r},
                                  {"ri_given_r", d.ri_given_r},
                                  {"wi_given_w", d.wi_given_w},
                                  {"wc_given_w", d.wc_given_w},
                                  {"rc_given_c", d.rc_given_c},
                                  {"wc_given_c", d.wc_given_c},
                                  {"wi_given_i", d.wi_given_i},
                                  {"ri_given_i", d.ri_given_i},
                                  {"steps", d.steps}};
}

}  // namespace

void write_report_json(const std::string& path, const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["eo"] = report.eo;
    j["ct"] = report.ct;
    j["rc"] = report.rc;
    if (report.delay > 0) {
        j["eo_d" + std::to_string(report.delay)] = report.eo;
        j["rc_d" + std::to_string(report.delay)] = report.rc;
    }
    if (report.f1) j["f1"] = *report.f1;
    if (report.accuracy) j["accuracy"] = *report.accuracy;
    if (report.sents_per_sec) j["sents_per_sec"] = *report.sents_per_sec;
    j["revise_ratio"] = report.revise_ratio;
    j["reviser_calls"] = report.reviser_calls;
    j["table7"] = table7_json(report.table7);
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open report for writing: " + path);
    f << j.dump(2) << '\n';
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open sweep csv for writing: " + path);
    f << "tau,eo,ct,rc,score\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.3f,%.6f,%.6f,%.6f,%.6f\n", r.tau, r.eo, r.ct, r.rc,
                      r.score);
        f << buf;
    }
}

}  // namespace tapir
