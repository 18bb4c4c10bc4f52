#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <future>
#include <iostream>
#include <thread>

#include "tapir/config.hpp"
#include "tapir/corpus.hpp"
#include "tapir/engine.hpp"
#include "tapir/evalkit.hpp"
#include "tapir/signal.hpp"
#include "tapir/synthetic.hpp"
#include "tapir/trainer.hpp"

namespace {

using namespace tapir;

struct SplitCorpus {
    Corpus train;
    Corpus val;
    std::vector<std::size_t> train_idx;  // indices into the source corpus
};

// Validation set from config when given, otherwise a seeded 10% split.
SplitCorpus split_for_training(const Corpus& corpus, const Config& cfg) {
    SplitCorpus out;
    if (!cfg.val_path.empty()) {
        out.train = corpus;
        out.val = load_conll(cfg.val_path);
        for (std::size_t i = 0; i < corpus.sentences.size(); ++i) out.train_idx.push_back(i);
        return out;
    }
    std::vector<std::size_t> idx(corpus.sentences.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(cfg.seed ^ 0x5eedULL);
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }
    const std::size_t n_val = std::max<std::size_t>(1, idx.size() / 10);
    std::vector<char> is_val(idx.size(), 0);
    for (std::size_t i = 0; i < n_val; ++i) is_val[idx[i]] = 1;
    for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
        if (is_val[i]) {
            out.val.sentences.push_back(corpus.sentences[i]);
        } else {
            out.train.sentences.push_back(corpus.sentences[i]);
            out.train_idx.push_back(i);
        }
    }
    out.train.rebuild_metadata();
    out.val.rebuild_metadata();
    return out;
}

int cmd_make_synthetic(const std::string& out_dir, int n_train, int n_val, int n_test, int n_bench,
                       std::uint64_t seed, int min_len, int max_len) {
    auto emit = [&](const std::string& name, int n, int lo, int hi, std::uint64_t salt) {
        SyntheticParams p;
        p.n_sentences = n;
        p.min_len = lo;
        p.max_len = hi;
        p.seed = seed + salt;
        const Corpus c = make_synthetic(p);
        save_conll(c, out_dir + "/" + name);
        std::cout << name << ": " << c.sentences.size() << " sentences, " << c.token_count()
                  << " tokens\n";
    };
    emit("synthetic_train.conll", n_train, min_len, max_len, 0);
    emit("synthetic_val.conll", n_val, min_len, max_len, 1);
    emit("synthetic_test.conll", n_test, min_len, max_len, 2);
    emit("synthetic_bench.conll", n_bench, 20, 28, 3);
    return 0;
}

int cmd_gen_actions(const std::string& config_path, const std::string& corpus_path,
                    const std::string& out_path, const std::string& model_out) {
    const Config cfg = parse_config(config_path);
    const Corpus corpus = load_conll(corpus_path);
    std::cout << "training action generator on " << corpus.sentences.size() << " sentences\n";
    EncoderModel lt = train_encoder(corpus, nullptr, cfg, EncoderPurpose::ActionGenerator,
                                    &std::cout);

    std::vector<ActionSeq> seqs;
    seqs.reserve(corpus.sentences.size());
    double revise_total = 0.0;
    for (const auto& s : corpus.sentences) {
        PrefixTimeline tl = collect_prefix_timeline(lt, encode(s, lt.vocab));
        seqs.push_back(derive_actions(tl));
        revise_total += seqs.back().revise_share();
    }
    write_actions_file(out_path, corpus.sha256, seqs);
    std::cout << "wrote " << out_path << " (mean REVISE share "
              << revise_total / static_cast<double>(seqs.size()) << ")\n";
    if (!model_out.empty()) lt.save(model_out, {{"purpose", "action-generator"}});
    return 0;
}

int cmd_train_encoder(const std::string& config_path, const std::string& corpus_path,
                      const std::string& model_out, EncoderPurpose purpose) {
    const Config cfg = parse_config(config_path);
    const Corpus corpus = load_conll(corpus_path);
    SplitCorpus split = split_for_training(corpus, cfg);
    EncoderModel model = train_encoder(split.train, &split.val, cfg, purpose, &std::cout);
    model.save(model_out,
               {{"purpose", purpose == EncoderPurpose::Reviser ? "reviser" : "reference"}});
    std::cout << "saved " << model_out << "\n";
    return 0;
}

int cmd_train_tapir(const std::string& config_path, const std::string& corpus_path,
                    const std::string& actions_path, const std::string& reviser_path,
                    const std::string& model_out) {
    const Config cfg = parse_config(config_path);
    const Corpus corpus = load_conll(corpus_path);
    const ActionsFile af = read_actions_file(actions_path);
    if (af.corpus_sha256 != corpus.sha256) {
        throw DataError("actions file was generated for a different corpus (hash mismatch)");
    }
    if (af.seqs.size() != corpus.sentences.size()) {
        throw DataError("actions file sentence count does not match the corpus");
    }
    EncoderModel reviser = EncoderModel::load(reviser_path);

    SplitCorpus split = split_for_training(corpus, cfg);
    std::vector<ActionSeq> train_actions;
    train_actions.reserve(split.train_idx.size());
    for (std::size_t i : split.train_idx) train_actions.push_back(af.seqs[i]);

    TapirModel model = train_tapir(split.train, &split.val, cfg, train_actions, reviser,
                                   &std::cout);
    model.save(model_out);
    std::cout << "saved " << model_out << "\n";
    return 0;
}

struct EvalOutcome {
    MetricsReport report;
    std::vector<PrefixTimeline> timelines;
};

EvalOutcome eval_corpus(const std::string& model_path, const Corpus& corpus, int delay,
                        double tau_override, bool deterministic) {
    LoadedCheckpoint peek = load_checkpoint(model_path);
    const std::string kind = peek.hyper_or("model", "");

    std::vector<std::vector<int>> gold;
    for (const auto& s : corpus.sentences) gold.push_back({});

    EvalOutcome out;
    std::vector<PrefixTimeline>& tls = out.timelines;
    tls.resize(corpus.sentences.size());
    long reviser_calls = 0, steps = 0, revises = 0;
    double wall_secs = 0.0;

    LabelSet labels;
    if (kind == "tapir") {
        const TapirModel model = TapirModel::load(model_path);
        labels = model.labels;
        for (std::size_t i = 0; i < corpus.sentences.size(); ++i)
            gold[i] = encode_labels(corpus.sentences[i], model.labels);
        const int d = delay >= 0 ? delay : model.delay;
        out.report.delay = d;
        auto run_range = [&](std::size_t lo, std::size_t hi, std::vector<long>* counters) {
            for (std::size_t i = lo; i < hi; ++i) {
                EngineCounters c;
                tls[i] = run_sentence(model, encode(corpus.sentences[i], model.vocab), d,
                                      tau_override, &c);
                counters->at(0) += c.reviser_calls;
                counters->at(1) += static_cast<long>(tls[i].rows.size());
            }
        };
        const auto start = std::chrono::steady_clock::now();
        unsigned workers = deterministic ? 1 : std::max(1u, std::thread::hardware_concurrency());
        workers = std::min<unsigned>(workers, 8);
        if (workers <= 1 || corpus.sentences.size() < 2 * workers) {
            std::vector<long> c{0, 0};
            run_range(0, corpus.sentences.size(), &c);
            reviser_calls = c[0];
            steps = c[1];
        } else {
            std::vector<std::future<std::vector<long>>> futs;
            const std::size_t chunk = (corpus.sentences.size() + workers - 1) / workers;
            for (unsigned w = 0; w < workers; ++w) {
                const std::size_t lo = w * chunk;
                const std::size_t hi = std::min(corpus.sentences.size(), lo + chunk);
                if (lo >= hi) break;
                futs.push_back(std::async(std::launch::async, [&, lo, hi]() {
                    std::vector<long> c{0, 0};
                    run_range(lo, hi, &c);
                    return c;
                }));
            }
            for (auto& f : futs) {
                const auto c = f.get();
                reviser_calls += c[0];
                steps += c[1];
            }
        }
        wall_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (const auto& tl : tls)
            for (const auto& row : tl.rows) revises += row.action == Action::Revise ? 1 : 0;
    } else if (kind == "encoder") {
        const EncoderModel model = EncoderModel::load(model_path);
        labels = model.labels;
        for (std::size_t i = 0; i < corpus.sentences.size(); ++i)
            gold[i] = encode_labels(corpus.sentences[i], model.labels);
        const int d = delay >= 0 ? delay : 0;
        out.report.delay = d;
        const auto start = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
            EngineCounters c;
            tls[i] = run_restart_incremental(model, encode(corpus.sentences[i], model.vocab), d, &c);
            reviser_calls += c.encoder_calls;
            steps += static_cast<long>(tls[i].rows.size());
        }
        revises = steps;
        wall_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    } else {
        throw DataError(model_path + " is not an evaluable checkpoint");
    }

    double eo = 0.0, ct = 0.0, rc = 0.0;
    for (const auto& tl : tls) {
        eo += edit_overhead(tl);
        ct += correction_time(tl);
        rc += relative_correctness(tl);
    }
    const double n = static_cast<double>(tls.size());
    out.report.eo = eo / n;
    out.report.ct = ct / n;
    out.report.rc = rc / n;
    out.report.revise_ratio = steps > 0 ? static_cast<double>(revises) / steps : 0.0;
    out.report.reviser_calls = reviser_calls;
    out.report.table7 = policy_distribution(tls);
    if (!deterministic) out.report.sents_per_sec = n / std::max(wall_secs, 1e-9);

    if (labels.is_iob()) {
        std::vector<std::vector<std::string>> ps, gs;
        for (std::size_t i = 0; i < tls.size(); ++i) {
            std::vector<std::string> pr, gr;
            for (int id : tls[i].final_labels())
                pr.push_back(labels.id_to_label[static_cast<std::size_t>(id)]);
            for (int id : gold[i]) gr.push_back(labels.id_to_label[static_cast<std::size_t>(id)]);
            ps.push_back(std::move(pr));
            gs.push_back(std::move(gr));
        }
        out.report.f1 = span_f1_iob(ps, gs).f1;
    } else {
        std::vector<std::vector<int>> ps;
        for (const auto& tl : tls) ps.push_back(tl.final_labels());
        out.report.accuracy = token_accuracy(ps, gold);
    }
    return out;
}

int cmd_eval(const std::string& model_path, const std::string& corpus_path, int delay,
             const std::string& report_path, double tau_override, bool deterministic,
             const std::string& timelines_path) {
    const Corpus corpus = load_conll(corpus_path);
    EvalOutcome out = eval_corpus(model_path, corpus, delay, tau_override, deterministic);
    write_report_json(report_path, out.report);
    if (!timelines_path.empty()) {
        LoadedCheckpoint peek = load_checkpoint(model_path);
        const LabelSet labels = labels_from_hypers(peek.hypers);
        std::ofstream f(timelines_path, std::ios::trunc);
        if (!f) throw DataError("cannot open timeline dump for writing: " + timelines_path);
        for (const auto& tl : out.timelines) dump_timeline(f, tl, labels);
    }
    std::cout << "eo=" << out.report.eo << " ct=" << out.report.ct << " rc=" << out.report.rc;
    if (out.report.f1) std::cout << " f1=" << *out.report.f1;
    if (out.report.accuracy) std::cout << " acc=" << *out.report.accuracy;
    std::cout << " revise_ratio=" << out.report.revise_ratio << "\n";
    std::cout << "wrote " << report_path << "\n";
    return 0;
}

int cmd_bench(const std::string& model_path, const std::string& reference_path,
              const std::string& corpus_path, const std::string& report_path, int warmup,
              int iters) {
    const TapirModel model = TapirModel::load(model_path);
    const EncoderModel reference = EncoderModel::load(reference_path);
    const Corpus corpus = load_conll(corpus_path);
    std::vector<std::vector<int>> ids;
    for (const auto& s : corpus.sentences) ids.push_back(encode(s, model.vocab));
    const BenchResult r = throughput_bench(model, reference, ids, warmup, iters);

    nlohmann::ordered_json j;
    j["tapir"] = {{"sents_per_sec", r.tapir.sents_per_sec},
                  {"token_forwards", r.tapir.token_forwards},
                  {"reviser_calls", r.tapir.reviser_calls},
                  {"revise_ratio", r.tapir.revise_ratio}};
    j["reference"] = {{"sents_per_sec", r.reference.sents_per_sec},
                      {"token_forwards", r.reference.token_forwards}};
    j["speedup"] = r.speedup;
    std::ofstream f(report_path, std::ios::trunc);
    if (!f) throw DataError("cannot open report for writing: " + report_path);
    f << j.dump(2) << '\n';
    std::cout << "tapir " << r.tapir.sents_per_sec << " sents/s, reference "
              << r.reference.sents_per_sec << " sents/s, speedup " << r.speedup << "x\n";
    return 0;
}

int cmd_sweep_tau(const std::string& model_path, const std::string& corpus_path,
                  const std::string& taus_arg, const std::string& out_path) {
    const Corpus corpus = load_conll(corpus_path);
    std::vector<double> taus;
    std::size_t start = 0;
    while (start <= taus_arg.size()) {
        std::size_t end = taus_arg.find(',', start);
        if (end == std::string::npos) end = taus_arg.size();
        const std::string piece = taus_arg.substr(start, end - start);
        if (!piece.empty()) taus.push_back(std::stod(piece));
        start = end + 1;
    }
    if (taus.empty()) throw ConfigError("sweep-tau: no thresholds given");

    std::vector<SweepRow> rows;
    for (double tau : taus) {
        if (tau < 0.0 || tau > 1.0) throw ConfigError("sweep-tau: tau out of [0,1]");
        EvalOutcome out = eval_corpus(model_path, corpus, -1, tau, true);
        const double score = out.report.f1 ? *out.report.f1 : out.report.accuracy.value_or(0.0);
        rows.push_back({tau, out.report.eo, out.report.ct, out.report.rc, score,
                        out.report.reviser_calls});
        std::cout << "tau=" << tau << " eo=" << out.report.eo << " ct=" << out.report.ct
                  << " rc=" << out.report.rc << " score=" << score
                  << " reviser_calls=" << out.report.reviser_calls << "\n";
    }
    write_sweep_csv(out_path, rows);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TAPIR incremental sequence labelling toolkit"};
    app.require_subcommand(1);

    auto* mk = app.add_subcommand("make-synthetic", "generate the bundled synthetic corpus");
    std::string mk_out = "data";
    int mk_train = 2000, mk_val = 300, mk_test = 300, mk_bench = 150;
    std::uint64_t mk_seed = kDefaultSeed;
    int mk_min = 5, mk_max = 18;
    mk->add_option("--out-dir", mk_out);
    mk->add_option("--train", mk_train);
    mk->add_option("--val", mk_val);
    mk->add_option("--test", mk_test);
    mk->add_option("--bench", mk_bench);
    mk->add_option("--seed", mk_seed);
    mk->add_option("--min-len", mk_min);
    mk->add_option("--max-len", mk_max);

    auto* ga = app.add_subcommand("gen-actions", "train a single-layer LT and derive W/R actions");
    std::string ga_config, ga_corpus, ga_out, ga_model_out;
    ga->add_option("--config", ga_config)->required();
    ga->add_option("--corpus", ga_corpus)->required();
    ga->add_option("--out", ga_out)->required();
    ga->add_option("--model-out", ga_model_out);

    auto* tr = app.add_subcommand("train-reviser", "train the second-pass reviser");
    std::string tr_config, tr_corpus, tr_out;
    tr->add_option("--config", tr_config)->required();
    tr->add_option("--corpus", tr_corpus)->required();
    tr->add_option("--model-out", tr_out)->required();

    auto* tf = app.add_subcommand("train-reference", "train the restart-incremental reference");
    std::string tf_config, tf_corpus, tf_out;
    tf->add_option("--config", tf_config)->required();
    tf->add_option("--corpus", tf_corpus)->required();
    tf->add_option("--model-out", tf_out)->required();

    auto* tt = app.add_subcommand("train-tapir", "train processor, controller and policy");
    std::string tt_config, tt_corpus, tt_actions, tt_reviser, tt_out;
    tt->add_option("--config", tt_config)->required();
    tt->add_option("--corpus", tt_corpus)->required();
    tt->add_option("--actions", tt_actions)->required();
    tt->add_option("--reviser", tt_reviser)->required();
    tt->add_option("--model-out", tt_out)->required();

    auto* ev = app.add_subcommand("eval", "incremental + non-incremental evaluation");
    std::string ev_model, ev_corpus, ev_report, ev_timelines;
    int ev_delay = -1;
    double ev_tau = -1.0;
    bool ev_det = false;
    ev->add_option("--model", ev_model)->required();
    ev->add_option("--corpus", ev_corpus)->required();
    ev->add_option("--delay", ev_delay)->check(CLI::Range(0, 2));
    ev->add_option("--report", ev_report)->required();
    ev->add_option("--tau", ev_tau);
    ev->add_option("--timelines", ev_timelines);
    ev->add_flag("--deterministic", ev_det);

    auto* be = app.add_subcommand("bench", "matched-condition throughput benchmark");
    std::string be_model, be_ref, be_corpus, be_report;
    int be_warmup = 1, be_iters = 3;
    be->add_option("--model", be_model)->required();
    be->add_option("--reference", be_ref)->required();
    be->add_option("--corpus", be_corpus)->required();
    be->add_option("--report", be_report)->required();
    be->add_option("--warmup", be_warmup);
    be->add_option("--iters", be_iters);

    auto* sw = app.add_subcommand("sweep-tau", "metrics across decision thresholds");
    std::string sw_model, sw_corpus, sw_taus = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
    std::string sw_out;
    sw->add_option("--model", sw_model)->required();
    sw->add_option("--corpus", sw_corpus)->required();
    sw->add_option("--taus", sw_taus);
    sw->add_option("--out", sw_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (mk->parsed())
            return cmd_make_synthetic(mk_out, mk_train, mk_val, mk_test, mk_bench, mk_seed, mk_min,
                                      mk_max);
        if (ga->parsed()) return cmd_gen_actions(ga_config, ga_corpus, ga_out, ga_model_out);
        if (tr->parsed())
            return cmd_train_encoder(tr_config, tr_corpus, tr_out, EncoderPurpose::Reviser);
        if (tf->parsed())
            return cmd_train_encoder(tf_config, tf_corpus, tf_out, EncoderPurpose::Reference);
        if (tt->parsed())
            return cmd_train_tapir(tt_config, tt_corpus, tt_actions, tt_reviser, tt_out);
        if (ev->parsed())
            return cmd_eval(ev_model, ev_corpus, ev_delay, ev_report, ev_tau, ev_det, ev_timelines);
        if (be->parsed()) return cmd_bench(be_model, be_ref, be_corpus, be_report, be_warmup,
                                           be_iters);
        if (sw->parsed()) return cmd_sweep_tau(sw_model, sw_corpus, sw_taus, sw_out);
    } catch (const tapir::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const tapir::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const tapir::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
