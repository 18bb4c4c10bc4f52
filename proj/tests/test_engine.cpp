#include <doctest.h>

#include <sstream>

#include "model_util.hpp"
#include "tapir/engine.hpp"
#include "tapir/ops.hpp"

using namespace tapir;
using testutil::random_tapir_model;
using testutil::TapirDims;

TEST_CASE("tau=1 never revises and reproduces the standalone lstm run") {
    TapirModel model = random_tapir_model(TapirDims{}, 101);
    Rng rng(7);
    for (int rep = 0; rep < 5; ++rep) {
        const auto ids = testutil::random_ids(9, model.vocab.size(), rng);
        EngineCounters c;
        PrefixTimeline tl = run_sentence(model, ids, 0, 1.0, &c);
        CHECK(c.reviser_calls == 0);
        CHECK(c.lstm_steps == 9);
        REQUIRE(tl.rows.size() == ids.size());

        // standalone first-pass run
        auto state = model.lstm.initial_state();
        std::vector<int> expect;
        for (std::size_t t = 0; t < ids.size(); ++t) {
            Tensor x = slice_row(embedding(model.embeddings, {ids[t]}), 0);
            Tensor h = model.lstm.step(state, x);
            expect.push_back(argmax(model.lstm.logits(h).value()));
            CHECK(tl.rows[t].labels == std::vector<int>(expect.begin(), expect.end()));
            CHECK(tl.rows[t].action == Action::Write);
        }
        CHECK(finalize(tl) == expect);
    }
}

TEST_CASE("tau=0 revises every step and matches the restart-incremental reviser") {
    TapirModel model = random_tapir_model(TapirDims{}, 202);
    Rng rng(11);
    const auto ids = testutil::random_ids(8, model.vocab.size(), rng);
    EngineCounters c;
    PrefixTimeline tl = run_sentence(model, ids, 0, 0.0, &c);
    CHECK(c.reviser_calls == 8);
    CHECK(c.reviser_token_forwards == 8 * 9 / 2);

    PrefixTimeline restart = run_restart_incremental(model.reviser, ids);
    REQUIRE(tl.rows.size() == restart.rows.size());
    for (std::size_t t = 0; t < tl.rows.size(); ++t) {
        CHECK(tl.rows[t].labels == restart.rows[t].labels);
        CHECK(tl.rows[t].action == Action::Revise);
    }
}

TEST_CASE("timeline rows grow by one label per step without delay") {
    TapirModel model = random_tapir_model(TapirDims{}, 303);
    Rng rng(13);
    const auto ids = testutil::random_ids(7, model.vocab.size(), rng);
    PrefixTimeline tl = run_sentence(model, ids, 0);
    for (std::size_t t = 0; t < tl.rows.size(); ++t) CHECK(tl.rows[t].labels.size() == t + 1);
}

TEST_CASE("write steps never change the committed prefix") {
    TapirModel model = random_tapir_model(TapirDims{}, 304);
    Rng rng(17);
    for (int rep = 0; rep < 6; ++rep) {
        const auto ids = testutil::random_ids(10, model.vocab.size(), rng);
        PrefixTimeline tl = run_sentence(model, ids, 0, 0.7);
        for (std::size_t t = 1; t < tl.rows.size(); ++t) {
            if (tl.rows[t].action == Action::Write) {
                const auto& prev = tl.rows[t - 1].labels;
                for (std::size_t i = 0; i < prev.size(); ++i)
                    CHECK(tl.rows[t].labels[i] == prev[i]);
            }
        }
    }
}

TEST_CASE("delay shifts emission and flush steps complete the labels") {
    TapirDims dims;
    TapirModel model = random_tapir_model(dims, 405);
    Rng rng(19);
    const auto ids = testutil::random_ids(5, model.vocab.size(), rng);

    PrefixTimeline tl1 = run_sentence(model, ids, 1, 1.0);
    CHECK(tl1.rows.size() == 6);  // T + d emission steps
    for (std::size_t t = 0; t < tl1.rows.size(); ++t) {
        CHECK(tl1.rows[t].labels.size() ==
              static_cast<std::size_t>(std::max(0, static_cast<int>(t) + 1 - 1)));
    }
    CHECK(finalize(tl1).size() == ids.size());

    PrefixTimeline tl2 = run_sentence(model, ids, 2, 0.4);
    CHECK(tl2.rows.size() == 7);
    CHECK(finalize(tl2).size() == ids.size());
}

TEST_CASE("restart runner: single token equals the full-sequence output") {
    auto enc = testutil::random_encoder(ReviserKind::Transformer, 10, 6, 8, 16, 2, 1, 4, 55);
    const std::vector<int> ids{3};
    PrefixTimeline tl = run_restart_incremental(enc, ids);
    REQUIRE(tl.rows.size() == 1);
    CHECK(tl.rows[0].labels == enc.predict(ids, AttentionMask::None));
}

TEST_CASE("restart runner: final row equals the non-incremental output, cost is quadratic") {
    auto enc = testutil::random_encoder(ReviserKind::Transformer, 10, 6, 8, 16, 2, 1, 4, 56);
    Rng rng(23);
    const auto ids = testutil::random_ids(9, enc.vocab.size(), rng);
    EngineCounters c;
    PrefixTimeline tl = run_restart_incremental(enc, ids, 0, &c);
    CHECK(tl.rows.back().labels == enc.predict(ids, AttentionMask::None));
    CHECK(c.reviser_token_forwards == 9 * 10 / 2);
    CHECK(c.encoder_calls == 9);
}

TEST_CASE("restart runner with inference-only delay trims rows and flushes") {
    auto enc = testutil::random_encoder(ReviserKind::Transformer, 10, 6, 8, 16, 2, 1, 4, 57);
    Rng rng(29);
    const auto ids = testutil::random_ids(6, enc.vocab.size(), rng);
    PrefixTimeline tl = run_restart_incremental(enc, ids, 2);
    CHECK(tl.rows.size() == 8);
    for (std::size_t t = 0; t < tl.rows.size(); ++t) {
        const int expect = std::max(0, static_cast<int>(t) + 1 - 2);
        CHECK(tl.rows[t].labels.size() == static_cast<std::size_t>(std::min(expect, 6)));
    }
    CHECK(finalize(tl).size() == ids.size());
}

TEST_CASE("finalize returns the last row verbatim and rejects empty timelines") {
    PrefixTimeline tl;
    tl.rows.push_back({{0}, Action::Write, 0.1});
    tl.rows.push_back({{2, 1}, Action::Revise, 0.9});
    CHECK(finalize(tl) == std::vector<int>{2, 1});
    CHECK_THROWS_AS(finalize(PrefixTimeline{}), DataError);
}

TEST_CASE("empty sentences are rejected") {
    TapirModel model = random_tapir_model(TapirDims{}, 1);
    CHECK_THROWS_AS(run_sentence(model, {}, 0), DataError);
    CHECK_THROWS_AS(run_restart_incremental(model.reviser, {}), DataError);
}

TEST_CASE("timeline dump format") {
    PrefixTimeline tl;
    tl.rows.push_back({{0}, Action::Write, 0.25});
    tl.rows.push_back({{0, 1}, Action::Revise, 0.75});
    LabelSet labels = LabelSet::from_names({"B-X", "O"});
    std::ostringstream os;
    dump_timeline(os, tl, labels);
    CHECK(os.str() == "t=1 a=W p=0.250000\tB-X\nt=2 a=R p=0.750000\tB-X\tO\n\n");
}

TEST_CASE("tapir checkpoints round trip through save and load") {
    TapirModel model = random_tapir_model(TapirDims{}, 777);
    model.tau = 0.35;
    model.memory_size = 3;
    const std::string path = "/tmp/tapir_model_roundtrip.ckpt";
    model.save(path);
    TapirModel back = TapirModel::load(path);
    CHECK(back.tau == doctest::Approx(0.35));
    CHECK(back.memory_size == 3);
    CHECK(back.vocab.id_to_token == model.vocab.id_to_token);
    CHECK(back.labels.id_to_label == model.labels.id_to_label);
    CHECK(back.embeddings.value() == model.embeddings.value());

    Rng rng(31);
    const auto ids = testutil::random_ids(8, model.vocab.size(), rng);
    PrefixTimeline a = run_sentence(model, ids, 0);
    PrefixTimeline b = run_sentence(back, ids, 0);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t t = 0; t < a.rows.size(); ++t) {
        CHECK(a.rows[t].labels == b.rows[t].labels);
        CHECK(a.rows[t].action == b.rows[t].action);
        CHECK(a.rows[t].score == doctest::Approx(b.rows[t].score));
    }
    std::remove(path.c_str());
}

TEST_CASE("encoder checkpoints round trip") {
    auto enc = testutil::random_encoder(ReviserKind::LinearTransformer, 10, 6, 8, 16, 2, 1, 4, 99);
    const std::string path = "/tmp/tapir_encoder_roundtrip.ckpt";
    enc.save(path);
    EncoderModel back = EncoderModel::load(path);
    CHECK(back.kind == ReviserKind::LinearTransformer);
    Rng rng(37);
    const auto ids = testutil::random_ids(6, enc.vocab.size(), rng);
    CHECK(back.predict(ids, AttentionMask::None) == enc.predict(ids, AttentionMask::None));
    CHECK(back.predict(ids, AttentionMask::Causal) == enc.predict(ids, AttentionMask::Causal));
    std::remove(path.c_str());
}
