#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "model_util.hpp"
#include "tapir/signal.hpp"

using namespace tapir;

namespace {

PrefixTimeline timeline_from(const std::vector<std::vector<int>>& rows) {
    PrefixTimeline tl;
    for (const auto& r : rows) tl.rows.push_back({r, Action::Revise, 1.0});
    tl.n_tokens = static_cast<int>(rows.size());
    return tl;
}

// independent oracle: elementwise diff of consecutive rows, excluding y_t
std::vector<Action> diff_oracle(const std::vector<std::vector<int>>& rows) {
    std::vector<Action> out{Action::Write};
    for (std::size_t t = 1; t < rows.size(); ++t) {
        bool any = false;
        for (std::size_t i = 0; i + 1 < rows[t].size(); ++i) any |= rows[t][i] != rows[t - 1][i];
        out.push_back(any ? Action::Revise : Action::Write);
    }
    return out;
}

}  // namespace

TEST_CASE("fully monotonic timelines derive all-write actions") {
    auto tl = timeline_from({{3}, {3, 1}, {3, 1, 2}, {3, 1, 2, 0}});
    auto seq = derive_actions(tl);
    for (Action a : seq.actions) CHECK(a == Action::Write);
    CHECK(seq.revise_share() == 0.0);
}

TEST_CASE("revisions at steps 3 and 7 are recovered exactly") {
    // noun -> adj style repair at t=3, another at t=7
    auto tl = timeline_from({{0},
                             {0, 1},
                             {0, 2, 1},           // position 2 changes
                             {0, 2, 1, 1},
                             {0, 2, 1, 1, 0},
                             {0, 2, 1, 1, 0, 3},
                             {0, 2, 1, 1, 0, 1, 2},  // position 6 changes
                             {0, 2, 1, 1, 0, 1, 2, 0}});
    auto seq = derive_actions(tl);
    std::vector<int> revise_steps;
    for (std::size_t t = 0; t < seq.actions.size(); ++t) {
        if (seq.actions[t] == Action::Revise) revise_steps.push_back(static_cast<int>(t) + 1);
    }
    CHECK(revise_steps == std::vector<int>{3, 7});
    CHECK(seq.actions[0] == Action::Write);
}

TEST_CASE("derived actions equal the brute-force diff oracle on random timelines") {
    Rng rng(99);
    for (int rep = 0; rep < 300; ++rep) {
        const int t_len = 1 + static_cast<int>(rng.next_u64() % 12);
        std::vector<std::vector<int>> rows;
        std::vector<int> cur;
        for (int t = 0; t < t_len; ++t) {
            for (auto& v : cur) {
                if (rng.bernoulli(0.25)) v = rng.uniform_int(0, 3);
            }
            cur.push_back(rng.uniform_int(0, 3));
            rows.push_back(cur);
        }
        auto seq = derive_actions(timeline_from(rows));
        CHECK(seq.actions == diff_oracle(rows));
        CHECK(seq.actions.front() == Action::Write);
    }
}

TEST_CASE("ragged timelines are rejected") {
    CHECK_THROWS_AS(derive_actions(timeline_from({{1}, {1, 2, 3}})), DataError);
}

TEST_CASE("actions file round trip with hash binding") {
    const std::string path = "/tmp/tapir_actions_test.txt";
    std::vector<ActionSeq> seqs(2);
    seqs[0].actions = {Action::Write, Action::Revise, Action::Write};
    seqs[1].actions = {Action::Write};
    write_actions_file(path, "abc123", seqs);
    ActionsFile af = read_actions_file(path);
    CHECK(af.corpus_sha256 == "abc123");
    REQUIRE(af.seqs.size() == 2);
    CHECK(af.seqs[0].actions == seqs[0].actions);
    CHECK(af.seqs[1].actions == seqs[1].actions);
    std::remove(path.c_str());
}

TEST_CASE("actions file without header or with bad symbols is rejected") {
    const std::string path = "/tmp/tapir_actions_bad.txt";
    {
        std::ofstream f(path);
        f << "W R W\n";
    }
    CHECK_THROWS_AS(read_actions_file(path), DataError);
    {
        std::ofstream f(path, std::ios::trunc);
        f << "#corpus-sha256=x\nW Q\n";
    }
    CHECK_THROWS_AS(read_actions_file(path), DataError);
    std::remove(path.c_str());
}

TEST_CASE("prefix collection requires a single-layer linear transformer") {
    auto trf = testutil::random_encoder(ReviserKind::Transformer, 10, 6, 8, 16, 2, 1, 4, 1);
    CHECK_THROWS_AS(collect_prefix_timeline(trf, {2, 3}), DataError);
    auto deep_lt = testutil::random_encoder(ReviserKind::LinearTransformer, 10, 6, 8, 16, 2, 2, 4, 2);
    CHECK_THROWS_AS(collect_prefix_timeline(deep_lt, {2, 3}), DataError);
}

TEST_CASE("collected rows share their last element with the causal run") {
    auto lt = testutil::random_encoder(ReviserKind::LinearTransformer, 12, 6, 8, 16, 2, 1, 4, 3);
    Rng rng(41);
    for (int rep = 0; rep < 5; ++rep) {
        const auto ids = testutil::random_ids(9, lt.vocab.size(), rng);
        PrefixTimeline tl = collect_prefix_timeline(lt, ids);
        REQUIRE(tl.rows.size() == ids.size());
        const auto causal = lt.predict(ids, AttentionMask::Causal);
        for (std::size_t t = 0; t < tl.rows.size(); ++t) {
            CHECK(tl.rows[t].labels.size() == t + 1);
            // duality: the newest position of the unmasked prefix run equals
            // the causal output at that step
            CHECK(tl.rows[t].labels.back() == causal[t]);
        }
    }
}

TEST_CASE("a single token row equals the causal first step") {
    auto lt = testutil::random_encoder(ReviserKind::LinearTransformer, 12, 6, 8, 16, 2, 1, 4, 4);
    const std::vector<int> ids{5};
    PrefixTimeline tl = collect_prefix_timeline(lt, ids);
    CHECK(tl.rows[0].labels == lt.predict(ids, AttentionMask::Causal));
}

TEST_CASE("earlier positions can be revised as the prefix grows") {
    auto lt = testutil::random_encoder(ReviserKind::LinearTransformer, 20, 6, 8, 16, 2, 1, 8, 5);
    Rng rng(43);
    bool found_disagreement = false;
    for (int rep = 0; rep < 20 && !found_disagreement; ++rep) {
        const auto ids = testutil::random_ids(14, lt.vocab.size(), rng);
        PrefixTimeline tl = collect_prefix_timeline(lt, ids);
        const auto seq = derive_actions(tl);
        for (Action a : seq.actions) found_disagreement |= a == Action::Revise;
    }
    CHECK(found_disagreement);  // the basis of the supervision signal
}
