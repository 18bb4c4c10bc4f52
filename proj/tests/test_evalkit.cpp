#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "tapir/evalkit.hpp"

using namespace tapir;

namespace {

PrefixTimeline timeline_from(const std::vector<std::vector<int>>& rows,
                             const std::vector<Action>& actions = {}) {
    PrefixTimeline tl;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Action a = actions.empty() ? Action::Write : actions[i];
        tl.rows.push_back({rows[i], a, 0.5});
    }
    tl.n_tokens = rows.empty() ? 0 : static_cast<int>(rows.back().size());
    return tl;
}

}  // namespace

TEST_CASE("monotonic timelines score EO=0, CT=0, RC=1") {
    auto tl = timeline_from({{1}, {1, 2}, {1, 2, 0}});
    CHECK(edit_overhead(tl) == 0.0);
    CHECK(correction_time(tl) == 0.0);
    CHECK(relative_correctness(tl) == 1.0);
}

TEST_CASE("one substitution among three tokens gives EO 0.25") {
    auto tl = timeline_from({{1}, {1, 2}, {3, 2, 0}});  // position 1 edited at t=3
    CHECK(edit_overhead(tl) == doctest::Approx(0.25));
}

TEST_CASE("an all-rewrite timeline approaches the closed-form worst case") {
    const int t_len = 7;
    std::vector<std::vector<int>> rows;
    for (int t = 1; t <= t_len; ++t) {
        std::vector<int> row;
        for (int i = 0; i < t; ++i) row.push_back((t + i) % 2);  // every label flips each step
        rows.push_back(row);
    }
    const double s = t_len * (t_len - 1) / 2.0;
    CHECK(edit_overhead(timeline_from(rows)) == doctest::Approx(s / (t_len + s)));
}

TEST_CASE("correction time follows the settle-step definition") {
    // token 0 emitted at t=1, settles at t=3, horizon 5: (3-1)/(5-1) = 0.5
    auto tl = timeline_from({{9}, {8, 1}, {7, 1, 1}, {7, 1, 1, 1}, {7, 1, 1, 1, 1}});
    const double expect0 = 0.5;
    // token 1..4 settle immediately: contribution 0 each
    CHECK(correction_time(tl) == doctest::Approx(expect0 / 5.0));
}

TEST_CASE("the last token contributes zero correction time") {
    auto tl = timeline_from({{1}, {1, 2}});
    CHECK(correction_time(tl) == 0.0);
}

TEST_CASE("relative correctness counts rows that prefix the final output") {
    auto tl = timeline_from({{1}, {2, 2}, {1, 2, 3}, {1, 2, 3, 4}, {1, 2, 3, 4, 5}});
    CHECK(relative_correctness(tl) == doctest::Approx(0.8));  // row 2 is not a prefix
}

TEST_CASE("span extraction follows conlleval rules") {
    auto spans = extract_iob_spans({"B-A", "I-A", "O", "I-B", "I-B", "B-A"});
    REQUIRE(spans.size() == 3);
    CHECK(spans[0] == IobSpan{"A", 0, 2});
    CHECK(spans[1] == IobSpan{"B", 3, 5});  // bare I-B starts a span
    CHECK(spans[2] == IobSpan{"A", 5, 6});
    // I after a different type starts a new span
    auto mixed = extract_iob_spans({"B-A", "I-B"});
    REQUIRE(mixed.size() == 2);
    CHECK_THROWS_AS(extract_iob_spans({"X-A"}), DataError);
}

TEST_CASE("span f1 on the stated examples") {
    CHECK(span_f1_iob({"B-A", "I-A", "O"}, {"B-A", "I-A", "O"}).f1 == doctest::Approx(1.0));
    CHECK(span_f1_iob({"O", "O", "O"}, {"B-A", "I-A", "O"}).f1 == doctest::Approx(0.0));
    // boundary mismatch: no credit
    CHECK(span_f1_iob({"B-A", "I-A", "O"}, {"B-A", "O", "O"}).f1 == doctest::Approx(0.0));
}

TEST_CASE("span f1 equals a brute-force span-set oracle on random sequences") {
    Rng rng(314);
    const std::vector<std::string> alphabet = {"O", "B-A", "I-A", "B-B", "I-B"};
    auto random_seq = [&](int len) {
        std::vector<std::string> s;
        for (int i = 0; i < len; ++i)
            s.push_back(alphabet[static_cast<std::size_t>(rng.uniform_int(0, 4))]);
        return s;
    };
    // independent oracle: enumerate spans by scanning boundaries directly
    auto oracle_spans = [](const std::vector<std::string>& labels) {
        std::set<std::string> spans;
        const int n = static_cast<int>(labels.size());
        for (int start = 0; start < n; ++start) {
            const std::string& l = labels[static_cast<std::size_t>(start)];
            if (l == "O" || l[0] == 'I') {
                const bool continues =
                    l[0] == 'I' && start > 0 &&
                    labels[static_cast<std::size_t>(start - 1)] != "O" &&
                    labels[static_cast<std::size_t>(start - 1)].substr(1) == l.substr(1);
                if (l == "O" || continues) continue;
            }
            const std::string type = l.substr(2);
            int end = start + 1;
            while (end < n && labels[static_cast<std::size_t>(end)] == "I-" + type) ++end;
            spans.insert(type + ":" + std::to_string(start) + "-" + std::to_string(end));
        }
        return spans;
    };
    for (int rep = 0; rep < 1000; ++rep) {
        const int len = 1 + static_cast<int>(rng.next_u64() % 12);
        const auto pred = random_seq(len);
        const auto gold = random_seq(len);
        const auto po = oracle_spans(pred);
        const auto go = oracle_spans(gold);
        long matched = 0;
        for (const auto& s : po) matched += go.count(s) ? 1 : 0;
        const SpanScore got = span_f1_iob(pred, gold);
        CHECK(got.pred_spans == static_cast<long>(po.size()));
        CHECK(got.gold_spans == static_cast<long>(go.size()));
        CHECK(got.matched == matched);
        double expect;
        if (po.empty() && go.empty()) {
            expect = 1.0;
        } else if (matched == 0) {
            expect = 0.0;
        } else {
            const double p = static_cast<double>(matched) / static_cast<double>(po.size());
            const double r = static_cast<double>(matched) / static_cast<double>(go.size());
            expect = 2.0 * p * r / (p + r);
        }
        CHECK(got.f1 == doctest::Approx(expect));
    }
}

TEST_CASE("token accuracy basics") {
    CHECK(token_accuracy(std::vector<int>{1, 2, 3}, std::vector<int>{1, 2, 3}) == 1.0);
    CHECK(token_accuracy(std::vector<int>{1, 2}, std::vector<int>{2, 1}) == 0.0);
    CHECK(token_accuracy(std::vector<int>{1, 2, 3, 4}, std::vector<int>{1, 2, 0, 0}) == 0.5);
    CHECK_THROWS_AS(token_accuracy(std::vector<int>{1}, std::vector<int>{1, 2}), DataError);
}

TEST_CASE("policy distribution on an all-write monotonic run") {
    auto tl = timeline_from({{1}, {1, 2}, {1, 2, 3}});
    PolicyDistribution d = policy_distribution({tl});
    CHECK(d.overall_write == doctest::Approx(1.0));
    CHECK(d.wc_given_w == doctest::Approx(1.0));
    CHECK(d.incorrect == 0);
}

TEST_CASE("policy distribution matches a hand-enumerated four-step run") {
    // rows after each step; action at step t responds to the prefix of t-1
    auto tl = timeline_from({{7}, {7, 7}, {1, 2, 3}, {1, 2, 3, 4}},
                            {Action::Write, Action::Write, Action::Revise, Action::Write});
    // final = 1,2,3,4. prefixes before steps: t1 [], t2 [7], t3 [7,7], t4 [1,2,3]
    // -> C,I,I,C ; actions W,W,R,W
    PolicyDistribution d = policy_distribution({tl});
    CHECK(d.steps == 4);
    CHECK(d.writes == 3);
    CHECK(d.revises == 1);
    CHECK(d.correct == 2);
    CHECK(d.incorrect == 2);
    CHECK(d.overall_write == doctest::Approx(0.75));
    CHECK(d.overall_revise == doctest::Approx(0.25));
    CHECK(d.rc_given_r == doctest::Approx(0.0));
    CHECK(d.ri_given_r == doctest::Approx(1.0));
    CHECK(d.wc_given_w == doctest::Approx(2.0 / 3.0));
    CHECK(d.wi_given_w == doctest::Approx(1.0 / 3.0));
    CHECK(d.rc_given_c == doctest::Approx(0.0));
    CHECK(d.wc_given_c == doctest::Approx(1.0));
    CHECK(d.wi_given_i == doctest::Approx(0.5));
    CHECK(d.ri_given_i == doctest::Approx(0.5));
}

TEST_CASE("policy distribution conditional blocks sum to one") {
    Rng rng(159);
    std::vector<PrefixTimeline> tls;
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<std::vector<int>> rows;
        std::vector<Action> acts;
        std::vector<int> cur;
        const int t_len = 2 + static_cast<int>(rng.next_u64() % 8);
        for (int t = 0; t < t_len; ++t) {
            for (auto& v : cur)
                if (rng.bernoulli(0.2)) v = rng.uniform_int(0, 2);
            cur.push_back(rng.uniform_int(0, 2));
            rows.push_back(cur);
            acts.push_back(rng.bernoulli(0.3) ? Action::Revise : Action::Write);
        }
        tls.push_back(timeline_from(rows, acts));
    }
    PolicyDistribution d = policy_distribution(tls);
    if (d.revises > 0) CHECK(d.rc_given_r + d.ri_given_r == doctest::Approx(1.0).epsilon(1e-9));
    if (d.writes > 0) CHECK(d.wc_given_w + d.wi_given_w == doctest::Approx(1.0).epsilon(1e-9));
    if (d.correct > 0) CHECK(d.rc_given_c + d.wc_given_c == doctest::Approx(1.0).epsilon(1e-9));
    if (d.incorrect > 0) CHECK(d.wi_given_i + d.ri_given_i == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("delayed timelines reduce to plain metrics at d=0") {
    auto tl = timeline_from({{1}, {1, 2}, {1, 2, 3}});
    tl.delay = 0;
    CHECK(edit_overhead(tl) == 0.0);
    CHECK(relative_correctness(tl) == 1.0);
    // a delayed timeline with empty leading rows still scores cleanly
    PrefixTimeline dl;
    dl.delay = 1;
    dl.rows.push_back({{}, Action::Write, 0.1});
    dl.rows.push_back({{4}, Action::Write, 0.1});
    dl.rows.push_back({{4, 5}, Action::Write, 0.1});
    CHECK(edit_overhead(dl) == 0.0);
    CHECK(relative_correctness(dl) == 1.0);
    CHECK(correction_time(dl) == 0.0);
}

TEST_CASE("json report carries the spec'd keys") {
    MetricsReport r;
    r.eo = 0.1;
    r.ct = 0.05;
    r.rc = 0.9;
    r.f1 = 0.95;
    r.revise_ratio = 0.2;
    r.reviser_calls = 42;
    const std::string path = "/tmp/tapir_report_test.json";
    write_report_json(path, r);
    std::ifstream f(path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"eo\"") != std::string::npos);
    CHECK(text.find("\"ct\"") != std::string::npos);
    CHECK(text.find("\"rc\"") != std::string::npos);
    CHECK(text.find("\"f1\"") != std::string::npos);
    CHECK(text.find("\"revise_ratio\"") != std::string::npos);
    CHECK(text.find("\"table7\"") != std::string::npos);
    CHECK(text.find("\"sents_per_sec\"") == std::string::npos);  // deterministic: omitted
    std::remove(path.c_str());
}

TEST_CASE("sweep csv has the documented columns") {
    const std::string path = "/tmp/tapir_sweep_test.csv";
    write_sweep_csv(path, {{0.5, 0.1, 0.05, 0.9, 0.8, 3}});
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    CHECK(header == "tau,eo,ct,rc,score");
    std::remove(path.c_str());
}

TEST_CASE("empty timelines are rejected by the metrics") {
    CHECK_THROWS_AS(edit_overhead(PrefixTimeline{}), DataError);
    CHECK_THROWS_AS(correction_time(PrefixTimeline{}), DataError);
    CHECK_THROWS_AS(relative_correctness(PrefixTimeline{}), DataError);
}
