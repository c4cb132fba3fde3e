#include <doctest.h>

#include <cmath>
#include <vector>

#include "idea/gating.hpp"
#include "idea/rng.hpp"
#include "oracles.hpp"

using namespace idea;
using gating::GatingParams;
using gating::InputTokens;

namespace {

GatingParams make_params(std::size_t learners, std::size_t context, std::size_t dk,
                         std::size_t dv, diff::Rng& rng) {
    GatingParams p;
    p.key_width = dk;
    p.value_width = dv;
    p.w_key = diff::Array(2, dk, true);
    p.w_value = diff::Array(2, dv, true);
    for (double& v : p.w_key.values) v = rng.uniform(-1.0, 1.0);
    for (double& v : p.w_value.values) v = rng.uniform(-1.0, 1.0);
    for (std::size_t g = 0; g < learners; ++g) {
        diff::Array wq(context, dk, true);
        for (double& v : wq.values) v = rng.uniform(-1.0, 1.0);
        p.w_query.push_back(std::move(wq));
    }
    return p;
}

}  // namespace

TEST_CASE("tokenize_window lays out value/position pairs plus a null token") {
    InputTokens one = gating::tokenize_window(std::vector<double>{7.0});
    CHECK(one.tokens.shape == diff::Shape{2, 2});
    CHECK(one.tokens.at(0, 0) == 7.0);
    CHECK(one.tokens.at(0, 1) == 0.0);
    CHECK(one.tokens.at(1, 0) == 0.0);
    CHECK(one.tokens.at(1, 1) == 0.0);

    InputTokens two = gating::tokenize_window(std::vector<double>{1.0, 2.0});
    CHECK(two.tokens.at(0, 0) == 1.0);
    CHECK(two.tokens.at(0, 1) == 0.0);
    CHECK(two.tokens.at(1, 0) == 2.0);
    CHECK(two.tokens.at(1, 1) == 0.5);

    std::vector<double> twelve(12, 1.0);
    CHECK(gating::tokenize_window(twelve).tokens.rows() == 13);

    CHECK_THROWS_AS(gating::tokenize_window(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("zero projections give uniform attention, relevance t/(t+1)") {
    diff::Rng rng(1);
    GatingParams p = make_params(1, 3, 4, 4, rng);
    for (double& v : p.w_key.values) v = 0.0;
    for (double& v : p.w_query[0].values) v = 0.0;

    std::vector<double> x{1.0, -2.0, 3.0, 0.5};
    InputTokens tok = gating::tokenize_window(x);
    std::vector<double> theta{0.3, -0.1, 0.7};
    double rel = gating::relevance_score(theta, tok, p, 0);
    CHECK(rel == doctest::Approx(4.0 / 5.0).epsilon(1e-15));
}

TEST_CASE("saturated logits push relevance toward one") {
    // 1-wide everything: token values large, key and query aligned
    GatingParams p;
    p.key_width = 1;
    p.value_width = 1;
    p.w_key = diff::Array(2, 1, {50.0, 0.0}, true);
    p.w_value = diff::Array(2, 1, {1.0, 0.0}, true);
    p.w_query.push_back(diff::Array(1, 1, {50.0}, true));

    InputTokens tok = gating::tokenize_window(std::vector<double>{1.0, 1.0});
    double rel = gating::relevance_score(std::vector<double>{1.0}, tok, p, 0);
    CHECK(rel > 1.0 - 1e-12);
}

TEST_CASE("hand-set 1x1 projections match a straight-line attention trace") {
    GatingParams p;
    p.key_width = 1;
    p.value_width = 1;
    p.w_key = diff::Array(2, 1, {0.5, 1.0}, true);
    p.w_value = diff::Array(2, 1, {1.0, 0.0}, true);
    p.w_query.push_back(diff::Array(1, 1, {2.0}, true));

    std::vector<double> x{1.0, 2.0};
    InputTokens tok = gating::tokenize_window(x);
    std::vector<double> theta{1.0};

    // straight-line: q = 2, keys = [0.5, 1.5, 0], values = [1, 2, 0]
    std::vector<double> keys{0.5, 1.5, 0.0};
    std::vector<double> vals{1.0, 2.0, 0.0};
    std::vector<double> q{2.0};
    std::vector<double> pooled = oracle::attention(q, keys, vals, 3, 1, 1);
    std::vector<double> w = oracle::softmax({2.0 * 0.5, 2.0 * 1.5, 0.0});

    diff::Tape tape;
    gating::TapedTokens taped =
        gating::project_tokens(tape.constant(diff::Array::row(x)), p, tape);
    auto res =
        gating::input_attention(tape.constant(diff::Array::row(theta)), taped, p, 0, tape);
    CHECK(res.pooled.values()[0] == doctest::Approx(pooled[0]).epsilon(1e-14));
    CHECK(res.relevance == doctest::Approx(1.0 - w[2]).epsilon(1e-14));

    double off_tape = gating::relevance_score(theta, tok, p, 0);
    CHECK(off_tape == doctest::Approx(res.relevance).epsilon(1e-13));
}

TEST_CASE("select_topk: order, ties, full set, range errors") {
    std::vector<double> r1{0.5, 0.3, 0.2};
    CHECK(gating::select_topk(r1, 2) == std::vector<std::size_t>{0, 1});

    std::vector<double> r2{0.4, 0.4, 0.1};
    CHECK(gating::select_topk(r2, 1) == std::vector<std::size_t>{0});  // tie -> lower index

    CHECK(gating::select_topk(r1, 3) == std::vector<std::size_t>{0, 1, 2});

    CHECK_THROWS_AS(gating::select_topk(r1, 0), std::invalid_argument);
    CHECK_THROWS_AS(gating::select_topk(r1, 4), std::invalid_argument);
}

TEST_CASE("relevance scores are permutation-covariant") {
    diff::Rng rng(17);
    std::size_t G = 4;
    GatingParams p = make_params(G, 3, 4, 4, rng);
    std::vector<std::vector<double>> thetas;
    for (std::size_t g = 0; g < G; ++g) {
        std::vector<double> th(3);
        for (double& v : th) v = rng.uniform(-1.0, 1.0);
        thetas.push_back(th);
    }
    std::vector<double> x{0.4, -1.2, 2.0};
    InputTokens tok = gating::tokenize_window(x);

    std::vector<double> base(G);
    for (std::size_t g = 0; g < G; ++g)
        base[g] = gating::relevance_score(thetas[g], tok, p, g);

    std::vector<std::size_t> perm{2, 0, 3, 1};
    GatingParams pp = p;
    pp.w_query.clear();
    for (std::size_t g : perm) pp.w_query.push_back(p.w_query[g]);
    for (std::size_t g = 0; g < G; ++g) {
        double rel = gating::relevance_score(thetas[perm[g]], tok, pp, g);
        CHECK(rel == base[perm[g]]);
    }
}

TEST_CASE("uniform logit shifts never change the activated set") {
    diff::Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t G = 5, n = 7;
        std::vector<std::vector<double>> logits(G, std::vector<double>(n));
        for (auto& row : logits)
            for (double& v : row) v = rng.uniform(-3.0, 3.0);
        double shift = rng.uniform(-10.0, 10.0);

        std::vector<double> rel(G), rel_shifted(G);
        for (std::size_t g = 0; g < G; ++g) {
            rel[g] = 1.0 - oracle::softmax(logits[g]).back();
            std::vector<double> shifted = logits[g];
            for (double& v : shifted) v += shift;
            rel_shifted[g] = 1.0 - oracle::softmax(shifted).back();
        }
        CHECK(gating::select_topk(rel, 2) == gating::select_topk(rel_shifted, 2));
    }
}

TEST_CASE("only taped branches receive query gradients") {
    diff::Rng rng(31);
    GatingParams p = make_params(2, 3, 4, 4, rng);
    std::vector<double> x{1.0, 2.0, 3.0};
    diff::Array theta(1, 3, {0.2, -0.4, 0.6}, true);

    p.w_query[0].zero_grad();
    p.w_query[1].zero_grad();
    diff::Tape tape;
    gating::TapedTokens taped =
        gating::project_tokens(tape.constant(diff::Array::row(x)), p, tape);
    auto res = gating::input_attention(tape.leaf(theta), taped, p, 0, tape);
    tape.backward(diff::mean_axis(res.pooled, 1));

    bool any0 = false;
    for (double gv : p.w_query[0].grad) any0 = any0 || gv != 0.0;
    CHECK(any0);
    for (double gv : p.w_query[1].grad) CHECK(gv == 0.0);
}

TEST_CASE("width mismatches are rejected") {
    diff::Rng rng(5);
    GatingParams p = make_params(1, 3, 4, 4, rng);
    InputTokens tok = gating::tokenize_window(std::vector<double>{1.0});
    std::vector<double> theta{1.0, 2.0};  // width 2, projection expects 3
    CHECK_THROWS_AS(gating::relevance_score(theta, tok, p, 0), std::invalid_argument);
    CHECK_THROWS_AS(gating::relevance_score(std::vector<double>{1, 2, 3}, tok, p, 5),
                    std::invalid_argument);
}
