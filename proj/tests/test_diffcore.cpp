#include <doctest.h>

#include <cmath>
#include <vector>

#include "idea/adam.hpp"
#include "idea/gradcheck.hpp"
#include "idea/rng.hpp"
#include "idea/tape.hpp"
#include "oracles.hpp"

using namespace idea::diff;

namespace {

Array random_array(std::size_t r, std::size_t c, Rng& rng, bool grad = true) {
    Array a(r, c, grad);
    for (double& v : a.values) v = rng.uniform(-2.0, 2.0);
    return a;
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

TEST_CASE("array shape invariants") {
    CHECK_THROWS_AS(Array(2, 3, std::vector<double>(5, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(Array(0, 3), std::invalid_argument);
    Array a(2, 3);
    CHECK(a.size() == 6);
    a.ensure_grad();
    CHECK(a.grad.size() == a.values.size());
}

TEST_CASE("relu, softmax and matmul match hand evaluation") {
    Tape tape;
    Value r = relu(tape.constant(Array::row({-1.0, 0.0, 2.0})));
    CHECK(r.values() == std::vector<double>{0.0, 0.0, 2.0});

    Value s = softmax_rows(tape.constant(Array::row({0.0, 0.0})));
    CHECK(s.values()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.values()[1] == doctest::Approx(0.5).epsilon(1e-15));

    // 2x3 . 3x1, dot products by hand: [1,2,3].[7,8,9]=50, [4,5,6].[7,8,9]=122
    Value m = matmul(tape.constant(Array(2, 3, {1, 2, 3, 4, 5, 6})),
                     tape.constant(Array(3, 1, {7, 8, 9})));
    CHECK(m.shape() == Shape{2, 1});
    CHECK(m.values()[0] == 50.0);
    CHECK(m.values()[1] == 122.0);
}

TEST_CASE("shape mismatches name the primitive and shapes") {
    Tape tape;
    Value a = tape.constant(Array(2, 3));
    Value b = tape.constant(Array(4, 1));
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("matmul"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("2x3"), std::invalid_argument);
    CHECK_THROWS_AS(slice(a, 1, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(mean_axis(a, 2), std::invalid_argument);
}

TEST_CASE("softmax rows are positive and sum to one") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Array x = random_array(3, 5, rng, false);
        for (double& v : x.values) v *= 10.0;
        Tape tape;
        Value s = softmax_rows(tape.constant(x));
        for (std::size_t i = 0; i < 3; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 5; ++j) {
                double w = s.values()[i * 5 + j];
                CHECK(w > 0.0);
                sum += w;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("backward on w*w and through stop_gradient") {
    Array w(1, 1, {3.0}, true);
    {
        Tape tape;
        Value v = tape.leaf(w);
        Value loss = mul(v, v);
        w.zero_grad();
        tape.backward(loss);
        CHECK(w.grad[0] == 6.0);  // d(w^2)/dw = 2w
    }
    {
        Tape tape;
        Value v = tape.leaf(w);
        Value loss = mul(stop_gradient(v), v);
        w.zero_grad();
        tape.backward(loss);
        CHECK(w.grad[0] == 3.0);  // only the unblocked factor
    }
}

TEST_CASE("backward rejects non-scalar and foreign losses") {
    Tape tape;
    Value v = tape.constant(Array::row({1.0, 2.0}));
    CHECK_THROWS_AS(tape.backward(v), std::invalid_argument);
    Tape other;
    Value w = other.constant(Array::row({1.0}));
    CHECK_THROWS_AS(tape.backward(w), std::invalid_argument);
}

TEST_CASE("every primitive matches central finite differences") {
    // >= 100 random trials per primitive, step 1e-5, rel error < 1e-4.
    constexpr int kTrials = 100;
    constexpr double kStep = 1e-5;
    constexpr double kTol = 1e-4;
    Rng rng(42);

    auto run = [&](const char* name, auto&& build_fn, std::vector<Array*> leaves) {
        CAPTURE(name);
        auto report = finite_diff_check(build_fn, leaves, kStep, kTol);
        CHECK(report.passed);
        CHECK(report.max_rel_error < kTol);
    };

    for (int trial = 0; trial < kTrials; ++trial) {
        Array a = random_array(2, 3, rng);
        Array b = random_array(2, 3, rng);
        Array m = random_array(3, 2, rng);
        // offset keeps |b| away from zero so div stays smooth
        for (double& v : b.values) v = v >= 0.0 ? v + 0.5 : v - 0.5;

        run("matmul", [&](Tape& t) { return mean_axis(mean_axis(matmul(t.leaf(a), t.leaf(m)), 1), 0); },
            {&a, &m});
        run("add", [&](Tape& t) { return mean_axis(mean_axis(add(t.leaf(a), t.leaf(b)), 1), 0); },
            {&a, &b});
        run("subtract",
            [&](Tape& t) { return mean_axis(mean_axis(sub(t.leaf(a), t.leaf(b)), 1), 0); },
            {&a, &b});
        run("multiply",
            [&](Tape& t) { return mean_axis(mean_axis(mul(t.leaf(a), t.leaf(b)), 1), 0); },
            {&a, &b});
        run("divide",
            [&](Tape& t) { return mean_axis(mean_axis(div(t.leaf(a), t.leaf(b)), 1), 0); },
            {&a, &b});
        run("scale", [&](Tape& t) { return mean_axis(mean_axis(scale(t.leaf(a), -1.7), 1), 0); },
            {&a});
        run("add_scalar",
            [&](Tape& t) { return mean_axis(mean_axis(add_scalar(t.leaf(a), 0.9), 1), 0); }, {&a});
        run("relu", [&](Tape& t) { return mean_axis(mean_axis(relu(t.leaf(a)), 1), 0); }, {&a});
        run("abs", [&](Tape& t) { return mean_axis(mean_axis(abs(t.leaf(b)), 1), 0); }, {&b});
        run("softmax",
            [&](Tape& t) {
                Value s = softmax_rows(t.leaf(a));
                return mean_axis(mean_axis(mul(s, t.leaf(b)), 1), 0);
            },
            {&a, &b});
        run("mean0", [&](Tape& t) { return mean_axis(mean_axis(t.leaf(a), 0), 1); }, {&a});
        run("concat",
            [&](Tape& t) {
                return mean_axis(mean_axis(concat(t.leaf(a), t.leaf(b), 0), 1), 0);
            },
            {&a, &b});
        run("slice",
            [&](Tape& t) { return mean_axis(mean_axis(slice(t.leaf(a), 1, 1, 2), 1), 0); }, {&a});
        run("transpose",
            [&](Tape& t) {
                return mean_axis(mean_axis(matmul(transpose(t.leaf(a)), t.leaf(b)), 1), 0);
            },
            {&a, &b});
    }
}

TEST_CASE("three-layer net gradients match finite differences") {
    Rng rng(11);
    Array x = random_array(1, 4, rng, false);
    Array w1 = random_array(4, 6, rng), b1 = random_array(1, 6, rng);
    Array w2 = random_array(6, 5, rng), b2 = random_array(1, 5, rng);
    Array w3 = random_array(5, 1, rng), b3 = random_array(1, 1, rng);
    auto net = [&](Tape& t) {
        Value h = relu(add(matmul(t.leaf(x), t.leaf(w1)), t.leaf(b1)));
        h = relu(add(matmul(h, t.leaf(w2)), t.leaf(b2)));
        return add(matmul(h, t.leaf(w3)), t.leaf(b3));
    };
    auto report =
        finite_diff_check(net, std::vector<Array*>{&w1, &b1, &w2, &b2, &w3, &b3}, 1e-5, 1e-4);
    CHECK(report.passed);
}

TEST_CASE("finite_diff_check calibration") {
    Rng rng(3);
    Array w = random_array(1, 5, rng);
    Array c = random_array(1, 5, rng, false);

    // Linear function: error down at machine-precision scale.
    auto lin = [&](Tape& t) { return mean_axis(mul(t.leaf(w), t.constant(c)), 1); };
    auto rep = finite_diff_check(lin, std::vector<Array*>{&w}, 1e-5, 1e-4);
    CHECK(rep.max_rel_error < 1e-8);

    // Softmax-attention composite.
    Array q = random_array(1, 3, rng);
    Array keys = random_array(4, 3, rng);
    Array vals = random_array(4, 1, rng);
    auto att = [&](Tape& t) {
        Value logits = scale(matmul(t.leaf(q), transpose(t.leaf(keys))), 1.0 / std::sqrt(3.0));
        return matmul(softmax_rows(logits), t.leaf(vals));
    };
    rep = finite_diff_check(att, std::vector<Array*>{&q, &keys, &vals}, 1e-5, 1e-4);
    CHECK(rep.passed);

    // Negative control: stop_gradient hides one factor of w^2, so the
    // analytic gradient is intentionally wrong for this leaf.
    Array w2(1, 1, {1.5}, true);
    auto wrong = [&](Tape& t) {
        Value v = t.leaf(w2);
        return mul(stop_gradient(v), v);
    };
    rep = finite_diff_check(wrong, std::vector<Array*>{&w2}, 1e-5, 1e-4);
    CHECK_FALSE(rep.passed);
    CHECK(rep.max_rel_error > 0.1);

    CHECK_THROWS_AS(
        finite_diff_check([&](Tape& t) { return t.leaf(w); }, std::vector<Array*>{&w}, 1e-5, 1e-4),
        std::invalid_argument);
}

TEST_CASE("backward is deterministic and replay is bit-exact") {
    Rng rng(5);
    Array a = random_array(2, 4, rng);
    Array m = random_array(4, 3, rng);

    auto build = [&](Tape& t) {
        Value h = relu(matmul(t.leaf(a), t.leaf(m)));
        return mean_axis(mean_axis(softmax_rows(h), 1), 0);
    };

    Tape t1;
    Value l1 = build(t1);
    a.zero_grad();
    m.zero_grad();
    t1.backward(l1);
    std::vector<double> ga = a.grad, gm = m.grad;

    Tape t2;
    Value l2 = build(t2);
    a.zero_grad();
    m.zero_grad();
    t2.backward(l2);
    CHECK(a.grad == ga);
    CHECK(m.grad == gm);

    std::vector<double> before = l2.values();
    t2.replay();
    CHECK(l2.values() == before);
}

TEST_CASE("stop_gradient zeroes grads exactly and values stay finite") {
    Rng rng(9);
    Array a = random_array(1, 4, rng);
    Array b = random_array(1, 4, rng);
    Tape tape;
    Value blocked = stop_gradient(relu(tape.leaf(a)));
    Value loss = mean_axis(mul(blocked, tape.leaf(b)), 1);
    a.zero_grad();
    b.zero_grad();
    tape.backward(loss);
    for (double g : a.grad) CHECK(g == 0.0);
    CHECK(all_finite(b.grad));
    CHECK(all_finite(loss.values()));
}

TEST_CASE("adam: zero grad is a no-op, descent direction, hand trace") {
    Array p(1, 1, {1.0}, true);
    std::vector<Array*> params{&p};
    AdamState st = make_adam(params, 0.1);

    p.ensure_grad().assign(1, 0.0);
    adam_step(params, st);
    CHECK(p.values[0] == 1.0);  // m = v = 0 keeps the update exactly zero
    CHECK(st.step == 1);

    // Two steps under constant gradient 1.0, checked against an inline
    // independent trace of the Adam recurrences.
    Array q(1, 1, {1.0}, true);
    std::vector<Array*> qp{&q};
    AdamState st2 = make_adam(qp, 0.1);
    double m = 0.0, v = 0.0, ref = 1.0;
    for (int step = 1; step <= 2; ++step) {
        q.ensure_grad().assign(1, 1.0);
        adam_step(qp, st2);
        m = 0.9 * m + 0.1 * 1.0;
        v = 0.999 * v + 0.001 * 1.0;
        double mhat = m / (1.0 - std::pow(0.9, step));
        double vhat = v / (1.0 - std::pow(0.999, step));
        ref -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
        CHECK(q.values[0] == doctest::Approx(ref).epsilon(1e-15));
    }
    CHECK(q.values[0] < 1.0);  // gradient 1 pushes the parameter down
    CHECK(st2.step == 2);

    AdamState bad = make_adam(params);
    Array wide(1, 3, true);
    std::vector<Array*> wp{&wide};
    CHECK_THROWS_AS(adam_step(wp, bad), std::invalid_argument);
}

TEST_CASE("rng: seeded determinism and order-independent forks") {
    Rng a(1234), b(1234);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng base(99);
    Rng f1 = base.fork(7);
    base.uniform();  // consuming draws must not change forks
    Rng f2 = base.fork(7);
    CHECK(f1.next_u64() == f2.next_u64());

    Rng c(5);
    for (int i = 0; i < 1000; ++i) {
        double u = c.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}
