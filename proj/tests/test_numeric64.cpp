#include <doctest.h>

#include <cmath>

#include "gradcheck_util.hpp"
#include "tapir/init.hpp"
#include "tapir/ops.hpp"
#include "tapir/optim.hpp"

using namespace tapir;

static_assert(sizeof(real) == 8, "this suite runs in the 64-bit build");

namespace {

Tensor randt(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<real> v(shape_numel(shape));
    for (auto& e : v) e = rng.uniform(lo, hi);
    return Tensor::from(std::move(v), std::move(shape), true);
}

void check_op(const char* name, const std::function<Tensor()>& fwd, std::vector<Tensor> inputs) {
    gradcheck::Failure f;
    const bool ok = gradcheck::check(fwd, std::move(inputs), 1e-5, 1e-3, &f);
    if (!ok) {
        MESSAGE(name << " failed at " << f.where << ": analytic " << f.analytic << " numeric "
                     << f.numeric << " rel " << f.rel_err);
    }
    CHECK(ok);
}

}  // namespace

TEST_CASE("finite differences validate every differentiable op on random shapes") {
    Rng rng(2024);
    for (int rep = 0; rep < 10; ++rep) {
        const int m = 2 + static_cast<int>(rng.next_u64() % 3);
        const int k = 2 + static_cast<int>(rng.next_u64() % 3);
        const int n = 2 + static_cast<int>(rng.next_u64() % 3);

        {
            Tensor a = randt({m, n}, rng), b = randt({m, n}, rng);
            check_op("add", [&] { return sum(add(a, b)); }, {a, b});
            check_op("mul", [&] { return sum(mul(a, b)); }, {a, b});
            check_op("scale", [&] { return sum(scale(a, real(1.7))); }, {a});
        }
        {
            Tensor a = randt({m, n}, rng), b = randt({n}, rng);
            check_op("add_rowvec", [&] { return sum(add_rowvec(a, b)); }, {a, b});
        }
        {
            Tensor a = randt({m, n}, rng), d = randt({m}, rng, 0.5, 2.0);
            check_op("div_colvec", [&] { return sum(div_colvec(a, d)); }, {a, d});
        }
        {
            Tensor a = randt({m, k}, rng), b = randt({k, n}, rng);
            check_op("matmul", [&] { return sum(matmul(a, b)); }, {a, b});
        }
        {
            Tensor a = randt({m, k}, rng), b = randt({n, k}, rng);
            check_op("matmul_bt", [&] { return sum(matmul_bt(a, b)); }, {a, b});
        }
        {
            Tensor a = randt({k, m}, rng), b = randt({k, n}, rng);
            check_op("matmul_tn", [&] { return sum(matmul_tn(a, b)); }, {a, b});
        }
        {
            Tensor a = randt({m, n}, rng), x = randt({n}, rng);
            check_op("matvec", [&] { return sum(matvec(a, x)); }, {a, x});
            Tensor y = randt({m}, rng);
            check_op("vecmat", [&] { return sum(vecmat(y, a)); }, {y, a});
        }
        {
            Tensor a = randt({n}, rng), b = randt({n}, rng);
            check_op("dot", [&] { return dot(a, b); }, {a, b});
            check_op("outer", [&] { return sum(outer(a, b)); }, {a, b});
            check_op("concat", [&] { return sum(mul(concat(a, b), concat(b, a))); }, {a, b});
        }
        {
            Tensor a = randt({6}, rng), s = randt({1}, rng, 0.5, 2.0);
            check_op("div_by_scalar", [&] { return sum(div_by_scalar(a, s)); }, {a, s});
            check_op("slice", [&] { return sum(mul(slice(a, 1, 3), slice(a, 2, 3))); }, {a});
        }
        {
            Tensor a = randt({m, n}, rng);
            check_op("slice_row", [&] { return sum(slice_row(a, m - 1)); }, {a});
            check_op("slice_cols", [&] { return sum(slice_cols(a, 0, n - 1)); }, {a});
            check_op("sum_rows", [&] { return sum(mul(sum_rows(a), sum_rows(a))); }, {a});
        }
        {
            Tensor a = randt({m, n}, rng), b = randt({m, k}, rng);
            check_op("concat_cols", [&] { return sum(concat_cols({a, b})); }, {a, b});
        }
        {
            Tensor a = randt({n}, rng), b = randt({n}, rng), c = randt({n}, rng);
            check_op("stack_rows", [&] { return sum(mul(stack_rows({a, b}), stack_rows({b, c}))); },
                     {a, b, c});
        }
        {
            Tensor a = randt({n}, rng);
            check_op("sigmoid", [&] { return sum(sigmoid(a)); }, {a});
            check_op("tanh", [&] { return sum(mul(tanh(a), a)); }, {a});
            check_op("elu1", [&] { return sum(mul(elu1(a), a)); }, {a});
            check_op("softmax", [&] { return sum(mul(softmax(a), a)); }, {a});
        }
        {
            // relu: keep inputs away from the kink
            std::vector<real> v(static_cast<std::size_t>(n));
            for (auto& e : v) {
                e = rng.uniform(0.2, 1.0);
                if (rng.bernoulli(0.5)) e = -e;
            }
            Tensor a = Tensor::from(v, {n}, true);
            check_op("relu", [&] { return sum(mul(relu(a), a)); }, {a});
        }
        {
            Tensor a = randt({m, m}, rng);
            check_op("row_softmax", [&] { return sum(mul(row_softmax(a, false), a)); }, {a});
            check_op("row_softmax_causal", [&] { return sum(mul(row_softmax(a, true), a)); }, {a});
        }
        {
            Tensor a = randt({m, n}, rng), g = randt({n}, rng, 0.5, 1.5), b = randt({n}, rng);
            check_op("layer_norm", [&] { return sum(mul(layer_norm(a, g, b), a)); }, {a, g, b});
        }
        {
            Tensor s = randt({3}, rng);
            Tensor x0 = randt({n}, rng), x1 = randt({n}, rng), x2 = randt({n}, rng);
            check_op("weighted_sum",
                     [&] { return sum(mul(weighted_sum(s, {x0, x1, x2}), x0)); }, {s, x0, x1, x2});
        }
        {
            Tensor table = randt({5, n}, rng);
            check_op("embedding", [&] { return sum(mul(embedding(table, {1, 3, 1}),
                                                       embedding(table, {0, 3, 4}))); },
                     {table});
        }
        {
            Tensor logits = randt({3, 4}, rng, -2.0, 2.0);
            check_op("cross_entropy", [&] { return cross_entropy(logits, {1, 3, 0}); }, {logits});
            check_op("cross_entropy_masked",
                     [&] { return cross_entropy(logits, {1, -1, 2}); }, {logits});
        }
        {
            Tensor s = randt({1}, rng, 0.15, 0.85);
            check_op("bce_t1", [&] { return bce(sigmoid(s), 1); }, {s});
            check_op("bce_t0", [&] { return bce(sigmoid(s), 0); }, {s});
        }
    }
}

TEST_CASE("a random three-op composition passes finite differences") {
    Rng rng(515);
    for (int rep = 0; rep < 10; ++rep) {
        Tensor w1 = randt({4, 5}, rng), b1 = randt({4}, rng);
        Tensor w2 = randt({3, 4}, rng), b2 = randt({3}, rng);
        Tensor x = randt({5}, rng);
        auto fwd = [&] {
            Tensor h1 = tanh(linear_vec(x, w1, b1));
            Tensor h2 = sigmoid(linear_vec(h1, w2, b2));
            return sum(mul(h2, h2));
        };
        check_op("mlp3", fwd, {w1, b1, w2, b2, x});
    }
}

TEST_CASE("adamw with zero weight decay matches a scalar adam oracle") {
    const double lr = 0.05, b1 = 0.9, b2 = 0.98, eps = 1e-8;
    Tensor p = Tensor::from({real(0.7)}, {1}, true);
    AdamW opt({p}, {real(lr), real(b1), real(b2), real(eps), real(0)});

    double theta = 0.7, m = 0, v = 0;
    Rng rng(8);
    for (int step = 1; step <= 25; ++step) {
        const double g = rng.uniform(-2, 2);
        p.grad()[0] = g;
        opt.step();
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, step));
        const double vhat = v / (1 - std::pow(b2, step));
        theta -= lr * mhat / (std::sqrt(vhat) + eps);
        CHECK(std::abs(static_cast<double>(p.value()[0]) - theta) <= 1e-10);
    }
}

TEST_CASE("decoupled decay is exact in 64-bit") {
    Tensor p = Tensor::from({real(2)}, {1}, true);
    AdamW opt({p}, {real(0.1), real(0.9), real(0.98), real(1e-8), real(0.01)});
    opt.step();
    CHECK(static_cast<double>(p.value()[0]) == 2.0 - 0.1 * 0.01 * 2.0);
}
