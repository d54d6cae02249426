#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "afs/error.hpp"
#include "afs/nn.hpp"
#include "afs/tensor.hpp"
#include "common/test_util.hpp"

using namespace afs;

TEST_CASE("matmul shape algebra and values") {
    Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from({3, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0});
    Tensor c = matmul(a, b);
    CHECK(c.shape() == std::vector<std::int64_t>{2, 4});
    CHECK(c.data()[0] == 1.0);
    CHECK(c.data()[4 + 1] == 5.0);
    CHECK(c.data()[3] == 0.0);
}

TEST_CASE("matmul shape mismatch names op and shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 5});
    try {
        matmul(a, b);
        FAIL("expected error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("matmul") != std::string::npos);
        CHECK(msg.find("(2,3)") != std::string::npos);
        CHECK(msg.find("(4,5)") != std::string::npos);
    }
}

TEST_CASE("relu definition") {
    Tensor x = Tensor::from({3}, {-1, 0, 2});
    Tensor y = relu(x);
    CHECK(y.data()[0] == 0.0);
    CHECK(y.data()[1] == 0.0);
    CHECK(y.data()[2] == 2.0);
}

TEST_CASE("softmax cross-entropy on uniform logits") {
    Tensor logits = Tensor::from({1, 2}, {0, 0});
    Tensor loss = softmax_cross_entropy(logits, {0});
    CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("sign with sign(0) = 0") {
    Tensor x = Tensor::from({3}, {-2, 0, 3});
    Tensor s = sign(x);
    CHECK(s.data()[0] == -1.0);
    CHECK(s.data()[1] == 0.0);
    CHECK(s.data()[2] == 1.0);
}

TEST_CASE("backward of a linear form") {
    Tensor x = Tensor::from({1, 2}, {0.5, 0.5}, /*requires_grad=*/true);
    Tensor w = Tensor::from({2, 1}, {1, -2});
    Tape tape;
    Tensor loss = mean_all(matmul(x, w));
    tape.backward(loss);
    REQUIRE(x.grad().size() == 2);
    CHECK(x.grad()[0] == 1.0);
    CHECK(x.grad()[1] == -2.0);
}

TEST_CASE("backward requires a scalar loss") {
    Tensor x = Tensor::from({1, 2}, {0.5, 0.5}, true);
    Tensor w = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tape tape;
    Tensor out = matmul(x, w);
    CHECK_THROWS_AS(tape.backward(out), Error);
}

TEST_CASE("two backward calls double the gradients exactly") {
    SeededRng rng(7);
    Tensor x = Tensor::randn({3, 4}, rng, 1.0, true);
    Tensor w = Tensor::randn({4, 2}, rng, 1.0, true);
    Tape tape;
    Tensor loss = softmax_cross_entropy(matmul(x, w), {0, 1, 0});
    tape.backward(loss);
    std::vector<double> once(w.grad().begin(), w.grad().end());
    tape.backward(loss);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(w.grad()[i] == 2.0 * once[i]);
}

TEST_CASE("gradient accumulates across tapes until cleared") {
    Tensor w = Tensor::from({2, 1}, {1.0, 2.0}, true);
    Tensor x = Tensor::from({1, 2}, {1.0, 1.0});
    for (int pass = 0; pass < 2; ++pass) {
        Tape tape;
        tape.backward(mean_all(matmul(x, w)));
    }
    CHECK(w.grad()[0] == 2.0);
    w.zero_grad();
    CHECK(w.grad()[0] == 0.0);
}

TEST_CASE("MLP analytic gradients match central finite differences") {
    SeededRng rng(11);
    ExtractorNet net = init_extractor(21, 4, 3, 5);
    SeededRng head_rng(22);
    LinearHead head = init_head(head_rng, 3, 2);
    Tensor x = Tensor::uniform({3, 4}, rng, 0.0, 1.0, true);
    const std::vector<int> y = {0, 1, 1};

    auto eval = [&] {
        return softmax_cross_entropy(forward_logits(net, head, x), y).item();
    };
    {
        Tape tape;
        tape.backward(softmax_cross_entropy(forward_logits(net, head, x), y));
    }
    auto params = net.parameters();
    params.push_back(head.weight);
    params.push_back(head.bias);
    params.push_back(x);
    for (auto& p : params) {
        const auto fd = testutil::finite_diff_grad(p, eval);
        CHECK(testutil::max_grad_rel_err(p.grad(), fd) < 1e-4);
    }
}

TEST_CASE("every primitive passes a finite-difference check") {
    SeededRng rng(99);
    // Each case builds loss = mean of a primitive applied to random inputs,
    // then compares analytic and finite-difference input gradients.
    auto check_unary = [&](const std::function<Tensor(const Tensor&)>& op, double lo, double hi) {
        Tensor x = Tensor::uniform({4, 3}, rng, lo, hi, true);
        auto eval = [&] { return mean_all(op(x)).item(); };
        {
            Tape tape;
            tape.backward(mean_all(op(x)));
        }
        const auto fd = testutil::finite_diff_grad(x, eval);
        CHECK(testutil::max_grad_rel_err(x.grad(), fd) < 1e-4);
    };
    check_unary([](const Tensor& t) { return relu(t); }, 0.1, 1.0);
    check_unary([](const Tensor& t) { return clamp(t, -0.5, 0.5); }, -2.0, 2.0);
    check_unary([](const Tensor& t) { return sign(t); }, 0.2, 1.0);
    check_unary([](const Tensor& t) { return scalar_mul(t, -2.5); }, -1.0, 1.0);
    check_unary([](const Tensor& t) { return row_abs_max(t); }, 0.2, 3.0);

    // binary ops, with distinct scales so both gradients stay nonzero
    Tensor a = Tensor::uniform({3, 3}, rng, -1.0, 1.0, true);
    Tensor b = Tensor::uniform({3, 3}, rng, -1.0, 1.0, true);
    auto build = [&] { return mean_all(sub(relu(add(a, b)), scalar_mul(b, 3.0))); };
    auto eval2 = [&] { return build().item(); };
    {
        Tape tape;
        tape.backward(build());
    }
    CHECK(testutil::max_grad_rel_err(a.grad(), testutil::finite_diff_grad(a, eval2)) < 1e-4);
    CHECK(testutil::max_grad_rel_err(b.grad(), testutil::finite_diff_grad(b, eval2)) < 1e-4);
}

TEST_CASE("row broadcast add and its gradient") {
    Tensor m = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Tensor v = Tensor::from({3}, {10, 20, 30}, true);
    Tensor out = add(m, v);
    CHECK(out.data()[0] == 11.0);
    CHECK(out.data()[5] == 36.0);
    Tape tape;
    tape.backward(mean_all(add(m, v)));
    CHECK(v.grad()[0] == doctest::Approx(2.0 / 6.0));

    // Only a row vector may broadcast.
    Tensor col = Tensor::from({2}, {1, 1});
    CHECK_THROWS_AS(add(m, col), Error);
    CHECK_THROWS_AS(add(v, m), Error);
}

TEST_CASE("clamp is idempotent") {
    SeededRng rng(5);
    Tensor x = Tensor::uniform({8, 8}, rng, -3.0, 3.0);
    Tensor once = clamp(x, 0.0, 1.0);
    Tensor twice = clamp(once, 0.0, 1.0);
    CHECK(std::memcmp(once.data().data(), twice.data().data(), sizeof(double) * 64) == 0);
}

TEST_CASE("concat along the feature axis") {
    Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from({2, 1}, {5, 6});
    std::vector<Tensor> parts = {a, b};
    Tensor c = concat_cols(parts);
    CHECK(c.shape() == std::vector<std::int64_t>{2, 3});
    CHECK(c.data()[2] == 5.0);
    CHECK(c.data()[5] == 6.0);

    std::vector<Tensor> swapped = {b, a};
    Tensor d = concat_cols(swapped);
    CHECK(d.data()[0] == 5.0);
    CHECK(d.data()[1] == 1.0);
}

TEST_CASE("sgd momentum hand arithmetic") {
    SgdMomentum opt;
    Tensor p = Tensor::scalar(1.0, true);
    {
        Tape tape;
        tape.backward(mean_all(p));  // grad = 1
    }
    std::vector<Tensor> params = {p};
    opt.step(params, 0.1, 0.0);
    CHECK(p.data()[0] == doctest::Approx(0.9).epsilon(1e-15));

    SgdMomentum opt2;
    Tensor q = Tensor::scalar(1.0, true);
    std::vector<Tensor> qs = {q};
    for (int i = 0; i < 2; ++i) {
        zero_grads(qs);
        Tape tape;
        tape.backward(mean_all(q));
        opt2.step(qs, 0.1, 0.9);
    }
    CHECK(q.data()[0] == doctest::Approx(0.71).epsilon(1e-12));
}

TEST_CASE("sgd with lr 0 leaves parameters bitwise unchanged") {
    SeededRng rng(3);
    Tensor p = Tensor::randn({4, 4}, rng, 1.0, true);
    std::vector<double> before(p.data().begin(), p.data().end());
    {
        Tape tape;
        tape.backward(mean_all(p));
    }
    SgdMomentum opt;
    std::vector<Tensor> params = {p};
    opt.step(params, 0.0, 0.9);
    CHECK(std::memcmp(before.data(), p.data().data(), sizeof(double) * before.size()) == 0);
}

TEST_CASE("sgd without gradients fails") {
    Tensor p = Tensor::scalar(1.0, true);
    SgdMomentum opt;
    std::vector<Tensor> params = {p};
    CHECK_THROWS_AS(opt.step(params, 0.1, 0.9), Error);
}

TEST_CASE("same seed and op sequence give bitwise identical tensors") {
    auto run = [] {
        SeededRng rng(1234);
        Tensor a = Tensor::randn({5, 5}, rng, 1.0);
        Tensor b = Tensor::uniform({5, 5}, rng, -1.0, 1.0);
        return relu(add(matmul(a, b), sign(b)));
    };
    Tensor r1 = run();
    Tensor r2 = run();
    CHECK(std::memcmp(r1.data().data(), r2.data().data(), sizeof(double) * 25) == 0);
}

TEST_CASE("rng fork is independent of draw order") {
    SeededRng a(42);
    SeededRng b(42);
    (void)b.next_u64();
    (void)b.next_u64();
    CHECK(a.fork("x").next_u64() == b.fork("x").next_u64());
    CHECK(a.fork("x").next_u64() != a.fork("y").next_u64());
    CHECK(a.fork(3).next_u64() != a.fork(4).next_u64());
}
