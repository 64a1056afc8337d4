#include "doctest.h"

#include "edenvfi/nn.hpp"
#include "helpers.hpp"

using namespace edenvfi;
using namespace testutil;

TEST_CASE("sum backward is a tensor of ones") {
    Tape t;
    Variable x = Variable::leaf(Tensor::from({4}, {1.0, -2.0, 0.5, 3.0}, DType::f64), true);
    Variable s = nn::sum(t, x);
    CHECK(s.value().at(0) == doctest::Approx(2.5));
    t.backward(s);
    for (int i = 0; i < 4; ++i) CHECK(x.grad().at(i) == doctest::Approx(1.0));
}

TEST_CASE("sum of squares gradient is 2x") {
    Tape t;
    Variable x = Variable::leaf(Tensor::from({3}, {1.0, 2.0, 3.0}, DType::f64), true);
    Variable s = nn::sum(t, nn::mul(t, x, x));
    CHECK(s.value().at(0) == doctest::Approx(14.0));
    t.backward(s);
    CHECK(x.grad().at(0) == doctest::Approx(2.0));
    CHECK(x.grad().at(1) == doctest::Approx(4.0));
    CHECK(x.grad().at(2) == doctest::Approx(6.0));
}

TEST_CASE("constant roots leave no gradient behind") {
    Tape t;
    Variable x = Variable::leaf(Tensor::from({2}, {1.0, 2.0}, DType::f64), false);
    Variable s = nn::sum(t, x);
    t.backward(s);
    CHECK(x.grad().at(0) == 0.0); // grad() of an untouched leaf is zeros
    CHECK(x.grad().at(1) == 0.0);
}

TEST_CASE("backward twice accumulates leaf gradients") {
    Tape t;
    Variable x = Variable::leaf(Tensor::from({2}, {3.0, -1.0}, DType::f64), true);
    Variable s = nn::sum(t, nn::mul(t, x, x));
    t.backward(s);
    Tensor once = x.grad().clone();
    t.backward(s);
    for (int i = 0; i < 2; ++i) CHECK(x.grad().at(i) == doctest::Approx(2.0 * once.at(i)));
    x.zero_grad();
    t.backward(s);
    CHECK(max_abs_diff(x.grad(), once) < 1e-15);
}

TEST_CASE("backward rejects non-scalar roots") {
    Tape t;
    Variable x = Variable::leaf(Tensor::from({2}, {1.0, 2.0}, DType::f64), true);
    Variable y = nn::mul(t, x, x);
    CHECK_THROWS_AS(t.backward(y), ContractError);
}

TEST_CASE("NoGrad suppresses recording") {
    Tape t;
    Variable x = Variable::leaf(Tensor::from({2}, {1.0, 2.0}, DType::f64), true);
    {
        NoGrad guard(t);
        Variable y = nn::mul(t, x, x);
        CHECK(y.value().at(1) == doctest::Approx(4.0));
    }
    CHECK(t.size() == 0);
    CHECK(t.recording());
    Variable z = nn::sum(t, x);
    CHECK(t.size() == 1);
    t.backward(z);
    CHECK(x.grad().at(0) == doctest::Approx(1.0));
}

TEST_CASE("grad_check agrees with exact analytic gradients") {
    Rng rng(31);
    Tensor x0 = randn64({6}, rng);
    // sum(x^2): smooth, so central differences are ~h^2 accurate
    const double e1 = grad_check(
        [](Tape& t, const Variable& v) { return nn::sum(t, nn::mul(t, v, v)); }, x0);
    CHECK(e1 < 1e-6);
    // sum(x): differences are exact up to rounding
    const double e2 = grad_check([](Tape& t, const Variable& v) { return nn::sum(t, v); }, x0);
    CHECK(e2 < 1e-9);
}

TEST_CASE("grad_check rejects non-f64 probes and non-scalar outputs") {
    Rng rng(32);
    Tensor f32probe = Tensor::randn({3}, rng, 1.0, DType::f32);
    CHECK_THROWS_AS(grad_check([](Tape& t, const Variable& v) { return nn::sum(t, v); }, f32probe),
                    ContractError);
    Tensor ok = randn64({3}, rng);
    CHECK_THROWS_AS(grad_check([](Tape& t, const Variable& v) { return nn::mul(t, v, v); }, ok),
                    ContractError);
}

TEST_CASE("grad_check coordinate sampling stays deterministic") {
    Rng rng(33);
    Tensor x0 = randn64({40}, rng);
    auto f = [](Tape& t, const Variable& v) { return nn::sum(t, nn::mul(t, v, v)); };
    const double a = grad_check(f, x0, 1e-5, 7);
    const double b = grad_check(f, x0, 1e-5, 7);
    CHECK(a == b);
    CHECK(a < 1e-6);
}

TEST_CASE("replaying a tape is bit-deterministic") {
    Rng rng(34);
    Tensor xv = randn64({5, 4}, rng);
    Tensor wv = randn64({4, 3}, rng);
    Tensor bv = randn64({3}, rng);

    auto run = [&](Tensor& gx, Tensor& gw) {
        Tape t;
        Variable x = Variable::leaf(xv.clone(), true);
        Variable w = Variable::leaf(wv.clone(), true);
        Variable b = Variable::leaf(bv.clone(), true);
        Variable y = nn::linear(t, x, w, b);
        Variable loss = nn::sum(t, nn::mul(t, y, y));
        t.backward(loss);
        gx = x.grad();
        gw = w.grad();
        return loss.value().clone();
    };
    Tensor gx1, gw1, gx2, gw2;
    Tensor l1 = run(gx1, gw1);
    Tensor l2 = run(gx2, gw2);
    CHECK(bit_equal(l1, l2));
    CHECK(bit_equal(gx1, gx2));
    CHECK(bit_equal(gw1, gw2));
}

TEST_CASE("chained elementwise ops propagate through both operands") {
    Tape t;
    Variable a = Variable::leaf(Tensor::from({2}, {2.0, 3.0}, DType::f64), true);
    Variable b = Variable::leaf(Tensor::from({2}, {5.0, -1.0}, DType::f64), true);
    // s = sum(a*b + a) => ds/da = b + 1, ds/db = a
    Variable s = nn::sum(t, nn::add(t, nn::mul(t, a, b), a));
    t.backward(s);
    CHECK(a.grad().at(0) == doctest::Approx(6.0));
    CHECK(a.grad().at(1) == doctest::Approx(0.0));
    CHECK(b.grad().at(0) == doctest::Approx(2.0));
    CHECK(b.grad().at(1) == doctest::Approx(3.0));
}

TEST_CASE("leaf gradients survive tape clear while intermediates vanish") {
    Tape t;
    Variable x = Variable::leaf(Tensor::from({2}, {1.0, 4.0}, DType::f64), true);
    Variable s = nn::sum(t, nn::mul(t, x, x));
    t.backward(s);
    Tensor g = x.grad().clone();
    t.clear();
    CHECK(t.size() == 0);
    CHECK(max_abs_diff(x.grad(), g) < 1e-15);
}
