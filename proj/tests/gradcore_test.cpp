#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "mtil/grad/checkpoint.hpp"
#include "mtil/grad/fdcheck.hpp"
#include "mtil/grad/ops.hpp"
#include "mtil/grad/optimizer.hpp"
#include "mtil/grad/registry.hpp"
#include "mtil/grad/rng.hpp"
#include "mtil/grad/tensor.hpp"

using namespace mtil;
using namespace mtil::grad;

using TD = Tensor<double>;
using TF = Tensor<float>;

namespace {

TD random_tensor(Shape shape, std::mt19937_64& rng, double stddev = 1.0) {
    return TD::randn(std::move(shape), rng, stddev);
}

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
    auto rng = make_rng(7);
    auto a = random_tensor({3, 3}, rng);
    auto eye = TD::zeros({3, 3});
    for (int i = 0; i < 3; ++i) eye.data()[i * 3 + i] = 1.0;
    auto prod = matmul(eye, a);
    for (size_t i = 0; i < a.data().size(); ++i) CHECK(prod.data()[i] == doctest::Approx(a.data()[i]));

    auto m = TD::from_data({2, 2}, {1, 2, 3, 4});
    auto v = TD::from_data({2, 1}, {1, 1});
    auto r = matmul(m, v);
    CHECK(r.data()[0] == doctest::Approx(3.0));
    CHECK(r.data()[1] == doctest::Approx(7.0));
}

TEST_CASE("matmul rejects shape mismatch") {
    auto a = TD::zeros({2, 3});
    auto b = TD::zeros({4, 2});
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matmul gradient matches finite differences") {
    auto rng = make_rng(11);
    auto b = random_tensor({4, 3}, rng);
    auto err = finite_difference_check<double>(
        [&](const TD& x) { return sum(matmul(x, b)); }, random_tensor({5, 4}, rng), 1e-5);
    CHECK(err < 1e-4);

    auto a = random_tensor({5, 4}, rng);
    auto err_b = finite_difference_check<double>(
        [&](const TD& x) { return sum(matmul(a, x)); }, random_tensor({4, 3}, rng), 1e-5);
    CHECK(err_b < 1e-4);
}

TEST_CASE("matmul_nt and bmm gradients") {
    auto rng = make_rng(13);
    auto b = random_tensor({6, 4}, rng);
    auto err = finite_difference_check<double>(
        [&](const TD& x) { return sum(matmul_nt(x, b)); }, random_tensor({3, 4}, rng), 1e-5);
    CHECK(err < 1e-4);

    auto bb = random_tensor({2, 4, 3}, rng);
    auto err2 = finite_difference_check<double>(
        [&](const TD& x) { return sum(bmm(x, bb)); }, random_tensor({2, 3, 4}, rng), 1e-5);
    CHECK(err2 < 1e-4);

    auto bt = random_tensor({2, 5, 4}, rng);
    auto err3 = finite_difference_check<double>(
        [&](const TD& x) { return sum(bmm(x, bt, true)); }, random_tensor({2, 3, 4}, rng), 1e-5);
    CHECK(err3 < 1e-4);
    auto aa = random_tensor({2, 3, 4}, rng);
    auto err4 = finite_difference_check<double>(
        [&](const TD& x) { return sum(bmm(aa, x, true)); }, random_tensor({2, 5, 4}, rng), 1e-5);
    CHECK(err4 < 1e-4);
}

TEST_CASE("softmax basics") {
    auto u = softmax(TD::from_data({4}, {0, 0, 0, 0}), -1);
    for (double v : u.data()) CHECK(v == doctest::Approx(0.25));

    auto big = softmax(TD::from_data({2}, {1000, 1000}), -1);
    CHECK(big.data()[0] == doctest::Approx(0.5));
    CHECK(big.data()[1] == doctest::Approx(0.5));
    CHECK(std::isfinite(big.data()[0]));

    // rows sum to 1 on a random 2-D input, both axes
    auto rng = make_rng(3);
    auto x = random_tensor({3, 5}, rng);
    for (int axis : {0, 1}) {
        auto y = softmax(x, axis);
        const int64_t outer = axis == 0 ? 5 : 3;
        for (int64_t o = 0; o < outer; ++o) {
            double s = 0;
            for (int64_t i = 0; i < (axis == 0 ? 3 : 5); ++i)
                s += axis == 0 ? y.data()[i * 5 + o] : y.data()[o * 5 + i];
            CHECK(s == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("softmax gradient") {
    auto rng = make_rng(17);
    auto w = random_tensor({7}, rng);
    auto err = finite_difference_check<double>(
        [&](const TD& x) { return sum(mul(softmax(x, -1), w)); }, random_tensor({7}, rng), 1e-5);
    CHECK(err < 1e-4);
}

TEST_CASE("sigmoid and tanh") {
    CHECK(sigmoid(TD::scalar(0.0)).item() == doctest::Approx(0.5));
    CHECK(tanh(TD::scalar(0.0)).item() == doctest::Approx(0.0));
    CHECK(tanh(TD::scalar(1.3)).item() == doctest::Approx(-tanh(TD::scalar(-1.3)).item()));
    CHECK(sigmoid(TD::scalar(-20.0)).item() < 1e-8);
    CHECK(sigmoid(TD::scalar(-20.0)).item() > 0.0);
}

TEST_CASE("layer_norm normalizes rows") {
    auto rng = make_rng(23);
    auto x = random_tensor({4, 8}, rng, 3.0);
    auto gain = TD::full({8}, 1.0);
    auto bias = TD::zeros({8});
    auto y = layer_norm(x, gain, bias);
    for (int r = 0; r < 4; ++r) {
        double mu = 0, var = 0;
        for (int j = 0; j < 8; ++j) mu += y.data()[r * 8 + j];
        mu /= 8;
        for (int j = 0; j < 8; ++j) {
            const double d = y.data()[r * 8 + j] - mu;
            var += d * d;
        }
        var /= 8;
        CHECK(mu == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps shifts variance slightly
    }
}

TEST_CASE("layer_norm, embedding, cross_entropy gradients") {
    auto rng = make_rng(29);
    auto gain = random_tensor({6}, rng);
    auto bias = random_tensor({6}, rng);
    auto err = finite_difference_check<double>(
        [&](const TD& x) { return sum(sigmoid(layer_norm(x, gain, bias))); },
        random_tensor({3, 6}, rng), 1e-5);
    CHECK(err < 1e-4);

    auto errg = finite_difference_check<double>(
        [&](const TD& g) {
            auto x = TD::from_data({2, 6}, {1, 2, 3, 4, 5, 6, -1, 0, 2, 1, 4, 2});
            return sum(sigmoid(layer_norm(x, g, bias)));
        },
        random_tensor({6}, rng), 1e-5);
    CHECK(errg < 1e-4);

    std::vector<int32_t> ids = {0, 3, 1, 3};
    auto erre = finite_difference_check<double>(
        [&](const TD& t) { return sum(tanh(embedding(t, ids))); }, random_tensor({5, 4}, rng),
        1e-5);
    CHECK(erre < 1e-4);

    std::vector<int32_t> targets = {2, 0, -1};
    auto errc = finite_difference_check<double>(
        [&](const TD& l) { return cross_entropy(l, targets, -1); }, random_tensor({3, 4}, rng),
        1e-5);
    CHECK(errc < 1e-4);
}

TEST_CASE("cross_entropy on uniform logits equals log(vocab)") {
    const int64_t v = 300;
    auto logits = TD::zeros({4, v});
    std::vector<int32_t> targets = {5, 250, 0, 299};
    CHECK(cross_entropy(logits, targets, -1).item() == doctest::Approx(std::log(double(v))));
}

TEST_CASE("embedding rejects out-of-range ids") {
    auto t = TD::zeros({5, 2});
    std::vector<int32_t> bad = {5};
    CHECK_THROWS_AS(embedding(t, bad), ShapeError);
}

TEST_CASE("backward basics") {
    auto x = TD::from_data({1}, {3.0}, true);
    auto loss = sum(mul(x, x));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0));

    // accumulation: second backward on the same loss doubles the grad
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(12.0));
}

TEST_CASE("backward rejects non-scalar loss") {
    auto x = TD::from_data({2}, {1.0, 2.0}, true);
    auto y = mul(x, x);
    CHECK_THROWS_AS(backward(y), ContractError);
}

TEST_CASE("non-trainable parameters receive no grad") {
    ParamRegistry<double> reg;
    auto rng = make_rng(31);
    reg.add("w", random_tensor({3}, rng), true);
    reg.add("frozen", random_tensor({3}, rng), false);
    auto loss = sum(mul(reg.at("w"), reg.at("frozen")));
    backward(loss);
    CHECK(reg.at("w").has_grad());
    CHECK_FALSE(reg.at("frozen").has_grad());
}

TEST_CASE("two-layer composite gradient vs finite differences") {
    auto rng = make_rng(37);
    auto w1 = random_tensor({4, 6}, rng);
    auto w2 = random_tensor({6, 2}, rng);
    auto err = finite_difference_check<double>(
        [&](const TD& x) { return mean(matmul(tanh(matmul(x, w1)), w2)); },
        random_tensor({3, 4}, rng), 1e-5);
    CHECK(err < 1e-4);
}

TEST_CASE("optimizer_step") {
    ParamRegistry<double> reg;
    reg.add("p", TD::from_data({1}, {1.0}));

    SUBCASE("lr=0 leaves parameters bitwise unchanged") {
        auto opt = Optimizer<double>::sgd(0.0);
        auto loss = sum(mul(reg.at("p"), reg.at("p")));
        backward(loss);
        opt.step(reg);
        CHECK(reg.at("p").data()[0] == 1.0);
    }

    SUBCASE("sgd hand arithmetic") {
        auto opt = Optimizer<double>::sgd(0.1);
        reg.at("p").node()->ensure_grad();
        reg.at("p").node()->grad[0] = 0.5;
        opt.step(reg);
        CHECK(reg.at("p").data()[0] == doctest::Approx(0.95).epsilon(1e-12));
    }

    SUBCASE("adam single step matches scalar oracle") {
        auto opt = Optimizer<double>::adam(0.001);
        reg.at("p").node()->ensure_grad();
        reg.at("p").node()->grad[0] = 0.5;
        opt.step(reg);
        // hand-computed bias-corrected update
        const double g = 0.5, lr = 0.001, b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double m = (1 - b1) * g;
        const double v = (1 - b2) * g * g;
        const double mhat = m / (1 - b1);
        const double vhat = v / (1 - b2);
        const double expected = 1.0 - lr * mhat / (std::sqrt(vhat) + eps);
        CHECK(std::abs(reg.at("p").data()[0] - expected) < 1e-10);
    }

    SUBCASE("freeze contract: non-trainable values never change") {
        auto rng = make_rng(41);
        reg.add("q", random_tensor({4}, rng), false);
        const auto before = reg.at("q").data();
        auto loss = sum(mul(reg.at("p"), reg.at("p")));
        backward(loss);
        auto opt = Optimizer<double>::adam(0.1);
        opt.step(reg);
        CHECK(std::memcmp(before.data(), reg.at("q").data().data(),
                          before.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("finite_difference_check harness behaviors") {
    auto rng = make_rng(43);
    auto err_sum = finite_difference_check<double>([](const TD& x) { return sum(x); },
                                                   random_tensor({5}, rng), 1e-5);
    CHECK(err_sum < 1e-10);

    auto err_sig = finite_difference_check<double>(
        [](const TD& x) { return sum(sigmoid(x)); }, random_tensor({6}, rng), 1e-5);
    CHECK(err_sig < 1e-4);

    auto err_pick = finite_difference_check<double>(
        [](const TD& x) { return slice_rows(reshape(softmax(x, -1), {5, 1}), 0, 1); },
        random_tensor({5}, rng), 1e-5);
    CHECK(err_pick < 1e-4);
}

TEST_CASE("primitive gradients across 100 seeds") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        auto rng = make_rng(seed, 999);
        auto w = random_tensor({4, 4}, rng);
        auto gain = TD::full({4}, 1.0);
        auto bias = TD::zeros({4});
        std::vector<int32_t> targets = {1, 3, 0};
        auto err = finite_difference_check<double>(
            [&](const TD& x) {
                auto h = tanh(matmul(x, w));
                auto n = layer_norm(h, gain, bias);
                auto s = softmax(n, -1);
                return add(cross_entropy(n, targets, -1), mean(mul(s, sigmoid(h))));
            },
            random_tensor({3, 4}, rng), 1e-5);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("determinism: identical seeds give bitwise identical grads") {
    auto run = [](uint64_t seed) {
        auto rng = make_rng(seed);
        auto x = random_tensor({4, 4}, rng);
        x.set_requires_grad(true);
        auto w = random_tensor({4, 4}, rng);
        auto loss = mean(gelu(matmul(x, w)));
        backward(loss);
        return std::make_pair(loss.item(), x.grad());
    };
    auto [l1, g1] = run(5);
    auto [l2, g2] = run(5);
    CHECK(std::memcmp(&l1, &l2, sizeof(double)) == 0);
    CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("registry trainable flips never mutate values") {
    ParamRegistry<float> reg;
    auto rng = make_rng(47);
    reg.add("a.x", TF::randn({3, 3}, rng, 1.0));
    const auto before = reg.at("a.x").data();
    reg.set_trainable("a.x", false);
    reg.set_trainable("a.x", true);
    reg.set_trainable_prefix("a.", false);
    CHECK(std::memcmp(before.data(), reg.at("a.x").data().data(),
                      before.size() * sizeof(float)) == 0);
    CHECK_FALSE(reg.trainable("a.x"));
}

TEST_CASE("registry rejects duplicates and unknown names") {
    ParamRegistry<float> reg;
    reg.add("p", TF::zeros({1}));
    CHECK_THROWS_AS(reg.add("p", TF::zeros({1})), ContractError);
    CHECK_THROWS_AS(reg.at("unknown"), ContractError);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    namespace fs = std::filesystem;
    ParamRegistry<float> reg;
    auto rng = make_rng(53);
    reg.add("main.encoder.w", TF::randn({7, 3}, rng, 0.3));
    reg.add("main.bias", TF::randn({5}, rng, 0.02));
    reg.add("scalar", TF::scalar(-1.25f));

    const auto path = fs::temp_directory_path() / "mtil_ckpt_test.bin";
    save_checkpoint(path.string(), reg);
    auto loaded = load_checkpoint(path.string());
    CHECK(loaded.size() == 3);
    for (const auto& [name, e] : reg) {
        auto it = loaded.find(name);
        REQUIRE(it != loaded.end());
        CHECK(it->second.shape == e.tensor.shape());
        CHECK(std::memcmp(it->second.values.data(), e.tensor.data().data(),
                          it->second.values.size() * sizeof(float)) == 0);
    }

    // load into a fresh registry with the same layout
    ParamRegistry<float> reg2;
    reg2.add("main.encoder.w", TF::zeros({7, 3}));
    reg2.add("main.bias", TF::zeros({5}));
    reg2.add("scalar", TF::zeros({1}));
    load_checkpoint_into(path.string(), reg2);
    CHECK(std::memcmp(reg2.at("main.bias").data().data(), reg.at("main.bias").data().data(),
                      5 * sizeof(float)) == 0);
    fs::remove(path);
}

TEST_CASE("no-grad mode records nothing") {
    auto x = TD::from_data({2}, {1.0, 2.0}, true);
    NoGradGuard ng;
    auto y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
}
