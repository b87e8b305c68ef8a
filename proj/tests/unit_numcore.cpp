#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "btseq/autodiff.hpp"
#include "btseq/checkpoint.hpp"
#include "btseq/gradcheck.hpp"
#include "btseq/optim.hpp"
#include "btseq/rng.hpp"
#include "btseq/tensor.hpp"

using namespace btseq;

namespace {

std::filesystem::path temp_file(const char* tag) {
    static int counter = 0;
    return std::filesystem::temp_directory_path() /
           ("btseq_numcore_" + std::string(tag) + "_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
}

}  // namespace

TEST_CASE("tensor shape invariant") {
    Tensor t(2, 3);
    REQUIRE(t.size() == 6);
    REQUIRE(t.shape()[0] * t.shape()[1] == static_cast<int>(t.size()));
    REQUIRE_THROWS_AS(Tensor(2, 3, {1.0, 2.0}), InputError);
    REQUIRE_THROWS_AS(Tensor(2, 1).item(), InputError);
    REQUIRE(Tensor::scalar(5.0).item() == 5.0);
}

TEST_CASE("matmul identity") {
    Rng rng(7);
    Tensor a = Tensor::uniform(3, 3, -1.0, 1.0, rng);
    Tensor eye(3, 3);
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    Tape tape;
    Var out = tape.matmul(tape.input(eye), tape.input(a));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) REQUIRE(tape.value(out).at(i, j) == Catch::Approx(a.at(i, j)).margin(1e-15));
}

TEST_CASE("row softmax of zeros is uniform") {
    Tape tape;
    Var s = tape.row_softmax(tape.input(Tensor(1, 4)));
    for (int j = 0; j < 4; ++j) REQUIRE(tape.value(s).at(0, j) == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("softmax rows sum to one and xent is nonnegative") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int rows = 1 + rng.uniform_int(4), cols = 2 + rng.uniform_int(6);
        Tensor logits = Tensor::uniform(rows, cols, -8.0, 8.0, rng);
        Tape tape;
        Var sm = tape.row_softmax(tape.input(logits));
        for (int r = 0; r < rows; ++r) {
            double sum = 0.0;
            for (int c = 0; c < cols; ++c) sum += tape.value(sm).at(r, c);
            REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
        }
        std::vector<int> targets;
        for (int r = 0; r < rows; ++r) targets.push_back(rng.uniform_int(cols));
        Var xe = tape.softmax_xent(tape.input(logits), targets);
        for (int r = 0; r < rows; ++r) REQUIRE(tape.value(xe).at(r, 0) >= 0.0);
    }
}

TEST_CASE("cross entropy of uniform two-way logits is ln 2") {
    Tape tape;
    Var xe = tape.softmax_xent(tape.input(Tensor(1, 2)), {0});
    REQUIRE(tape.scalar_value(xe) == Catch::Approx(std::log(2.0)).margin(1e-12));
}

TEST_CASE("backward of sum gives ones") {
    Rng rng(3);
    Parameter p("p", Tensor::uniform(2, 2, -1.0, 1.0, rng));
    Tape tape;
    tape.backward(tape.sum(tape.param(p)));
    for (double g : p.grad.vec()) REQUIRE(g == 1.0);
}

TEST_CASE("sigmoid derivative at zero is a quarter") {
    Parameter w("w", Tensor::scalar(0.0));
    Tape tape;
    Var loss = tape.mul(tape.sigmoid(tape.param(w)), tape.input(Tensor::scalar(1.0)));
    tape.backward(tape.sum(loss));
    REQUIRE(w.grad.item() == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("parameters that do not reach the loss keep zero grads") {
    Rng rng(5);
    Parameter used("used", Tensor::uniform(2, 2, -1.0, 1.0, rng));
    Parameter unused("unused", Tensor::uniform(2, 2, -1.0, 1.0, rng));
    Tape tape;
    Var a = tape.param(used);
    (void)tape.param(unused);
    tape.backward(tape.sum(a));
    for (double g : unused.grad.vec()) REQUIRE(g == 0.0);
    for (double g : used.grad.vec()) REQUIRE(g == 1.0);
}

TEST_CASE("tape rejects non-scalar loss and non-finite input") {
    Tape tape;
    Var m = tape.input(Tensor(2, 2));
    REQUIRE_THROWS_AS(tape.backward(m), InputError);
    Tensor bad(1, 2);
    bad.at(0, 1) = std::numeric_limits<double>::infinity();
    Tape t2;
    REQUIRE_THROWS_AS(t2.input(bad), NumericError);
    Tape t3;
    REQUIRE_THROWS_AS(t3.matmul(t3.input(Tensor(2, 3)), t3.input(Tensor(2, 3))), InputError);
}

TEST_CASE("adam first step approaches minus lr") {
    Parameter p("p", Tensor::scalar(1.0));
    p.grad = Tensor::scalar(1.0);
    AdamConfig cfg;
    cfg.lr = 0.15;
    adam_step({&p}, cfg);
    REQUIRE(std::abs(p.value.item() - (1.0 - 0.15)) < 1e-6);
    REQUIRE(p.step_count == 1);
    REQUIRE(p.grad.item() == 0.0);
}

TEST_CASE("adam zero gradient leaves value, still counts the step") {
    Parameter p("p", Tensor::scalar(0.5));
    AdamConfig cfg;
    adam_step({&p}, cfg);
    REQUIRE(p.value.item() == 0.5);
    REQUIRE(p.step_count == 1);
}

TEST_CASE("adam second identical step does not grow") {
    Parameter p("p", Tensor::scalar(0.0));
    AdamConfig cfg;
    cfg.lr = 0.15;
    p.grad = Tensor::scalar(1.0);
    adam_step({&p}, cfg);
    const double d1 = std::abs(p.value.item());
    const double before = p.value.item();
    p.grad = Tensor::scalar(1.0);
    adam_step({&p}, cfg);
    const double d2 = std::abs(p.value.item() - before);
    REQUIRE(d2 <= d1 + 1e-9);
}

TEST_CASE("adam with zero lr is a no-op on values") {
    Rng rng(9);
    Parameter p("p", Tensor::uniform(3, 3, -1.0, 1.0, rng));
    const Tensor before = p.value;
    AdamConfig cfg;
    cfg.lr = 0.0;
    for (int s = 0; s < 5; ++s) {
        p.grad = Tensor::uniform(3, 3, -2.0, 2.0, rng);
        adam_step({&p}, cfg);
    }
    for (std::size_t i = 0; i < before.size(); ++i) REQUIRE(p.value.vec()[i] == before.vec()[i]);
}

TEST_CASE("adam rejects non-finite grads without touching the group") {
    Parameter a("a", Tensor::scalar(1.0)), b("b", Tensor::scalar(2.0));
    a.grad = Tensor::scalar(1.0);
    b.grad = Tensor::scalar(std::numeric_limits<double>::quiet_NaN());
    AdamConfig cfg;
    REQUIRE_THROWS_AS(adam_step({&a, &b}, cfg), NumericError);
    REQUIRE(a.value.item() == 1.0);
    REQUIRE(a.step_count == 0);
}

TEST_CASE("global norm clipping") {
    Parameter a("a", Tensor::scalar(0.0)), b("b", Tensor::scalar(0.0));
    a.grad = Tensor(1, 2, {6.0, 8.0});  // norm 10
    b.grad = Tensor::scalar(0.0);
    b.grad = Tensor::scalar(0.0);
    SECTION("above the bound everything scales") {
        clip_global_norm({&a, &b}, 5.0);
        REQUIRE(a.grad.at(0, 0) == Catch::Approx(3.0));
        REQUIRE(a.grad.at(0, 1) == Catch::Approx(4.0));
        REQUIRE(global_grad_norm({&a, &b}) <= 5.0 + 1e-9);
    }
    SECTION("below the bound nothing changes") {
        a.grad = Tensor(1, 2, {1.0, 2.0});
        clip_global_norm({&a}, 5.0);
        REQUIRE(a.grad.at(0, 0) == 1.0);
        REQUIRE(a.grad.at(0, 1) == 2.0);
    }
    SECTION("boundary norm is untouched") {
        a.grad = Tensor(1, 2, {3.0, 4.0});
        clip_global_norm({&a}, 5.0);
        REQUIRE(a.grad.at(0, 0) == 3.0);
        REQUIRE(a.grad.at(0, 1) == 4.0);
    }
    SECTION("idempotent") {
        a.grad = Tensor(1, 2, {60.0, 80.0});
        clip_global_norm({&a}, 5.0);
        const Tensor once = a.grad;
        clip_global_norm({&a}, 5.0);
        for (std::size_t i = 0; i < once.size(); ++i)
            REQUIRE(a.grad.vec()[i] == Catch::Approx(once.vec()[i]).margin(1e-15));
    }
}

TEST_CASE("gradient checks pass on three seeds") {
    GradCheckReport rep = run_gradient_checks(1234, 3);
    CAPTURE(rep.max_rel_err);
    for (const GradCheckCase& c : rep.cases) {
        CAPTURE(c.name, c.max_rel_err);
        REQUIRE(c.passed);
    }
    REQUIRE(rep.passed);
}

TEST_CASE("checkpoint round trip is byte identical") {
    Rng rng(21);
    Parameter a("layer.w", Tensor::uniform(3, 4, -1.0, 1.0, rng));
    Parameter b("layer.b", Tensor::uniform(1, 4, -1.0, 1.0, rng));
    ordered_json header;
    header["kind"] = "test";
    header["note"] = 42;

    const auto p1 = temp_file("ck1");
    const auto p2 = temp_file("ck2");
    save_checkpoint(p1.string(), {&a, &b}, header);

    Checkpoint ck = load_checkpoint(p1.string());
    REQUIRE(ck.header["note"] == 42);
    REQUIRE(ck.params.size() == 2);
    Parameter a2("layer.w", Tensor::zeros(3, 4));
    Parameter b2("layer.b", Tensor::zeros(1, 4));
    load_into(ck, {&a2, &b2});
    save_checkpoint(p2.string(), {&a2, &b2}, ck.header);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string bytes1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string bytes2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    REQUIRE(bytes1 == bytes2);
    REQUIRE_FALSE(bytes1.empty());

    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("checkpoint rejects missing and mismatched parameters") {
    Rng rng(22);
    Parameter a("w", Tensor::uniform(2, 2, -1.0, 1.0, rng));
    const auto p = temp_file("ck3");
    save_checkpoint(p.string(), {&a}, ordered_json::object());
    Checkpoint ck = load_checkpoint(p.string());
    Parameter missing("other", Tensor::zeros(2, 2));
    REQUIRE_THROWS_AS(load_into(ck, {&missing}), IoError);
    Parameter wrong_shape("w", Tensor::zeros(2, 3));
    REQUIRE_THROWS_AS(load_into(ck, {&wrong_shape}), IoError);
    std::filesystem::remove(p);
}

TEST_CASE("rng substreams are stable and named") {
    Rng a = Rng::substream(42, "init");
    Rng b = Rng::substream(42, "init");
    Rng c = Rng::substream(42, "shuffle");
    const double va = a.uniform(), vb = b.uniform(), vc = c.uniform();
    REQUIRE(va == vb);
    REQUIRE(va != vc);
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}
