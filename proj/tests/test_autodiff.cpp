#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"

#include "bat/adam.hpp"
#include "bat/checkpoint.hpp"
#include "bat/gradcheck.hpp"
#include "bat/tape.hpp"
#include "bat/tensor.hpp"

using namespace bat;

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("matmul forward matches a hand example") {
    auto a = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = make_tensor({3, 2}, {7, 8, 9, 10, 11, 12});
    Tape t;
    auto c = t.matmul(a, b);
    CHECK(c->shape == std::vector<int>{2, 2});
    CHECK(c->at(0, 0) == doctest::Approx(58));
    CHECK(c->at(0, 1) == doctest::Approx(64));
    CHECK(c->at(1, 0) == doctest::Approx(139));
    CHECK(c->at(1, 1) == doctest::Approx(154));
}

TEST_CASE("matmul_nt agrees with matmul against the transpose") {
    std::mt19937_64 rng(3);
    auto a = make_tensor({4, 3});
    auto b = make_tensor({5, 3});
    fill_uniform(*a, rng, -1, 1);
    fill_uniform(*b, rng, -1, 1);
    auto bt = make_tensor({3, 5});
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) bt->at(j, i) = b->at(i, j);
    Tape t;
    auto c1 = t.matmul_nt(a, b);
    auto c2 = t.matmul(a, bt);
    for (std::size_t i = 0; i < c1->numel(); ++i)
        CHECK(c1->data[i] == doctest::Approx(c2->data[i]).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and backward handles the Jacobian") {
    std::mt19937_64 rng(5);
    auto x = make_tensor({3, 4}, 0.0, true);
    fill_uniform(*x, rng, -3, 3);
    auto w = make_tensor({3, 4});
    fill_uniform(*w, rng, -2, 2);
    Tape t;
    auto y = t.softmax_rows(x);
    for (int r = 0; r < 3; ++r) {
        double s = 0;
        for (int c = 0; c < 4; ++c) s += y->at(r, c);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    auto loss = t.sum(t.mul(y, w));
    t.backward(loss);
    auto fwd = [&] {
        Tape t2;
        return t2.sum(t2.mul(t2.softmax_rows(x), w))->data[0];
    };
    CHECK(max_rel_err(x->grad, fd_grad(fwd, *x)) < 1e-7);
}

TEST_CASE("gradients accumulate across a diamond graph") {
    // loss = sum(x*x) + sum(2x): dL/dx = 2x + 2
    auto x = make_tensor({2, 2}, {0.5, -1.0, 2.0, 3.0}, true);
    Tape t;
    auto loss = t.add(t.sum(t.mul(x, x)), t.sum(t.scale(x, 2.0)));
    t.backward(loss);
    for (std::size_t i = 0; i < x->numel(); ++i)
        CHECK(x->grad[i] == doctest::Approx(2 * x->data[i] + 2).epsilon(1e-12));
}

TEST_CASE("splitting a batch and summing gives the same gradient") {
    std::mt19937_64 rng(11);
    auto w = make_tensor({3, 3}, 0.0, true);
    fill_uniform(*w, rng, -1, 1);
    auto xa = make_tensor({2, 3});
    auto xb = make_tensor({2, 3});
    fill_uniform(*xa, rng, -1, 1);
    fill_uniform(*xb, rng, -1, 1);
    auto xfull = make_tensor({4, 3});
    for (int j = 0; j < 6; ++j) {
        xfull->data[static_cast<std::size_t>(j)] = xa->data[static_cast<std::size_t>(j)];
        xfull->data[static_cast<std::size_t>(j) + 6] = xb->data[static_cast<std::size_t>(j)];
    }
    Tape t;
    auto loss = t.sum(t.relu(t.matmul(xfull, w)));
    t.backward(loss);
    auto g_full = w->grad;
    w->zero_grad();
    Tape t2;
    auto loss2 = t2.add(t2.sum(t2.relu(t2.matmul(xa, w))), t2.sum(t2.relu(t2.matmul(xb, w))));
    t2.backward(loss2);
    CHECK(max_rel_err(g_full, w->grad) < 1e-10);
}

TEST_CASE("layer_norm output has zero mean and unit variance per row") {
    std::mt19937_64 rng(7);
    auto x = make_tensor({4, 6});
    fill_uniform(*x, rng, -5, 5);
    auto g = make_tensor({6}, 1.0);
    auto b = make_tensor({6}, 0.0);
    Tape t;
    auto y = t.layer_norm(x, g, b);
    for (int r = 0; r < 4; ++r) {
        double mean = 0, var = 0;
        for (int c = 0; c < 6; ++c) mean += y->at(r, c);
        mean /= 6;
        for (int c = 0; c < 6; ++c) var += (y->at(r, c) - mean) * (y->at(r, c) - mean);
        var /= 6;
        CHECK(std::abs(mean) < 1e-10);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("embedding_lookup rejects out-of-range ids") {
    auto table = make_tensor({4, 2});
    Tape t;
    CHECK_NOTHROW(t.embedding_lookup(table, {0, 3}));
    CHECK_THROWS_AS(t.embedding_lookup(table, {4}), std::out_of_range);
    CHECK_THROWS_AS(t.embedding_lookup(table, {-1}), std::out_of_range);
}

TEST_CASE("primitive suite passes finite differences") {
    for (const auto& row : grad_check(9, 3)) {
        INFO(row.name, " max_rel_err=", row.max_rel_err);
        CHECK(row.pass);
    }
}

TEST_CASE("adam first step matches the hand-evaluated update") {
    // With bias correction, the first step moves by lrate * g/|g| (up to eps).
    auto p = make_tensor({2}, {1.0, -3.0}, true);
    p->ensure_grad();
    p->grad = {0.5, -2.0};
    Adam opt({p});
    opt.step(0.001);
    CHECK(p->data[0] == doctest::Approx(1.0 - 0.001).epsilon(1e-5));
    CHECK(p->data[1] == doctest::Approx(-3.0 + 0.001).epsilon(1e-5));
    // grads were cleared for the next accumulation
    CHECK(p->grad.empty());
    CHECK(opt.step_count() == 1);
}

TEST_CASE("adam throws when a parameter has no gradient") {
    auto p = make_tensor({2}, {1.0, 2.0}, true);
    Adam opt({p});
    CHECK_THROWS_AS(opt.step(0.001), std::logic_error);
}

TEST_CASE("checkpoint round-trips names, shapes and values") {
    const std::string path = std::filesystem::temp_directory_path() / "bat_ckpt_test.bin";
    std::mt19937_64 rng(13);
    auto a = make_tensor({3, 4}, 0.0, true);
    auto b = make_tensor({5}, 0.0, true);
    fill_uniform(*a, rng, -1, 1);
    fill_uniform(*b, rng, -1, 1);
    save_checkpoint(path, {{"a", a}, {"b", b}});
    auto loaded = load_checkpoint(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].first == "a");
    CHECK(loaded[0].second->shape == a->shape);
    CHECK(loaded[0].second->data == a->data);
    CHECK(loaded[1].second->data == b->data);

    auto a2 = make_tensor({3, 4}, 0.0, true);
    auto b2 = make_tensor({5}, 0.0, true);
    restore_checkpoint(path, {{"a", a2}, {"b", b2}});
    CHECK(a2->data == a->data);
    CHECK(b2->data == b->data);

    auto bad = make_tensor({2, 2});
    CHECK_THROWS(restore_checkpoint(path, {{"missing", bad}}));
    std::filesystem::remove(path);
}

TEST_SUITE_END();
