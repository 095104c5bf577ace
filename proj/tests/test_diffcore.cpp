#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "navgen/params.hpp"
#include "navgen/rng.hpp"
#include "navgen/tape.hpp"
#include "oracles.hpp"

using namespace navgen;

namespace {

Array random_array(std::vector<size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Array a = Array::zeros(std::move(shape));
  for (double& x : a.data) x = rng.uniform(lo, hi);
  return a;
}

// Generic per-primitive gradient check: builds loss = sum(weights * op(...))
// from the parameters in `store` and compares every analytic gradient
// against central finite differences.
void check_op(ParamStore& store, const std::function<Val(Tape&, ParamBinding&)>& build,
              double tol = 1e-4) {
  auto loss_value = [&build](ParamStore& s) {
    Tape t(false);
    ParamBinding bind(t, s);
    Val loss = build(t, bind);
    return t.val(loss).data[0];
  };
  Tape t(true);
  ParamBinding bind(t, store);
  Val loss = build(t, bind);
  t.backward(loss);
  std::map<std::string, Array> analytic;
  for (const std::string& name : store.names()) analytic[name] = bind.grad_of(name);
  auto rep = oracles::finite_diff_check(store, loss_value, analytic);
  INFO("worst param: " << rep.worst_param << "[" << rep.worst_index << "]");
  CHECK(rep.max_rel_err < tol);
}

Val weighted_sum(Tape& t, Val x, Rng& rng) {
  Array w = Array::zeros(t.val(x).shape);
  for (double& v : w.data) v = rng.uniform(-1.0, 1.0);
  return t.sum_all(t.mul(x, t.constant(w)));
}

}  // namespace

TEST_CASE("softmax of equal logits is uniform") {
  Tape t;
  Val v = t.constant(Array::vec({0.0, 0.0}));
  Val s = t.softmax_vec(v);
  CHECK(t.val(s).data[0] == doctest::Approx(0.5));
  CHECK(t.val(s).data[1] == doctest::Approx(0.5));
}

TEST_CASE("softmax rows sum to one within 1e-12") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    Val m = t.constant(random_array({5, 7}, rng, -8.0, 8.0));
    std::vector<uint8_t> allowed(35, 1);
    Val p = t.masked_row_softmax(m, allowed);
    for (size_t i = 0; i < 5; ++i) {
      double sum = 0.0;
      for (size_t j = 0; j < 7; ++j) sum += t.val(p).at(i, j);
      CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("leaky_relu matches its definition") {
  Tape t;
  Val v = t.constant(Array::vec({-1.0, 2.0}));
  Val r = t.leaky_relu(v, 0.2);
  CHECK(t.val(r).data[0] == doctest::Approx(-0.2));
  CHECK(t.val(r).data[1] == doctest::Approx(2.0));
}

TEST_CASE("matmul of 2x3 by 3x1 equals hand computation") {
  Tape t;
  Array a = Array::mat(2, 3);
  a.data = {1, 2, 3, 4, 5, 6};
  Array b = Array::mat(3, 1);
  b.data = {7, 8, 9};
  Val r = t.matmul(t.constant(a), t.constant(b));
  CHECK(t.val(r).at(0, 0) == doctest::Approx(1 * 7 + 2 * 8 + 3 * 9));
  CHECK(t.val(r).at(1, 0) == doctest::Approx(4 * 7 + 5 * 8 + 6 * 9));
}

TEST_CASE("d(x^2)/dx at x=3 is 6") {
  Tape t;
  Val x = t.input(Array::scalar(3.0), true);
  Val loss = t.mul(x, x);
  t.backward(loss);
  CHECK(t.grad(x).data[0] == doctest::Approx(6.0));
}

TEST_CASE("parameters not reaching the loss get zero gradients") {
  ParamStore store;
  store.add("used", Array::scalar(2.0));
  store.add("unused", Array::scalar(5.0));
  Tape t;
  ParamBinding bind(t, store);
  Val loss = t.mul(bind("used"), bind("used"));
  t.backward(loss);
  CHECK(bind.grad_of("unused").data[0] == 0.0);
  CHECK(bind.grad_of("used").data[0] == doctest::Approx(4.0));
}

TEST_CASE("backward requires a scalar loss") {
  Tape t;
  Val v = t.input(Array::vec({1.0, 2.0}), true);
  CHECK_THROWS_AS(t.backward(v), Error);
}

TEST_CASE("non-finite results trip an error") {
  Tape t;
  Val v = t.constant(Array::vec({-1.0}));
  CHECK_THROWS_AS(t.log_(v), Error);
}

TEST_CASE("forward and gradients are bit-identical across runs") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    ParamStore store;
    store.add("a", random_array({4, 4}, rng));
    store.add("b", random_array({4}, rng));
    Tape t;
    ParamBinding bind(t, store);
    Val h = t.tanh_(t.matvec(bind("a"), bind("b")));
    Val loss = t.sum_all(h);
    t.backward(loss);
    std::vector<double> out = {t.val(loss).data[0]};
    for (double g : bind.grad_of("a").data) out.push_back(g);
    return out;
  };
  CHECK(run(11) == run(11));
}

TEST_CASE("per-primitive gradient checks") {
  Rng rng(1234);

  SUBCASE("add/sub/mul") {
    ParamStore s;
    s.add("a", random_array({3, 4}, rng));
    s.add("b", random_array({3, 4}, rng));
    check_op(s, [&rng](Tape& t, ParamBinding& p) {
      Val x = t.add(p("a"), p("b"));
      Val y = t.sub(x, t.mul(p("a"), p("b")));
      Rng wr(5);
      return weighted_sum(t, y, wr);
    });
  }

  SUBCASE("smul and scale") {
    ParamStore s;
    s.add("a", random_array({5}, rng));
    s.add("s", Array::scalar(0.7));
    check_op(s, [](Tape& t, ParamBinding& p) {
      Val x = t.smul(p("a"), 2.5);
      Val y = t.scale(p("s"), x);
      Rng wr(6);
      return weighted_sum(t, y, wr);
    });
  }

  SUBCASE("unary nonlinearities") {
    ParamStore s;
    s.add("a", random_array({6}, rng, 0.2, 2.0));  // positive, keeps log valid
    check_op(s, [](Tape& t, ParamBinding& p) {
      Val a = p("a");
      Val x = t.sigmoid(a);
      x = t.add(x, t.tanh_(a));
      x = t.add(x, t.softplus(a));
      x = t.add(x, t.log_(a));
      x = t.add(x, t.abs_(a));
      x = t.add(x, t.sin_(a));
      x = t.add(x, t.cos_(a));
      x = t.add(x, t.leaky_relu(a, 0.2));
      Rng wr(7);
      return weighted_sum(t, x, wr);
    });
  }

  SUBCASE("matmul/transpose") {
    ParamStore s;
    s.add("a", random_array({3, 4}, rng));
    s.add("b", random_array({4, 2}, rng));
    check_op(s, [](Tape& t, ParamBinding& p) {
      Val y = t.matmul(p("a"), p("b"));
      Val z = t.matmul(t.transpose(y), p("a"));
      Rng wr(8);
      return weighted_sum(t, z, wr);
    });
  }

  SUBCASE("matvec/vecmat/dot/outer") {
    ParamStore s;
    s.add("m", random_array({3, 4}, rng));
    s.add("u", random_array({3}, rng));
    s.add("v", random_array({4}, rng));
    check_op(s, [](Tape& t, ParamBinding& p) {
      Val a = t.matvec(p("m"), p("v"));      // (3)
      Val b = t.vecmat(p("u"), p("m"));      // (4)
      Val c = t.dot(a, p("u"));              // scalar
      Val d = t.sum_all(t.outer(a, b));      // scalar
      return t.add(c, d);
    });
  }

  SUBCASE("concat/split/slice/row") {
    ParamStore s;
    s.add("a", random_array({3}, rng));
    s.add("b", random_array({5}, rng));
    s.add("m", random_array({4, 3}, rng));
    check_op(s, [](Tape& t, ParamBinding& p) {
      Val cat = t.concat({p("a"), p("b")});
      auto parts = t.split(cat, {2, 6});
      Val r0 = t.row(p("m"), 2);
      Val x = t.dot(parts[0], t.slice(cat, 0, 2));
      Val y = t.sum_all(parts[1]);
      Val z = t.sum_all(r0);
      return t.add(t.add(x, y), z);
    });
  }

  SUBCASE("rows gather accumulates over duplicate indices") {
    ParamStore s;
    s.add("tab", random_array({5, 3}, rng));
    check_op(s, [](Tape& t, ParamBinding& p) {
      Val g = t.rows(p("tab"), {1, 3, 1, 1});
      Rng wr(9);
      return weighted_sum(t, g, wr);
    });
  }

  SUBCASE("concat_cols/add_rowvec/scale_rows/row_sums") {
    ParamStore s;
    s.add("a", random_array({3, 2}, rng));
    s.add("b", random_array({3, 4}, rng));
    s.add("v", random_array({6}, rng));
    s.add("r", random_array({3}, rng));
    check_op(s, [](Tape& t, ParamBinding& p) {
      Val cat = t.concat_cols({p("a"), p("b")});
      Val x = t.add_rowvec(cat, p("v"));
      Val y = t.scale_rows(x, p("r"));
      Val z = t.row_sums(y);
      return t.sum_all(z);
    });
  }

  SUBCASE("stack_rows and cols") {
    ParamStore s;
    s.add("a", random_array({4}, rng));
    s.add("b", random_array({4}, rng));
    check_op(s, [](Tape& t, ParamBinding& p) {
      Val m = t.stack_rows({p("a"), p("b"), p("a")});
      Val c = t.cols(m, 1, 2);
      Rng wr(14);
      return weighted_sum(t, c, wr);
    });
  }

  SUBCASE("reductions and pick") {
    ParamStore s;
    s.add("a", random_array({7}, rng));
    check_op(s, [](Tape& t, ParamBinding& p) {
      Val m = t.mean_all(p("a"));
      Val q = t.sum_all(p("a"));
      Val x = t.pick(p("a"), 3);
      return t.add(t.add(m, q), x);
    });
  }

  SUBCASE("softmax family") {
    ParamStore s;
    s.add("v", random_array({6}, rng, -2.0, 2.0));
    s.add("m", random_array({3, 4}, rng, -2.0, 2.0));
    check_op(s, [](Tape& t, ParamBinding& p) {
      Val sm = t.softmax_vec(p("v"));
      Val lsm = t.log_softmax_vec(p("v"));
      std::vector<uint8_t> allowed = {1, 0, 0, 0, 1, 1, 0, 0, 1, 1, 1, 0};
      Val mrs = t.masked_row_softmax(p("m"), allowed);
      Rng wr(10);
      Val a = weighted_sum(t, sm, wr);
      Val b = weighted_sum(t, lsm, wr);
      Val c = weighted_sum(t, mrs, wr);
      return t.add(t.add(a, b), c);
    });
  }

  SUBCASE("masked_fill blocks gradient through filled entries") {
    ParamStore s;
    s.add("v", random_array({4}, rng));
    check_op(s, [](Tape& t, ParamBinding& p) {
      Val f = t.masked_fill(p("v"), {0, 1, 0, 1}, 3.5);
      Rng wr(11);
      return weighted_sum(t, f, wr);
    });
    Tape t;
    ParamBinding bind(t, s);
    Val f = t.masked_fill(bind("v"), {0, 1, 0, 1}, 3.5);
    t.backward(t.sum_all(f));
    CHECK(bind.grad_of("v").data[1] == 0.0);
    CHECK(bind.grad_of("v").data[0] == doctest::Approx(1.0));
  }

  SUBCASE("group softmax and group weighted rows") {
    ParamStore s;
    s.add("logits", random_array({7}, rng, -2.0, 2.0));
    s.add("table", random_array({4, 3}, rng));
    check_op(s, [](Tape& t, ParamBinding& p) {
      std::vector<size_t> offsets = {0, 3, 4, 7};
      Val alpha = t.group_softmax(p("logits"), offsets);
      Val out = t.group_weighted_rows(alpha, p("table"), {0, 1, 2, 3, 1, 1, 0}, offsets);
      Rng wr(12);
      return weighted_sum(t, out, wr);
    });
  }

  SUBCASE("layer_norm") {
    ParamStore s;
    s.add("x", random_array({4, 6}, rng));
    s.add("g", random_array({6}, rng, 0.5, 1.5));
    s.add("b", random_array({6}, rng));
    check_op(s, [](Tape& t, ParamBinding& p) {
      Val y = t.layer_norm(p("x"), p("g"), p("b"));
      Rng wr(13);
      return weighted_sum(t, y, wr);
    });
  }
}

TEST_CASE("random 3-layer composite matches finite differences") {
  Rng rng(99);
  ParamStore s;
  s.add("w1", random_array({6, 5}, rng));
  s.add("b1", random_array({5}, rng, -0.1, 0.1));
  s.add("w2", random_array({5, 4}, rng));
  s.add("b2", random_array({4}, rng, -0.1, 0.1));
  s.add("w3", random_array({4, 1}, rng));
  s.add("x", random_array({6}, rng));
  check_op(s, [](Tape& t, ParamBinding& p) {
    Val h1 = t.tanh_(t.add(t.vecmat(p("x"), p("w1")), p("b1")));
    Val h2 = t.sigmoid(t.add(t.vecmat(h1, p("w2")), p("b2")));
    Val out = t.vecmat(h2, p("w3"));
    return t.pick(out, 0);
  });
}

TEST_CASE("checkpoint round trip preserves names, shapes, and bits") {
  Rng rng(21);
  ParamStore s;
  s.add("alpha.w", random_array({3, 4}, rng));
  s.add("beta.v", random_array({7}, rng));
  s.add("gamma.s", Array::scalar(0.125));
  const std::string path = "ckpt_test.bin";
  save_checkpoint(s, "{\"d\":32}", path);
  std::string meta;
  ParamStore back = load_checkpoint(path, &meta);
  CHECK(meta == "{\"d\":32}");
  REQUIRE(back.count() == s.count());
  CHECK(back.names() == s.names());
  for (const std::string& name : s.names()) {
    CHECK(back.get(name).shape == s.get(name).shape);
    CHECK(back.get(name).data == s.get(name).data);
  }
  std::remove(path.c_str());
}
