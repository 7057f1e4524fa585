#include <cmath>
#include <limits>
#include <vector>

#include "aim/batchnorm.hpp"
#include "aim/error.hpp"
#include "aim/ops.hpp"
#include "aim/optim.hpp"
#include "aim/parameter.hpp"
#include "aim/rng.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace aim;
using testing::grda_grid_oracle;
using testing::relative_error;

namespace {

std::vector<long double> bn_oracle(const std::vector<double>& x, long double eps) {
  long double mean = 0;
  for (double v : x) mean += v;
  mean /= x.size();
  long double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size();
  std::vector<long double> out;
  for (double v : x) out.push_back((v - mean) / std::sqrt(var + eps));
  return out;
}

}  // namespace

TEST_CASE("adam") {
  AdamConfig config;
  config.lr = 0.1;
  SUBCASE("first step with unit gradient moves by -lr") {
    Tensor value = Tensor::vector({0.0});
    AdamState state;
    adam_step(value, Tensor::vector({1.0}), state, config);
    CHECK(value[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(state.step == 1);
  }
  SUBCASE("zero gradient is the identity") {
    Tensor value = Tensor::vector({0.3, -1.5, 2.0});
    const Tensor before = value;
    AdamState state;
    for (int i = 0; i < 50; ++i) adam_step(value, Tensor::vector({0.0, 0.0, 0.0}), state, config);
    for (std::size_t i = 0; i < value.size(); ++i) CHECK(value[i] == before[i]);
  }
  SUBCASE("constant gradient moves against its sign") {
    Tensor value = Tensor::vector({1.0, 1.0});
    AdamState state;
    for (int i = 0; i < 20; ++i) adam_step(value, Tensor::vector({2.0, -0.5}), state, config);
    CHECK(value[0] < 1.0);
    CHECK(value[1] > 1.0);
  }
  SUBCASE("non-finite gradient is rejected without side effects") {
    Tensor value = Tensor::vector({1.0});
    AdamState state;
    adam_step(value, Tensor::vector({1.0}), state, config);
    const double v0 = value[0];
    const auto m0 = state.m[0];
    CHECK_THROWS_AS(adam_step(value, Tensor::vector({std::nan("")}), state, config), NumericError);
    CHECK(value[0] == v0);
    CHECK(state.m[0] == m0);
    CHECK(state.step == 1);
  }
}

TEST_CASE("grda closed form") {
  CHECK(soft_threshold(0.3, 0.1) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(soft_threshold(-0.05, 0.1) == 0.0);
  CHECK(soft_threshold(-0.5, 0.1) == doctest::Approx(-0.4).epsilon(1e-12));
  CHECK(grda_grid_oracle(0.3, 0.1) == doctest::Approx(0.2).epsilon(1e-5));
  CHECK(std::abs(grda_grid_oracle(-0.05, 0.1)) <= 1e-5);

  Rng rng(42);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform() * 3.0 - 1.5;
    const double g = rng.uniform() * 0.5;
    worst = std::max(worst, std::abs(soft_threshold(v, g) - grda_grid_oracle(v, g)));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("grda exact sparsity inside the band") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double g = rng.uniform();
    const double v = (rng.uniform() * 2.0 - 1.0) * g;
    CHECK(soft_threshold(v, g) == 0.0);
  }
}

TEST_CASE("grda_step") {
  SUBCASE("c = 0 is plain dual averaging") {
    GrdaState state;
    state.config = {0.1, 0.0, 0.6};
    state.alpha0 = Tensor::vector({0.5, -0.2});
    Tensor out;
    for (int i = 0; i < 5; ++i) out = grda_step(state, Tensor::vector({1.0, -2.0}));
    CHECK(out[0] == doctest::Approx(0.5 - 0.1 * 5).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(-0.2 + 0.1 * 10).epsilon(1e-12));
    CHECK(state.step == 5);
  }
  SUBCASE("zero start with zero gradients stays zero") {
    GrdaState state;
    state.alpha0 = Tensor::vector({0.0});
    for (int i = 0; i < 100; ++i) CHECK(grda_step(state, Tensor::vector({0.0}))[0] == 0.0);
  }
  SUBCASE("threshold follows c * sqrt(gamma) * (t gamma)^mu at the pre-increment step") {
    GrdaConfig config{0.01, 0.05, 0.6};
    CHECK(grda_threshold(config, 0) == 0.0);
    CHECK(grda_threshold(config, 100) == doctest::Approx(0.05 * 0.1 * 1.0).epsilon(1e-12));
    GrdaState state;
    state.config = config;
    state.alpha0 = Tensor::vector({1.0});
    for (int i = 0; i < 100; ++i) grda_step(state, Tensor::vector({0.0}));
    CHECK(grda_step(state, Tensor::vector({0.0}))[0] == doctest::Approx(1.0 - 0.005).epsilon(1e-12));
  }
  SUBCASE("non-finite gradient is rejected") {
    GrdaState state;
    state.alpha0 = Tensor::vector({1.0});
    CHECK_THROWS_AS(grda_step(state, Tensor::vector({std::numeric_limits<double>::infinity()})), NumericError);
    CHECK(state.step == 0);
  }
}

TEST_CASE("apply_update dispatches on the optimizer tag and clears gradients") {
  OptimizerSettings settings;
  Parameter frozen("f", Tensor::vector({1.0}), OptimizerTag::frozen);
  frozen.grad[0] = 3.0;
  apply_update(frozen, settings);
  CHECK(frozen.value[0] == 1.0);
  CHECK(frozen.grad[0] == 0.0);

  Parameter gate("g", Tensor::vector({0.5}), OptimizerTag::grda);
  gate.grad[0] = 1.0;
  apply_update(gate, settings);
  CHECK(gate.value[0] == doctest::Approx(0.5 - 0.01).epsilon(1e-12));
  CHECK(gate.grad[0] == 0.0);

  Parameter weight("w", Tensor::vector({0.5}), OptimizerTag::adam);
  weight.grad[0] = -1.0;
  apply_update(weight, settings);
  CHECK(weight.value[0] == doctest::Approx(0.5 + 1e-3).epsilon(1e-6));

  ParameterStore store;
  store.add("a", Tensor::vector({1.0, 2.0}), OptimizerTag::adam);
  CHECK_THROWS_AS(store.add("a", Tensor::vector({1.0}), OptimizerTag::adam), ValidationError);
  CHECK(store.scalar_count() == 2);
  CHECK(parse_optimizer_tag("grda") == OptimizerTag::grda);
}

TEST_CASE("batch normalization") {
  SUBCASE("[1,2,3] against a long-double oracle") {
    const std::vector<double> x{1, 2, 3};
    std::vector<double> out(3);
    BnState state;
    bn_forward(x, state, Mode::train, out);
    const auto expected = bn_oracle(x, 1e-5L);
    for (int i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(static_cast<double>(expected[i])).epsilon(1e-12));
    CHECK(out[0] == doctest::Approx(-1.22474).epsilon(1e-5));
    CHECK(state.batch_mean == 2.0);
    CHECK(state.running_mean == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(state.running_var == doctest::Approx(0.9 + 0.1 * 2.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("constant batch maps to zero") {
    const std::vector<double> x{5, 5, 5};
    std::vector<double> out(3, 1.0);
    BnState state;
    bn_forward(x, state, Mode::train, out);
    for (double v : out) CHECK(v == 0.0);
  }
  SUBCASE("eval with default running stats is identity up to epsilon") {
    const std::vector<double> x{-2, 0.5, 7};
    std::vector<double> out(3);
    BnState state;
    bn_forward(x, state, Mode::eval, out);
    for (int i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(x[i] / std::sqrt(1.0 + 1e-5)).epsilon(1e-14));
  }
  SUBCASE("train mode needs two values") {
    std::vector<double> one{1.0}, out(1);
    BnState state;
    CHECK_THROWS_AS(bn_forward(one, state, Mode::train, out), ValidationError);
    CHECK_NOTHROW(bn_forward(one, state, Mode::eval, out));
  }
  SUBCASE("train output has zero mean and unit variance up to epsilon") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> x(2 + rng.below(30));
      for (auto& v : x) v = rng.normal(3.0, 5.0);
      std::vector<double> out(x.size());
      BnState state;
      bn_forward(x, state, Mode::train, out);
      double mean = 0, var = 0;
      for (double v : out) mean += v;
      mean /= out.size();
      for (double v : out) var += (v - mean) * (v - mean);
      var /= out.size();
      const double raw_var = (state.batch_std * state.batch_std) - state.epsilon;
      CHECK(std::abs(mean) < 1e-10);
      const double ratio = var / (raw_var / (raw_var + state.epsilon));
      CHECK(var <= 1.0);
      CHECK(ratio >= 1.0 - 1e-6);
      CHECK(ratio <= 1.0 + 1e-6);
    }
  }
  SUBCASE("backward matches central differences") {
    Rng rng(9);
    for (Mode mode : {Mode::train, Mode::eval}) {
      std::vector<double> x(6), w(6);
      for (auto& v : x) v = rng.normal();
      for (auto& v : w) v = rng.normal();
      BnState state;
      state.running_mean = 0.3;
      state.running_var = 2.0;
      auto objective = [&](const std::vector<double>& in) {
        BnState s = state;
        std::vector<double> out(in.size());
        bn_forward(in, s, mode, out, false);
        double acc = 0;
        for (std::size_t i = 0; i < in.size(); ++i) acc += w[i] * out[i];
        return acc;
      };
      BnState s = state;
      std::vector<double> out(6), dx(6, 0.0);
      bn_forward(x, s, mode, out, false);
      bn_backward(out, w, s, mode, dx);
      for (std::size_t i = 0; i < x.size(); ++i) {
        auto up = x, down = x;
        up[i] += 1e-5;
        down[i] -= 1e-5;
        const double numeric = (objective(up) - objective(down)) / 2e-5;
        CHECK(relative_error(dx[i], numeric) < 1e-4);
      }
    }
  }
}

TEST_CASE("dense ops") {
  CHECK(ops::sigmoid(0.0) == 0.5);
  std::vector<double> x{-1.0, 2.0}, y(2), dx(2, 0.0);
  ops::relu(x, y);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 2.0);
  ops::relu_backward(x, std::vector<double>{1.0, 1.0}, dx);
  CHECK(dx[0] == 0.0);
  CHECK(dx[1] == 1.0);

  std::vector<double> w{1, -1}, b{0}, a{2, 3}, z(1), r(1);
  ops::affine(w, b, a, z);
  ops::relu(z, r);
  CHECK(z[0] == -1.0);
  CHECK(r[0] == 0.0);

  CHECK(ops::logloss_from_logit(0.0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ops::logloss_from_logit(0.0, 0) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(ops::logloss_from_logit(800.0, 1) == 0.0);
  CHECK(std::isfinite(ops::logloss_from_logit(-800.0, 1)));
}

TEST_CASE("logloss from logit agrees with logloss from probability") {
  for (double z = -30.0; z <= 30.0; z += 0.25) {
    for (int y : {0, 1}) {
      CHECK(std::abs(ops::logloss_from_logit(z, y) - testing::direct_logloss(z, y)) <= 1e-12);
    }
  }
}

TEST_CASE("dense op gradients match central differences") {
  Rng rng(5);
  const double h = 1e-5;
  auto randv = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& e : v) e = rng.normal();
    return v;
  };

  SUBCASE("affine") {
    auto w = randv(6), b = randv(2), x = randv(3), cot = randv(2);
    auto f = [&](const std::vector<double>& ww, const std::vector<double>& bb, const std::vector<double>& xx) {
      std::vector<double> y(2);
      ops::affine(ww, bb, xx, y);
      return ops::dot(y, cot);
    };
    std::vector<double> dw(6, 0), db(2, 0), dx(3, 0);
    ops::affine_backward(w, x, cot, dw, db, dx);
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto up = w, dn = w;
      up[i] += h, dn[i] -= h;
      CHECK(relative_error(dw[i], (f(up, b, x) - f(dn, b, x)) / (2 * h)) < 1e-4);
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      auto up = b, dn = b;
      up[i] += h, dn[i] -= h;
      CHECK(relative_error(db[i], (f(w, up, x) - f(w, dn, x)) / (2 * h)) < 1e-4);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto up = x, dn = x;
      up[i] += h, dn[i] -= h;
      CHECK(relative_error(dx[i], (f(w, b, up) - f(w, b, dn)) / (2 * h)) < 1e-4);
    }
  }
  SUBCASE("hadamard, add, sum, dot") {
    auto a = randv(4), b = randv(4), cot = randv(4);
    std::vector<double> da(4, 0), db(4, 0);
    ops::hadamard_backward(a, b, cot, da, db);
    auto had = [&](const std::vector<double>& aa, const std::vector<double>& bb) {
      std::vector<double> o(4);
      ops::hadamard(aa, bb, o);
      return ops::dot(o, cot);
    };
    for (std::size_t i = 0; i < 4; ++i) {
      auto up = a, dn = a;
      up[i] += h, dn[i] -= h;
      CHECK(relative_error(da[i], (had(up, b) - had(dn, b)) / (2 * h)) < 1e-4);
      auto ub = b, db_ = b;
      ub[i] += h, db_[i] -= h;
      CHECK(relative_error(db[i], (had(a, ub) - had(a, db_)) / (2 * h)) < 1e-4);
    }
    std::vector<double> sa(4, 0), sb(4, 0);
    ops::add_backward(cot, sa, sb);
    for (std::size_t i = 0; i < 4; ++i) CHECK(sa[i] == cot[i]);
    std::vector<double> ds(4, 0);
    ops::sum_backward(2.0, ds);
    for (double v : ds) CHECK(v == 2.0);
    std::vector<double> ga(4, 0), gb(4, 0);
    ops::dot_backward(a, b, 1.5, ga, gb);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(ga[i] == doctest::Approx(1.5 * b[i]));
      CHECK(gb[i] == doctest::Approx(1.5 * a[i]));
    }
  }
  SUBCASE("sigmoid and logloss") {
    for (double z : {-3.0, -0.2, 0.0, 1.7}) {
      const double y = ops::sigmoid(z);
      const double numeric = (ops::sigmoid(z + h) - ops::sigmoid(z - h)) / (2 * h);
      CHECK(relative_error(ops::sigmoid_backward(y, 1.0), numeric) < 1e-4);
      for (int label : {0, 1}) {
        const double nl = (ops::logloss_from_logit(z + h, label) - ops::logloss_from_logit(z - h, label)) / (2 * h);
        CHECK(relative_error(ops::logloss_from_logit_grad(z, label), nl) < 1e-4);
      }
    }
  }
  SUBCASE("relu away from the kink") {
    for (double v : {-2.0, -0.3, 0.4, 3.0}) {
      std::vector<double> in{v}, out(1), d(1, 0.0);
      ops::relu_backward(in, std::vector<double>{1.0}, d);
      std::vector<double> up{v + h}, dn{v - h}, ou(1), od(1);
      ops::relu(up, ou);
      ops::relu(dn, od);
      CHECK(relative_error(d[0], (ou[0] - od[0]) / (2 * h)) < 1e-4);
    }
  }
}
