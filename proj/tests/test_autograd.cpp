#include <doctest.h>

#include <cmath>

#include "hvtrack/autograd.hpp"
#include "testutil.hpp"

using namespace hvt;
using namespace hvt::ag;
using testutil::grad_check;
using testutil::random_tensor;

TEST_SUITE_BEGIN("autograd");

TEST_CASE("elementwise and matmul gradients match finite differences") {
  Rng rng(11);
  Var a = param(random_tensor(4, 3, rng));
  Var b = param(random_tensor(4, 3, rng));
  Var w = param(random_tensor(3, 5, rng));
  Var at = param(random_tensor(4, 6, rng));

  auto res = grad_check({a, b, w, at}, [&] {
    Var x = mul(add(a, b), sub(a, scale(b, 0.5)));  // 4x3
    Var y = matmul(x, w);                           // 4x5
    Var q = matmul(at, y, true, false);             // 6x5
    Var r = matmul(q, q, false, true);              // 6x6
    return mean_all(r);
  });
  CHECK(res.max_rel_err <= 1e-7);
}

TEST_CASE("softmax, layernorm, relu, sigmoid gradients") {
  Rng rng(12);
  Var x = param(random_tensor(5, 7, rng));
  Var g = param(random_tensor(1, 7, rng, 0.5, 1.5));
  Var b = param(random_tensor(1, 7, rng));

  auto res = grad_check({x, g, b}, [&] {
    Var h = layer_norm(x, g, b);
    Var s = softmax_rows(h);
    Var r = relu(sub(s, scale(sigmoid(h), 0.1)));
    return mean_all(mul(r, r));
  });
  CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("structural op gradients: concat, slice, gather, maxpool, cluster") {
  Rng rng(13);
  Var x = param(random_tensor(8, 4, rng));
  Var y = param(random_tensor(8, 2, rng));
  Var w = param(random_tensor(2, 1, rng, 0.1, 1.0));

  std::vector<std::size_t> idx{3, 0, 7, 7, 2, 5, 1, 4};
  auto res = grad_check({x, y, w}, [&] {
    Var c = concat_cols({x, y});           // 8x6
    Var gathered = gather_rows(c, idx);    // 8x6
    Var top = slice_rows(gathered, 0, 4);
    Var bot = slice_rows(gathered, 4, 8);
    Var cat = concat_rows({top, bot});
    Var pooled = group_maxpool_rows(cat, 2);  // 4x6
    Var agg = cluster_aggregate(pooled, w);   // 2x6
    Var sl = slice_cols(agg, 1, 5);
    return mean_all(mul(sl, sl));
  });
  CHECK(res.max_rel_err <= 1e-7);
}

TEST_CASE("reduction and normalization gradients") {
  Rng rng(14);
  Var x = param(random_tensor(6, 3, rng));
  Var w = param(random_tensor(6, 1, rng, 0.2, 1.0));

  auto res = grad_check({x, w}, [&] {
    Var num = col_sum(mul_colvec(x, w));        // 1x3
    Var den = sum_all(w);                       // 1x1
    Var mean_vec = div_by_scalar(num, den);     // 1x3
    Var n = l2_normalize_rows(mean_vec);
    Var rs = row_sum(add_rowvec(x, n));         // 6x1
    return mean_all(mul(rs, rs));
  });
  CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("loss op gradients and values") {
  Rng rng(15);
  Var x = param(random_tensor(4, 3, rng));
  Tensor target = random_tensor(4, 3, rng);
  Var p = param(random_tensor(2, 5, rng, 0.1, 0.9));
  Tensor labels(2, 5);
  for (std::size_t i = 0; i < labels.numel(); ++i) labels.v[i] = (i % 2) ? 1.0 : 0.0;

  auto res = grad_check({x, p}, [&] {
    Var l1 = mse_mean(x, target);
    Var l2 = huber_mean(x, target, 1.0);
    Var l3 = bce_mean(p, labels);
    Var l4 = huber_mean(wrap_angle(scale(x, 3.0)), target, 1.0);
    return add(add(l1, l2), add(l3, l4));
  });
  CHECK(res.max_rel_err <= 1e-6);

  // huber quadratic regime: residual 0.5 with delta 1 -> 0.125 per element
  Var r = constant(Tensor::full(1, 1, 0.5));
  Var h = huber_mean(r, Tensor::zeros(1, 1), 1.0);
  CHECK(h.val().v[0] == doctest::Approx(0.125));
}

TEST_CASE("dropout: off in eval, masked and rescaled in train") {
  Rng rng(16);
  Var x = param(Tensor::full(10, 10, 1.0));
  Var e = dropout(x, 0.4, rng, /*train=*/false);
  CHECK(e.node() == x.node());

  Var t = dropout(x, 0.4, rng, /*train=*/true);
  std::size_t zeros = 0;
  for (double v : t.val().v) {
    const bool kept = std::abs(v - 1.0 / 0.6) < 1e-12;
    const bool dropped = v == 0.0;
    CHECK((kept || dropped));
    zeros += dropped;
  }
  CHECK(zeros > 10);
  CHECK(zeros < 90);
}

TEST_CASE("no-grad mode records nothing") {
  Rng rng(17);
  Var x = param(random_tensor(3, 3, rng));
  ag::NoGradGuard guard;
  Var y = mean_all(mul(x, x));
  CHECK_FALSE(y.requires_grad());
}

TEST_SUITE_END();
