// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Reverse-mode autodiff: every operator's analytic gradient is checked
// against a central finite difference of the scalar loss it feeds.  The
// oracle is the difference quotient itself — no gradients are compared
// against other gradients from the same engine.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "jointtuner/autodiff.hpp"
#include "jointtuner/rng.hpp"

using namespace jt;
using namespace jt::ad;

namespace {

Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal() * scale;
  return m;
}

// Builds the loss twice per perturbed entry and compares the analytic
// gradient of every parameter against (L(w+h) - L(w-h)) / 2h.
void check_gradients(std::vector<Param*> params,
                     const std::function<NodeP(Tape&)>& build,
                     double h = 1e-5, double tol = 1e-6) {
  // Analytic pass.
  {
    Tape tape;
    NodeP loss = build(tape);
    REQUIRE(loss->val.rows() == 1);
    REQUIRE(loss->val.cols() == 1);
    for (Param* p : params) p->zero_grad();
    tape.backward(loss);
  }
  auto eval = [&]() {
    Tape tape;
    return build(tape)->val(0, 0);
  };
  for (Param* p : params) {
    for (Eigen::Index i = 0; i < p->w.rows(); ++i)
      for (Eigen::Index j = 0; j < p->w.cols(); ++j) {
        double keep = p->w(i, j);
        p->w(i, j) = keep + h;
        double up = eval();
        p->w(i, j) = keep - h;
        double down = eval();
        p->w(i, j) = keep;
        double fd = (up - down) / (2.0 * h);
        double an = p->g(i, j);
        // Relative where the gradient is meaningful; the 1e-4 floor turns
        // the check absolute below it (central differences carry ~h^2
        // truncation noise that would swamp a pure ratio there).
        double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
        INFO(p->name << "(" << i << "," << j << ") analytic " << an
                     << " fd " << fd);
        CHECK(std::abs(an - fd) / denom < tol);
      }
  }
}

Param make_param(const std::string& name, int r, int c, Rng& rng,
                 double scale = 1.0) {
  Param p;
  p.name = name;
  p.w = random_mat(r, c, rng, scale);
  p.g = Mat::Zero(r, c);
  return p;
}

}  // namespace

TEST_CASE("elementwise and linear ops match finite differences") {
  Rng rng(11);
  Param a = make_param("a", 3, 4, rng);
  Param b = make_param("b", 3, 4, rng);
  Param w = make_param("w", 4, 2, rng);
  Param bias = make_param("bias", 1, 4, rng);

  SECTION("add / sub / cmul / scale chain") {
    check_gradients({&a, &b}, [&](Tape& t) {
      NodeP x = add(t.leaf(a), t.leaf(b));
      NodeP y = sub(x, cmul(t.leaf(a), t.leaf(b)));
      return mean_all(cmul(scale(y, 1.7), y));
    });
  }
  SECTION("add_rowvec broadcasts one row over all rows") {
    check_gradients({&a, &bias}, [&](Tape& t) {
      NodeP y = add_rowvec(t.leaf(a), t.leaf(bias));
      return mean_all(cmul(y, y));
    });
  }
  SECTION("matmul and matmul_nt") {
    check_gradients({&a, &w}, [&](Tape& t) {
      NodeP y = matmul(t.leaf(a), t.leaf(w));  // 3x2
      return mean_all(cmul(y, y));
    });
    check_gradients({&a, &b}, [&](Tape& t) {
      NodeP y = matmul_nt(t.leaf(a), t.leaf(b));  // 3x3
      return mean_all(cmul(y, y));
    });
  }
}

TEST_CASE("nonlinearities match finite differences") {
  Rng rng(13);
  Param a = make_param("a", 4, 5, rng);

  SECTION("sigmoid") {
    check_gradients({&a}, [&](Tape& t) {
      return mean_all(sigmoid(t.leaf(a)));
    });
  }
  SECTION("relu (away from the kink)") {
    // Keep entries away from 0 so the subgradient choice cannot bite.
    for (Eigen::Index i = 0; i < a.w.size(); ++i)
      if (std::abs(a.w.data()[i]) < 0.05) a.w.data()[i] = 0.1;
    check_gradients({&a}, [&](Tape& t) {
      NodeP y = relu(t.leaf(a));
      return mean_all(cmul(y, y));
    });
  }
  SECTION("gelu uses the exact erf form") {
    check_gradients({&a}, [&](Tape& t) {
      NodeP y = gelu(t.leaf(a));
      return mean_all(cmul(y, y));
    });
    // Value oracle: gelu(x) = x * Phi(x) with Phi the standard normal CDF.
    Tape t;
    Param one = make_param("x", 1, 1, rng);
    one.w(0, 0) = 1.0;
    NodeP y = gelu(t.leaf(one));
    double phi1 = 0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)));
    CHECK(y->val(0, 0) == Catch::Approx(phi1).epsilon(1e-12));
  }
  SECTION("softmax_rows") {
    check_gradients({&a}, [&](Tape& t) {
      NodeP y = softmax_rows(t.leaf(a));
      return mean_all(cmul(y, y));
    });
    // Rows sum to one.
    Tape t;
    NodeP y = softmax_rows(t.leaf(a));
    for (Eigen::Index r = 0; r < y->val.rows(); ++r)
      CHECK(y->val.row(r).sum() == Catch::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("layernorm matches finite differences and normalizes") {
  Rng rng(17);
  Param x = make_param("x", 3, 6, rng);
  Param g = make_param("g", 1, 6, rng);
  Param b = make_param("b", 1, 6, rng);
  check_gradients({&x, &g, &b}, [&](Tape& t) {
    NodeP y = layernorm_rows(t.leaf(x), t.leaf(g), t.leaf(b));
    return mean_all(cmul(y, y));
  }, 1e-5, 2e-6);

  Tape t;
  Param ones = make_param("ones", 1, 6, rng);
  Param zeros = make_param("zeros", 1, 6, rng);
  ones.w.setOnes();
  zeros.w.setZero();
  NodeP y = layernorm_rows(t.leaf(x), t.leaf(ones), t.leaf(zeros));
  for (Eigen::Index r = 0; r < y->val.rows(); ++r) {
    CHECK(std::abs(y->val.row(r).mean()) < 1e-12);
    double var = y->val.row(r).array().square().mean();
    CHECK(var == Catch::Approx(1.0).margin(1e-4));  // eps shifts it slightly
  }
}

TEST_CASE("row selection, concatenation, and gathering") {
  Rng rng(19);
  Param a = make_param("a", 5, 3, rng);
  Param b = make_param("b", 2, 3, rng);

  SECTION("rows slice") {
    check_gradients({&a}, [&](Tape& t) {
      NodeP y = rows(t.leaf(a), 1, 3);
      return mean_all(cmul(y, y));
    });
  }
  SECTION("concat_rows") {
    check_gradients({&a, &b}, [&](Tape& t) {
      NodeP y = concat_rows({t.leaf(a), t.leaf(b), t.leaf(b)});
      return mean_all(cmul(y, y));
    });
  }
  SECTION("gather_rows with duplicate indices accumulates") {
    check_gradients({&a}, [&](Tape& t) {
      NodeP y = gather_rows(t.leaf(a), {0, 2, 2, 4, 0});
      return mean_all(cmul(y, y));
    });
  }
}

TEST_CASE("mul_scalar couples a gate scalar into a matrix") {
  Rng rng(23);
  Param a = make_param("a", 3, 4, rng);
  Param g = make_param("g", 2, 4, rng);
  // Gate computed from g itself so both gradient paths are exercised.
  check_gradients({&a, &g}, [&](Tape& t) {
    NodeP gate = mean_all(sigmoid(t.leaf(g)));  // 1x1
    NodeP y = mul_scalar(t.leaf(a), gate);
    return mean_all(cmul(y, y));
  });
}

TEST_CASE("mse reduces over all elements") {
  Rng rng(29);
  Param a = make_param("a", 3, 4, rng);
  Param b = make_param("b", 3, 4, rng);
  check_gradients({&a, &b}, [&](Tape& t) {
    return mse(t.leaf(a), t.leaf(b));
  });
  Tape t;
  double expect = (a.w - b.w).array().square().mean();
  CHECK(mse(t.leaf(a), t.leaf(b))->val(0, 0) ==
        Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("attention_core matches finite differences") {
  Rng rng(31);
  // Two groups of different lengths, two heads, head dim 3.
  Param q = make_param("q", 7, 6, rng, 0.5);
  Param k = make_param("k", 7, 6, rng, 0.5);
  Param v = make_param("v", 7, 6, rng, 0.5);
  std::vector<Span> qg = {{0, 3}, {3, 4}};
  std::vector<Span> kg = {{0, 3}, {3, 4}};
  check_gradients({&q, &k, &v}, [&](Tape& t) {
    NodeP y = attention_core(t.leaf(q), t.leaf(k), t.leaf(v), qg, kg, 2);
    return mean_all(cmul(y, y));
  }, 1e-5, 2e-6);
}

TEST_CASE("attention_core with cross lengths (queries vs memory)") {
  Rng rng(37);
  Param q = make_param("q", 4, 4, rng, 0.5);
  Param k = make_param("k", 6, 4, rng, 0.5);
  Param v = make_param("v", 6, 4, rng, 0.5);
  std::vector<Span> qg = {{0, 2}, {2, 2}};
  std::vector<Span> kg = {{0, 3}, {3, 3}};
  check_gradients({&q, &k, &v}, [&](Tape& t) {
    NodeP y = attention_core(t.leaf(q), t.leaf(k), t.leaf(v), qg, kg, 2);
    return mean_all(cmul(y, y));
  }, 1e-5, 2e-6);
}

TEST_CASE("attention_core equals a manual softmax composition") {
  Rng rng(41);
  Param q = make_param("q", 3, 4, rng, 0.7);
  Param k = make_param("k", 3, 4, rng, 0.7);
  Param v = make_param("v", 3, 4, rng, 0.7);
  // Single group, single head: fused output must equal the op-by-op build.
  Tape t;
  NodeP fused = attention_core(t.leaf(q), t.leaf(k), t.leaf(v), {{0, 3}},
                               {{0, 3}}, 1);
  NodeP scores = scale(matmul_nt(t.leaf(q), t.leaf(k)), 1.0 / 2.0);
  NodeP manual = matmul(softmax_rows(scores), t.leaf(v));
  CHECK((fused->val - manual->val).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward only reaches nodes flagged as needed") {
  Rng rng(43);
  Param a = make_param("a", 2, 2, rng);
  Param frozen = make_param("frozen", 2, 2, rng);
  frozen.trainable = false;
  Tape t;
  NodeP y = cmul(t.leaf(a), t.leaf(frozen));
  a.zero_grad();
  frozen.zero_grad();
  t.backward(mean_all(y));
  CHECK(a.g.cwiseAbs().sum() > 0.0);
  CHECK(frozen.g.cwiseAbs().sum() == 0.0);
}

TEST_CASE("gradients accumulate across shared subexpressions") {
  Rng rng(47);
  Param a = make_param("a", 2, 3, rng);
  // L = mean(x*x) with x reused twice via different paths.
  check_gradients({&a}, [&](Tape& t) {
    NodeP x = t.leaf(a);
    NodeP y = add(cmul(x, x), scale(x, 0.5));
    return mean_all(y);
  });
}
