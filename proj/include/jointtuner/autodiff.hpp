// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Minimal reverse-mode autodiff over Eigen double matrices. A Tape owns
// nodes in creation order (which is a topological order of the DAG), so
// backward() is a single reverse sweep: any node whose grad buffer has been
// touched propagates to its parents. Everything is f64 so finite-difference
// gradient checks can be tight.
//
// Conventions: data matrices are tokens-as-rows (n_tokens x features).
// Linear layers compute y = x * W + b with W (in x out) and b (1 x out).

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace jt::ad {

using Mat = Eigen::MatrixXd;

class Tape;

struct Node {
  Mat val;
  Mat grad;  // empty until first accumulation
  bool need = false;
  std::uint32_t id = 0;
  Tape* tape = nullptr;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> back;  // reads this->grad, accumulates parents

  void accum(const Mat& g) {
    if (grad.size() == 0) grad = Mat::Zero(val.rows(), val.cols());
    grad += g;
  }
};

using NodeP = std::shared_ptr<Node>;

// Trainable parameter: storage outlives tapes; grad accumulates across a step.
struct Param {
  std::string name;
  Mat w;
  Mat g;
  bool trainable = true;

  void zero_grad() { g = Mat::Zero(w.rows(), w.cols()); }
};

class Tape {
 public:
  NodeP alloc(Mat val, bool need, std::vector<NodeP> parents,
              std::function<void(Node&)> back) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->need = need;
    n->id = static_cast<std::uint32_t>(nodes_.size());
    n->tape = this;
    n->parents = std::move(parents);
    n->back = std::move(back);
    nodes_.push_back(n);
    return n;
  }

  NodeP constant(Mat val) { return alloc(std::move(val), false, {}, {}); }

  // Leaf bound to a parameter; grads flush back on backward().
  NodeP leaf(Param& p) {
    NodeP n = alloc(p.w, p.trainable, {}, {});
    if (p.trainable) bindings_.emplace_back(n, &p);
    return n;
  }

  void backward(const NodeP& loss) {
    if (loss->val.rows() != 1 || loss->val.cols() != 1)
      throw std::runtime_error("backward expects a 1x1 loss node");
    loss->accum(Mat::Ones(1, 1));
    for (std::size_t i = loss->id + 1; i-- > 0;) {
      Node& n = *nodes_[i];
      if (n.grad.size() == 0 || !n.back) continue;
      n.back(n);
    }
    for (auto& [node, param] : bindings_) {
      if (node->grad.size() == 0) continue;
      if (param->g.size() == 0) param->zero_grad();
      param->g += node->grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<NodeP> nodes_;
  std::vector<std::pair<NodeP, Param*>> bindings_;
};

namespace detail {
inline Tape& tape_of(const NodeP& a) { return *a->tape; }
inline bool any_need(std::initializer_list<const NodeP*> xs) {
  for (const NodeP* x : xs)
    if ((*x)->need) return true;
  return false;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise / linear ops.

inline NodeP add(NodeP a, NodeP b) {
  return detail::tape_of(a).alloc(
      a->val + b->val, detail::any_need({&a, &b}), {a, b}, [a, b](Node& n) {
        if (a->need) a->accum(n.grad);
        if (b->need) b->accum(n.grad);
      });
}

inline NodeP sub(NodeP a, NodeP b) {
  return detail::tape_of(a).alloc(
      a->val - b->val, detail::any_need({&a, &b}), {a, b}, [a, b](Node& n) {
        if (a->need) a->accum(n.grad);
        if (b->need) b->accum(-n.grad);
      });
}

// b is 1 x m, added to every row of a.
inline NodeP add_rowvec(NodeP a, NodeP b) {
  return detail::tape_of(a).alloc(
      a->val.rowwise() + b->val.row(0), detail::any_need({&a, &b}), {a, b},
      [a, b](Node& n) {
        if (a->need) a->accum(n.grad);
        if (b->need) b->accum(n.grad.colwise().sum());
      });
}

inline NodeP cmul(NodeP a, NodeP b) {
  return detail::tape_of(a).alloc(
      a->val.cwiseProduct(b->val), detail::any_need({&a, &b}), {a, b},
      [a, b](Node& n) {
        if (a->need) a->accum(n.grad.cwiseProduct(b->val));
        if (b->need) b->accum(n.grad.cwiseProduct(a->val));
      });
}

inline NodeP scale(NodeP a, double s) {
  return detail::tape_of(a).alloc(s * a->val, a->need, {a}, [a, s](Node& n) {
    if (a->need) a->accum(s * n.grad);
  });
}

inline NodeP matmul(NodeP a, NodeP b) {
  return detail::tape_of(a).alloc(
      a->val * b->val, detail::any_need({&a, &b}), {a, b}, [a, b](Node& n) {
        if (a->need) a->accum(n.grad * b->val.transpose());
        if (b->need) b->accum(a->val.transpose() * n.grad);
      });
}

// y = a * b^T  (a: n x k, b: m x k -> y: n x m)
inline NodeP matmul_nt(NodeP a, NodeP b) {
  return detail::tape_of(a).alloc(
      a->val * b->val.transpose(), detail::any_need({&a, &b}), {a, b},
      [a, b](Node& n) {
        if (a->need) a->accum(n.grad * b->val);
        if (b->need) b->accum(n.grad.transpose() * a->val);
      });
}

// y = s * a where s is a 1x1 node (e.g. a learned gate).
inline NodeP mul_scalar(NodeP a, NodeP s) {
  return detail::tape_of(a).alloc(
      s->val(0, 0) * a->val, detail::any_need({&a, &s}), {a, s},
      [a, s](Node& n) {
        if (a->need) a->accum(s->val(0, 0) * n.grad);
        if (s->need) {
          Mat ds(1, 1);
          ds(0, 0) = n.grad.cwiseProduct(a->val).sum();
          s->accum(ds);
        }
      });
}

inline NodeP sigmoid(NodeP a) {
  Mat y = a->val.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return detail::tape_of(a).alloc(std::move(y), a->need, {a}, [a](Node& n) {
    if (!a->need) return;
    a->accum(n.grad.cwiseProduct(
        n.val.cwiseProduct(Mat::Ones(n.val.rows(), n.val.cols()) - n.val)));
  });
}

inline NodeP relu(NodeP a) {
  Mat y = a->val.cwiseMax(0.0);
  return detail::tape_of(a).alloc(std::move(y), a->need, {a}, [a](Node& n) {
    if (!a->need) return;
    Mat m = (a->val.array() > 0.0).cast<double>();
    a->accum(n.grad.cwiseProduct(m));
  });
}

inline NodeP gelu(NodeP a) {
  auto phi = [](double x) {  // standard normal cdf
    return 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
  };
  Mat y = a->val.unaryExpr([&](double x) { return x * phi(x); });
  return detail::tape_of(a).alloc(std::move(y), a->need, {a, }, [a, phi](Node& n) {
    if (!a->need) return;
    Mat d = a->val.unaryExpr([&](double x) {
      double pdf = 0.3989422804014326779 * std::exp(-0.5 * x * x);
      return phi(x) + x * pdf;
    });
    a->accum(n.grad.cwiseProduct(d));
  });
}

inline NodeP softmax_rows(NodeP a) {
  Mat y = a->val;
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    double mx = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  return detail::tape_of(a).alloc(std::move(y), a->need, {a}, [a](Node& n) {
    if (!a->need) return;
    Mat da(n.val.rows(), n.val.cols());
    for (Eigen::Index r = 0; r < n.val.rows(); ++r) {
      double dot = n.grad.row(r).cwiseProduct(n.val.row(r)).sum();
      da.row(r) =
          n.val.row(r).cwiseProduct(n.grad.row(r).array().operator-(dot).matrix());
    }
    a->accum(da);
  });
}

// Row-wise layernorm with learned gain/bias (each 1 x m).
inline NodeP layernorm_rows(NodeP x, NodeP gain, NodeP bias,
                            double eps = 1e-5) {
  const Mat& v = x->val;
  Eigen::Index nr = v.rows(), m = v.cols();
  Mat xhat(nr, m);
  Eigen::VectorXd inv(nr);
  for (Eigen::Index r = 0; r < nr; ++r) {
    double mu = v.row(r).mean();
    double var = (v.row(r).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv(r) = is;
    xhat.row(r) = (v.row(r).array() - mu) * is;
  }
  Mat y = (xhat.array().rowwise() * gain->val.row(0).array()).rowwise() +
          bias->val.row(0).array();
  bool need = detail::any_need({&x, &gain, &bias});
  return detail::tape_of(x).alloc(
      std::move(y), need, {x, gain, bias},
      [x, gain, bias, xhat, inv](Node& n) {
        Eigen::Index nr = n.val.rows(), m = n.val.cols();
        if (gain->need)
          gain->accum(n.grad.cwiseProduct(xhat).colwise().sum());
        if (bias->need) bias->accum(n.grad.colwise().sum());
        if (!x->need) return;
        Mat dx(nr, m);
        for (Eigen::Index r = 0; r < nr; ++r) {
          Eigen::RowVectorXd gg =
              n.grad.row(r).cwiseProduct(gain->val.row(0));
          double mean_gg = gg.mean();
          double mean_ggx = gg.cwiseProduct(xhat.row(r)).mean();
          dx.row(r) =
              inv(r) * (gg.array() - mean_gg - xhat.row(r).array() * mean_ggx);
        }
        x->accum(dx);
      });
}

// ---------------------------------------------------------------------------
// Shape ops.

inline NodeP rows(NodeP a, Eigen::Index r0, Eigen::Index n) {
  return detail::tape_of(a).alloc(
      a->val.middleRows(r0, n), a->need, {a}, [a, r0, n](Node& nd) {
        if (!a->need) return;
        if (a->grad.size() == 0) a->grad = Mat::Zero(a->val.rows(), a->val.cols());
        a->grad.middleRows(r0, n) += nd.grad;
      });
}

inline NodeP concat_rows(const std::vector<NodeP>& parts) {
  if (parts.empty()) throw std::runtime_error("concat_rows: empty");
  Eigen::Index nr = 0, nc = parts[0]->val.cols();
  for (const auto& p : parts) nr += p->val.rows();
  Mat y(nr, nc);
  Eigen::Index off = 0;
  bool need = false;
  for (const auto& p : parts) {
    y.middleRows(off, p->val.rows()) = p->val;
    off += p->val.rows();
    need = need || p->need;
  }
  auto ps = parts;
  return detail::tape_of(parts[0])
      .alloc(std::move(y), need, parts, [ps](Node& n) {
        Eigen::Index off = 0;
        for (const auto& p : ps) {
          if (p->need) p->accum(n.grad.middleRows(off, p->val.rows()));
          off += p->val.rows();
        }
      });
}

// y.row(i) = a.row(idx[i]); duplicate indices accumulate on backward.
inline NodeP gather_rows(NodeP a, std::vector<Eigen::Index> idx) {
  Mat y(static_cast<Eigen::Index>(idx.size()), a->val.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) y.row(i) = a->val.row(idx[i]);
  return detail::tape_of(a).alloc(
      std::move(y), a->need, {a}, [a, idx = std::move(idx)](Node& n) {
        if (!a->need) return;
        if (a->grad.size() == 0) a->grad = Mat::Zero(a->val.rows(), a->val.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
          a->grad.row(idx[i]) += n.grad.row(i);
      });
}

// ---------------------------------------------------------------------------
// Reductions / losses.

inline NodeP mean_all(NodeP a) {
  Mat y(1, 1);
  y(0, 0) = a->val.mean();
  double n = static_cast<double>(a->val.size());
  return detail::tape_of(a).alloc(std::move(y), a->need, {a}, [a, n](Node& nd) {
    if (a->need)
      a->accum(Mat::Constant(a->val.rows(), a->val.cols(), nd.grad(0, 0) / n));
  });
}

// Mean squared error over all elements.
inline NodeP mse(NodeP a, NodeP b) {
  if (a->val.rows() != b->val.rows() || a->val.cols() != b->val.cols())
    throw std::runtime_error("mse: shape mismatch");
  Mat y(1, 1);
  y(0, 0) = (a->val - b->val).squaredNorm() / static_cast<double>(a->val.size());
  return detail::tape_of(a).alloc(
      y, detail::any_need({&a, &b}), {a, b}, [a, b](Node& n) {
        double c = 2.0 * n.grad(0, 0) / static_cast<double>(a->val.size());
        if (a->need) a->accum(c * (a->val - b->val));
        if (b->need) b->accum(c * (b->val - a->val));
      });
}

// ---------------------------------------------------------------------------
// Fused multi-head attention core. q: (Nq x d), k,v: (Nk x d), d = heads*dh.
// For each group i, query rows [qg[i].first, +qg[i].second) attend to
// key/value rows [kg[i].first, +kg[i].second). Self-attention passes the
// same spans for both; cross-attention pairs token spans with prompt spans.

struct Span {
  Eigen::Index start;
  Eigen::Index len;
};

inline NodeP attention_core(NodeP q, NodeP k, NodeP v,
                            std::vector<Span> qg, std::vector<Span> kg,
                            int heads) {
  if (qg.size() != kg.size())
    throw std::runtime_error("attention_core: group count mismatch");
  Eigen::Index d = q->val.cols();
  if (d % heads != 0)
    throw std::runtime_error("attention_core: width not divisible by heads");
  Eigen::Index dh = d / heads;
  double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat out = Mat::Zero(q->val.rows(), d);
  // Saved softmax matrices, indexed [group*heads + head].
  auto probs = std::make_shared<std::vector<Mat>>();
  probs->reserve(qg.size() * heads);
  for (std::size_t i = 0; i < qg.size(); ++i) {
    for (int h = 0; h < heads; ++h) {
      auto Q = q->val.block(qg[i].start, h * dh, qg[i].len, dh);
      auto K = k->val.block(kg[i].start, h * dh, kg[i].len, dh);
      auto V = v->val.block(kg[i].start, h * dh, kg[i].len, dh);
      Mat z = sc * (Q * K.transpose());
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        double mx = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - mx).exp();
        z.row(r) /= z.row(r).sum();
      }
      out.block(qg[i].start, h * dh, qg[i].len, dh) = z * V;
      probs->push_back(std::move(z));
    }
  }
  bool need = detail::any_need({&q, &k, &v});
  return detail::tape_of(q).alloc(
      std::move(out), need, {q, k, v},
      [q, k, v, qg = std::move(qg), kg = std::move(kg), heads, dh, sc,
       probs](Node& n) {
        auto ensure = [](const NodeP& p) {
          if (p->grad.size() == 0)
            p->grad = Mat::Zero(p->val.rows(), p->val.cols());
        };
        if (q->need) ensure(q);
        if (k->need) ensure(k);
        if (v->need) ensure(v);
        for (std::size_t i = 0; i < qg.size(); ++i) {
          for (int h = 0; h < heads; ++h) {
            const Mat& P = (*probs)[i * heads + h];
            auto Q = q->val.block(qg[i].start, h * dh, qg[i].len, dh);
            auto K = k->val.block(kg[i].start, h * dh, kg[i].len, dh);
            auto V = v->val.block(kg[i].start, h * dh, kg[i].len, dh);
            Mat dO = n.grad.block(qg[i].start, h * dh, qg[i].len, dh);
            if (v->need)
              v->grad.block(kg[i].start, h * dh, kg[i].len, dh) +=
                  P.transpose() * dO;
            if (!q->need && !k->need) continue;
            Mat dP = dO * V.transpose();
            Mat dZ(P.rows(), P.cols());
            for (Eigen::Index r = 0; r < P.rows(); ++r) {
              double dot = dP.row(r).cwiseProduct(P.row(r)).sum();
              dZ.row(r) = P.row(r).cwiseProduct(
                  dP.row(r).array().operator-(dot).matrix());
            }
            if (q->need)
              q->grad.block(qg[i].start, h * dh, qg[i].len, dh) +=
                  sc * (dZ * K);
            if (k->need)
              k->grad.block(kg[i].start, h * dh, kg[i].len, dh) +=
                  sc * (dZ.transpose() * Q);
          }
        }
      });
}

}  // namespace jt::ad
