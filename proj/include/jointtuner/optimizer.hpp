// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Optimizers over Param sets. State is keyed per parameter; updates are
// elementwise, so iteration order never affects results.

#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointtuner/autodiff.hpp"

namespace jt::ad {

class Adam {
 public:
  explicit Adam(double lr, double b1 = 0.9, double b2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), b1_(b1), b2_(b2), eps_(eps) {}

  void step(const std::vector<Param*>& params) {
    ++t_;
    double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (Param* p : params) {
      if (p->g.size() == 0) p->zero_grad();
      auto& [m, v] = state_[p];
      if (m.size() == 0) {
        m = Mat::Zero(p->w.rows(), p->w.cols());
        v = Mat::Zero(p->w.rows(), p->w.cols());
      }
      m = b1_ * m + (1.0 - b1_) * p->g;
      v = b2_ * v + (1.0 - b2_) * p->g.cwiseProduct(p->g);
      Mat mhat = m / c1, vhat = v / c2;
      p->w -= lr_ * mhat.cwiseQuotient(
                        vhat.cwiseSqrt() +
                        Mat::Constant(vhat.rows(), vhat.cols(), eps_));
    }
  }

  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::map<Param*, std::pair<Mat, Mat>> state_;
};

class SgdMomentum {
 public:
  explicit SgdMomentum(double lr, double momentum = 0.9)
      : lr_(lr), mu_(momentum) {}

  void step(const std::vector<Param*>& params) {
    for (Param* p : params) {
      if (p->g.size() == 0) p->zero_grad();
      Mat& vel = state_[p];
      if (vel.size() == 0) vel = Mat::Zero(p->w.rows(), p->w.cols());
      vel = mu_ * vel + p->g;
      p->w -= lr_ * vel;
    }
  }

  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, mu_;
  std::map<Param*, Mat> state_;
};

// Uniform handle so training code can hold either.
class Optimizer {
 public:
  Optimizer(const std::string& kind, double lr) {
    if (kind == "adam") adam_ = std::make_unique<Adam>(lr);
    else if (kind == "sgdm") sgd_ = std::make_unique<SgdMomentum>(lr);
    else throw std::runtime_error("unknown optimizer: " + kind);
  }
  void step(const std::vector<Param*>& params) {
    if (adam_) adam_->step(params);
    else sgd_->step(params);
  }

 private:
  std::unique_ptr<Adam> adam_;
  std::unique_ptr<SgdMomentum> sgd_;
};

}  // namespace jt::ad
