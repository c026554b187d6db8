#pragma once

#include "ranlin/common.hpp"
#include "ranlin/driving.hpp"
#include "ranlin/system.hpp"

namespace ranlin {

// A sequence of maps indexed along a fixed orbit: index n holds the map
// carrying time n to time n+1.  The linear part must be block diagonal with
// respect to the block structure the solvers are given.
class MapCocycle {
 public:
  virtual ~MapCocycle() = default;
  virtual int dim() const = 0;
  virtual Mat linear(long n) const = 0;
  virtual Vec eval(long n, const Vec& x) const = 0;
  virtual Mat jac(long n, const Vec& x) const = 0;
  virtual Vec invert(long n, const Vec& x) const = 0;

  Vec nonlinear(long n, const Vec& x) const { return eval(n, x) - linear(n) * x; }
  Mat nonlinear_jac(long n, const Vec& x) const { return jac(n, x) - linear(n); }
};

// The (extended) random map along a driving orbit.
class SystemCocycle : public MapCocycle {
 public:
  SystemCocycle(const RandomMapSystem& sys, OmegaOrbit orb)
      : sys_(&sys), orb_(std::move(orb)) {}

  int dim() const override { return sys_->d; }
  Mat linear(long n) const override { return sys_->lambda(orb_.state(n)); }
  Vec eval(long n, const Vec& x) const override {
    return sys_->evaluate(orb_.state(n), x);
  }
  Mat jac(long n, const Vec& x) const override {
    return sys_->jacobian(orb_.state(n), x);
  }
  Vec invert(long n, const Vec& x) const override {
    return sys_->invert(orb_.state(n), x);
  }

  const RandomMapSystem& system() const { return *sys_; }
  const OmegaOrbit& orbit() const { return orb_; }

 private:
  const RandomMapSystem* sys_;
  OmegaOrbit orb_;
};

// The same cocycle seen from a later (or earlier) point of the orbit.
class ShiftedCocycle : public MapCocycle {
 public:
  ShiftedCocycle(const MapCocycle& inner, long shift)
      : inner_(&inner), shift_(shift) {}

  int dim() const override { return inner_->dim(); }
  Mat linear(long n) const override { return inner_->linear(n + shift_); }
  Vec eval(long n, const Vec& x) const override { return inner_->eval(n + shift_, x); }
  Mat jac(long n, const Vec& x) const override { return inner_->jac(n + shift_, x); }
  Vec invert(long n, const Vec& x) const override { return inner_->invert(n + shift_, x); }

 private:
  const MapCocycle* inner_;
  long shift_;
};

}  // namespace ranlin

