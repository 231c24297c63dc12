// Thin RAII wrapper over MPFR for the few arbitrary-precision evaluations
// the click model needs. Not a general-purpose number type.
#pragma once

#include <gmp.h>
#include <mpfr.h>

#include <utility>

namespace clickstat::detail {

class MpFloat {
public:
  explicit MpFloat(mpfr_prec_t prec) { mpfr_init2(v_, prec); mpfr_set_zero(v_, 1); }
  MpFloat(const MpFloat& o) { mpfr_init2(v_, mpfr_get_prec(o.v_)); mpfr_set(v_, o.v_, MPFR_RNDN); }
  MpFloat(MpFloat&& o) noexcept { mpfr_init2(v_, mpfr_get_prec(o.v_)); mpfr_swap(v_, o.v_); }
  MpFloat& operator=(const MpFloat& o) {
    if (this != &o) mpfr_set(v_, o.v_, MPFR_RNDN);
    return *this;
  }
  MpFloat& operator=(MpFloat&& o) noexcept {
    if (this != &o) mpfr_swap(v_, o.v_);
    return *this;
  }
  ~MpFloat() { mpfr_clear(v_); }

  mpfr_prec_t prec() const { return mpfr_get_prec(v_); }

  static MpFloat from_double(double x, mpfr_prec_t prec) {
    MpFloat r(prec);
    mpfr_set_d(r.v_, x, MPFR_RNDN);
    return r;
  }
  static MpFloat from_ui(unsigned long x, mpfr_prec_t prec) {
    MpFloat r(prec);
    mpfr_set_ui(r.v_, x, MPFR_RNDN);
    return r;
  }
  /// Exact binomial coefficient via GMP integers.
  static MpFloat binomial(unsigned long n, unsigned long k, mpfr_prec_t prec) {
    mpz_t z;
    mpz_init(z);
    mpz_bin_uiui(z, n, k);
    MpFloat r(prec);
    mpfr_set_z(r.v_, z, MPFR_RNDN);
    mpz_clear(z);
    return r;
  }

  MpFloat& operator+=(const MpFloat& o) { mpfr_add(v_, v_, o.v_, MPFR_RNDN); return *this; }
  MpFloat& operator-=(const MpFloat& o) { mpfr_sub(v_, v_, o.v_, MPFR_RNDN); return *this; }
  MpFloat& operator*=(const MpFloat& o) { mpfr_mul(v_, v_, o.v_, MPFR_RNDN); return *this; }
  MpFloat& operator/=(const MpFloat& o) { mpfr_div(v_, v_, o.v_, MPFR_RNDN); return *this; }

  friend MpFloat operator+(MpFloat a, const MpFloat& b) { a += b; return a; }
  friend MpFloat operator-(MpFloat a, const MpFloat& b) { a -= b; return a; }
  friend MpFloat operator*(MpFloat a, const MpFloat& b) { a *= b; return a; }
  friend MpFloat operator/(MpFloat a, const MpFloat& b) { a /= b; return a; }

  MpFloat pow_ui(unsigned long e) const {
    MpFloat r(prec());
    mpfr_pow_ui(r.v_, v_, e, MPFR_RNDN);
    return r;
  }
  MpFloat exp() const {
    MpFloat r(prec());
    mpfr_exp(r.v_, v_, MPFR_RNDN);
    return r;
  }
  MpFloat neg() const {
    MpFloat r(*this);
    mpfr_neg(r.v_, r.v_, MPFR_RNDN);
    return r;
  }
  MpFloat recip() const {
    MpFloat r(prec());
    mpfr_ui_div(r.v_, 1, v_, MPFR_RNDN);
    return r;
  }

  double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }

private:
  mpfr_t v_;
};

} // namespace clickstat::detail
