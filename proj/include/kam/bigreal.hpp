#pragma once

#include <mpfr.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

namespace kam {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PrecisionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Working precision for a whole computation.  Values are bound to a context
/// at creation; two contexts with different precision can coexist in one
/// process.  Binary precision carries 16 guard bits over the requested
/// decimal digits to absorb rounding in long FFT chains.
class PrecisionContext {
 public:
  explicit PrecisionContext(int decimal_digits)
      : decimal_digits_(decimal_digits),
        bits_(static_cast<mpfr_prec_t>(
                  std::ceil(decimal_digits * 3.321928094887362)) +
              16) {
    if (decimal_digits < 50)
      throw PrecisionError("precision too low: need at least 50 decimal "
                           "digits, got " +
                           std::to_string(decimal_digits));
  }

  int decimal_digits() const { return decimal_digits_; }
  mpfr_prec_t bits() const { return bits_; }

  friend bool operator==(const PrecisionContext& a, const PrecisionContext& b) {
    return a.decimal_digits_ == b.decimal_digits_;
  }

 private:
  int decimal_digits_;
  mpfr_prec_t bits_;
};

inline PrecisionContext make_context(int decimal_digits) {
  return PrecisionContext(decimal_digits);
}

/// Arbitrary-precision real scalar.  Value semantics over an mpfr_t; the
/// precision of a binary operation's result is the larger of the operands'.
class BigReal {
 public:
  explicit BigReal(const PrecisionContext& ctx) {
    mpfr_init2(v_, ctx.bits());
    mpfr_set_zero(v_, 1);
  }
  BigReal(const PrecisionContext& ctx, long i) {
    mpfr_init2(v_, ctx.bits());
    mpfr_set_si(v_, i, MPFR_RNDN);
  }
  BigReal(const PrecisionContext& ctx, double d) {
    mpfr_init2(v_, ctx.bits());
    mpfr_set_d(v_, d, MPFR_RNDN);
  }
  BigReal(const PrecisionContext& ctx, const std::string& s) {
    mpfr_init2(v_, ctx.bits());
    if (mpfr_set_str(v_, s.c_str(), 10, MPFR_RNDN) != 0)
      throw DomainError("unparseable decimal string: " + s);
  }

  BigReal(const BigReal& o) {
    mpfr_init2(v_, mpfr_get_prec(o.v_));
    mpfr_set(v_, o.v_, MPFR_RNDN);
  }
  BigReal(BigReal&& o) noexcept {
    v_[0] = o.v_[0];
    mpfr_init2(o.v_, MPFR_PREC_MIN);
  }
  BigReal& operator=(const BigReal& o) {
    if (this != &o) {
      mpfr_set_prec(v_, mpfr_get_prec(o.v_));
      mpfr_set(v_, o.v_, MPFR_RNDN);
    }
    return *this;
  }
  BigReal& operator=(BigReal&& o) noexcept {
    mpfr_swap(v_, o.v_);
    return *this;
  }
  ~BigReal() { mpfr_clear(v_); }

  mpfr_ptr raw() { return v_; }
  mpfr_srcptr raw() const { return v_; }
  mpfr_prec_t bits() const { return mpfr_get_prec(v_); }

  double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
  bool is_finite() const { return mpfr_number_p(v_) != 0; }
  int sign() const { return mpfr_sgn(v_); }

  /// Decimal string with exactly `digits` significant digits (scientific
  /// form).  parse(format(x)) == x at working precision.
  std::string to_string(int digits) const {
    char buf[64];
    int need = mpfr_snprintf(buf, sizeof buf, "%.*Re", digits - 1, v_);
    if (need < static_cast<int>(sizeof buf)) return std::string(buf);
    std::string s(static_cast<size_t>(need) + 1, '\0');
    mpfr_snprintf(s.data(), s.size(), "%.*Re", digits - 1, v_);
    s.resize(static_cast<size_t>(need));
    return s;
  }

  /// Fixed-point form with `decimals` digits after the point (table output).
  std::string to_fixed(int decimals) const {
    char buf[128];
    int need = mpfr_snprintf(buf, sizeof buf, "%.*Rf", decimals, v_);
    if (need < static_cast<int>(sizeof buf)) return std::string(buf);
    std::string s(static_cast<size_t>(need) + 1, '\0');
    mpfr_snprintf(s.data(), s.size(), "%.*Rf", decimals, v_);
    s.resize(static_cast<size_t>(need));
    return s;
  }

#define KAM_BR_BINOP(op, fn)                                   \
  friend BigReal operator op(const BigReal& a, const BigReal& b) { \
    BigReal r(nullptr_tag{}, std::max(a.bits(), b.bits()));    \
    fn(r.v_, a.v_, b.v_, MPFR_RNDN);                           \
    return r;                                                  \
  }                                                            \
  BigReal& operator op##=(const BigReal& b) {                  \
    fn(v_, v_, b.v_, MPFR_RNDN);                               \
    return *this;                                              \
  }
  KAM_BR_BINOP(+, mpfr_add)
  KAM_BR_BINOP(-, mpfr_sub)
  KAM_BR_BINOP(*, mpfr_mul)
  KAM_BR_BINOP(/, mpfr_div)
#undef KAM_BR_BINOP

  friend BigReal operator-(const BigReal& a) {
    BigReal r(nullptr_tag{}, a.bits());
    mpfr_neg(r.v_, a.v_, MPFR_RNDN);
    return r;
  }

  friend bool operator<(const BigReal& a, const BigReal& b) { return mpfr_less_p(a.v_, b.v_); }
  friend bool operator>(const BigReal& a, const BigReal& b) { return mpfr_greater_p(a.v_, b.v_); }
  friend bool operator<=(const BigReal& a, const BigReal& b) { return mpfr_lessequal_p(a.v_, b.v_); }
  friend bool operator>=(const BigReal& a, const BigReal& b) { return mpfr_greaterequal_p(a.v_, b.v_); }
  friend bool operator==(const BigReal& a, const BigReal& b) { return mpfr_equal_p(a.v_, b.v_); }
  friend bool operator!=(const BigReal& a, const BigReal& b) { return !mpfr_equal_p(a.v_, b.v_); }

  struct nullptr_tag {};
  BigReal(nullptr_tag, mpfr_prec_t bits) { mpfr_init2(v_, bits); }

 private:
  mpfr_t v_;
};

inline BigReal parse(const PrecisionContext& ctx, const std::string& s) {
  return BigReal(ctx, s);
}

inline BigReal abs(const BigReal& x) {
  BigReal r(BigReal::nullptr_tag{}, x.bits());
  mpfr_abs(r.raw(), x.raw(), MPFR_RNDN);
  return r;
}

inline BigReal max(const BigReal& a, const BigReal& b) { return a >= b ? a : b; }
inline BigReal min(const BigReal& a, const BigReal& b) { return a <= b ? a : b; }

inline BigReal sqrt(const BigReal& x) {
  if (x.sign() < 0) throw DomainError("sqrt of negative value");
  BigReal r(BigReal::nullptr_tag{}, x.bits());
  mpfr_sqrt(r.raw(), x.raw(), MPFR_RNDN);
  return r;
}

inline BigReal sin(const BigReal& x) {
  BigReal r(BigReal::nullptr_tag{}, x.bits());
  mpfr_sin(r.raw(), x.raw(), MPFR_RNDN);
  return r;
}

inline BigReal cos(const BigReal& x) {
  BigReal r(BigReal::nullptr_tag{}, x.bits());
  mpfr_cos(r.raw(), x.raw(), MPFR_RNDN);
  return r;
}

inline BigReal exp(const BigReal& x) {
  BigReal r(BigReal::nullptr_tag{}, x.bits());
  mpfr_exp(r.raw(), x.raw(), MPFR_RNDN);
  return r;
}

inline BigReal log(const BigReal& x) {
  if (x.sign() <= 0) throw DomainError("log of non-positive value");
  BigReal r(BigReal::nullptr_tag{}, x.bits());
  mpfr_log(r.raw(), x.raw(), MPFR_RNDN);
  return r;
}

inline BigReal gamma(const BigReal& x) {
  BigReal r(BigReal::nullptr_tag{}, x.bits());
  mpfr_gamma(r.raw(), x.raw(), MPFR_RNDN);
  if (!r.is_finite()) throw DomainError("gamma at a pole or out of range");
  return r;
}

enum class Elementary { sin, cos, exp, sqrt, log, gamma };

inline BigReal elementary(const BigReal& x, Elementary kind) {
  switch (kind) {
    case Elementary::sin: return sin(x);
    case Elementary::cos: return cos(x);
    case Elementary::exp: return exp(x);
    case Elementary::sqrt: return sqrt(x);
    case Elementary::log: return log(x);
    case Elementary::gamma: return gamma(x);
  }
  throw DomainError("unknown elementary kind");
}

inline BigReal pi(const PrecisionContext& ctx) {
  BigReal r(ctx);
  mpfr_const_pi(r.raw(), MPFR_RNDN);
  return r;
}

inline BigReal pow_int(const BigReal& x, long e) {
  BigReal r(BigReal::nullptr_tag{}, x.bits());
  mpfr_pow_si(r.raw(), x.raw(), e, MPFR_RNDN);
  return r;
}

inline BigReal pow(const BigReal& x, const BigReal& e) {
  BigReal r(BigReal::nullptr_tag{}, std::max(x.bits(), e.bits()));
  mpfr_pow(r.raw(), x.raw(), e.raw(), MPFR_RNDN);
  return r;
}

/// The golden mean (sqrt(5)-1)/2, the frequency used throughout.
inline BigReal golden_mean(const PrecisionContext& ctx) {
  BigReal r(ctx, 5L);
  mpfr_sqrt(r.raw(), r.raw(), MPFR_RNDN);
  mpfr_sub_ui(r.raw(), r.raw(), 1, MPFR_RNDN);
  mpfr_div_2ui(r.raw(), r.raw(), 1, MPFR_RNDN);
  return r;
}

/// Diophantine constants of the golden mean: |om k - q| >= nu |k|^-tau
/// with nu = 2/(3+sqrt(5)), tau = 1.
inline BigReal golden_nu(const PrecisionContext& ctx) {
  BigReal r(ctx, 5L);
  mpfr_sqrt(r.raw(), r.raw(), MPFR_RNDN);
  mpfr_add_ui(r.raw(), r.raw(), 3, MPFR_RNDN);
  mpfr_ui_div(r.raw(), 2, r.raw(), MPFR_RNDN);
  return r;
}

inline BigReal golden_tau(const PrecisionContext& ctx) { return BigReal(ctx, 1L); }

}  // namespace kam
