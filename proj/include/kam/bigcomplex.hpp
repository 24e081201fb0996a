#pragma once

#include "kam/bigreal.hpp"

namespace kam {

/// Complex scalar over two BigReals.  Hot loops (FFT butterflies, grid
/// passes) go through raw mpfr pointers instead of these operators.
struct BigComplex {
  BigReal re, im;

  explicit BigComplex(const PrecisionContext& ctx) : re(ctx), im(ctx) {}
  BigComplex(BigReal r, BigReal i) : re(std::move(r)), im(std::move(i)) {}

  void set_zero() {
    mpfr_set_zero(re.raw(), 1);
    mpfr_set_zero(im.raw(), 1);
  }

  friend BigComplex operator+(const BigComplex& a, const BigComplex& b) {
    return {a.re + b.re, a.im + b.im};
  }
  friend BigComplex operator-(const BigComplex& a, const BigComplex& b) {
    return {a.re - b.re, a.im - b.im};
  }
  friend BigComplex operator*(const BigComplex& a, const BigComplex& b) {
    BigReal r(BigReal::nullptr_tag{}, std::max(a.re.bits(), b.re.bits()));
    BigReal i(BigReal::nullptr_tag{}, std::max(a.re.bits(), b.re.bits()));
    mpfr_fmms(r.raw(), a.re.raw(), b.re.raw(), a.im.raw(), b.im.raw(), MPFR_RNDN);
    mpfr_fmma(i.raw(), a.re.raw(), b.im.raw(), a.im.raw(), b.re.raw(), MPFR_RNDN);
    return {std::move(r), std::move(i)};
  }
  friend BigComplex operator*(const BigReal& s, const BigComplex& z) {
    return {s * z.re, s * z.im};
  }

  BigComplex conj() const { return {re, -im}; }

  BigReal modulus() const {
    BigReal r(BigReal::nullptr_tag{}, re.bits());
    mpfr_hypot(r.raw(), re.raw(), im.raw(), MPFR_RNDN);
    return r;
  }

  /// Argument in (-pi, pi].
  BigReal argument() const {
    BigReal r(BigReal::nullptr_tag{}, re.bits());
    mpfr_atan2(r.raw(), im.raw(), re.raw(), MPFR_RNDN);
    return r;
  }
};

/// a/b by the standard real formula; no scaling tricks, fine at our ranges.
inline BigComplex div(const BigComplex& a, const BigComplex& b) {
  BigReal d(BigReal::nullptr_tag{}, b.re.bits());
  mpfr_fmma(d.raw(), b.re.raw(), b.re.raw(), b.im.raw(), b.im.raw(), MPFR_RNDN);
  BigReal r(BigReal::nullptr_tag{}, a.re.bits());
  BigReal i(BigReal::nullptr_tag{}, a.re.bits());
  mpfr_fmma(r.raw(), a.re.raw(), b.re.raw(), a.im.raw(), b.im.raw(), MPFR_RNDN);
  mpfr_fmms(i.raw(), a.im.raw(), b.re.raw(), a.re.raw(), b.im.raw(), MPFR_RNDN);
  mpfr_div(r.raw(), r.raw(), d.raw(), MPFR_RNDN);
  mpfr_div(i.raw(), i.raw(), d.raw(), MPFR_RNDN);
  return {std::move(r), std::move(i)};
}

}  // namespace kam
