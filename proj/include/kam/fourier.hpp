#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "kam/bigcomplex.hpp"

namespace kam {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace detail {

/// Twiddle factors and bit-reversal table for one (size, precision) pair.
/// Twiddles are computed by direct sin/cos on the first quarter circle and
/// reflected, never by running products, so each entry is correctly rounded.
struct FftTables {
  std::vector<BigComplex> w;  // w[k] = e^{-2 pi i k/n}, k < n/2
  std::vector<std::size_t> rev;

  FftTables(std::size_t n, const PrecisionContext& ctx) {
    w.reserve(n / 2);
    BigReal two_pi_over_n = pi(ctx);
    mpfr_mul_2ui(two_pi_over_n.raw(), two_pi_over_n.raw(), 1, MPFR_RNDN);
    mpfr_div_ui(two_pi_over_n.raw(), two_pi_over_n.raw(), static_cast<unsigned long>(n), MPFR_RNDN);
    BigReal ang(ctx), s(ctx), c(ctx);
    std::size_t q = n >= 4 ? n / 4 : n / 2;
    for (std::size_t k = 0; k < q; ++k) {
      mpfr_mul_ui(ang.raw(), two_pi_over_n.raw(), static_cast<unsigned long>(k), MPFR_RNDN);
      mpfr_sin_cos(s.raw(), c.raw(), ang.raw(), MPFR_RNDN);
      w.emplace_back(c, -s);
    }
    for (std::size_t k = q; k < n / 2; ++k) {
      // e^{-2 pi i k/n} = -i * e^{-2 pi i (k-n/4)/n}
      const BigComplex& p = w[k - q];
      w.emplace_back(p.im, -p.re);
    }
    rev.resize(n);
    std::size_t lg = 0;
    while ((std::size_t{1} << lg) < n) ++lg;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < lg; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (lg - 1 - b);
      rev[i] = r;
    }
  }
};

inline std::shared_ptr<const FftTables> fft_tables(std::size_t n, const PrecisionContext& ctx) {
  static std::mutex mu;
  static std::map<std::pair<std::size_t, long>, std::shared_ptr<const FftTables>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(n, static_cast<long>(ctx.bits()));
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto t = std::make_shared<const FftTables>(n, ctx);
  cache.emplace(key, t);
  return t;
}

/// In-place radix-2 Cooley-Tukey.  sign = -1: forward kernel (no scaling);
/// sign = +1: inverse kernel.
inline void fft_in_place(std::vector<BigComplex>& a, const PrecisionContext& ctx, int sign) {
  const std::size_t n = a.size();
  if (!is_pow2(n)) throw DomainError("FFT size must be a power of two");
  auto tables = fft_tables(n, ctx);
  const auto& w = tables->w;
  const auto& rev = tables->rev;
  for (std::size_t i = 0; i < n; ++i)
    if (rev[i] > i) {
      mpfr_swap(a[i].re.raw(), a[rev[i]].re.raw());
      mpfr_swap(a[i].im.raw(), a[rev[i]].im.raw());
    }
  BigReal tr(ctx), ti(ctx);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len >> 1;
    const std::size_t step = n / len;
    for (std::size_t base = 0; base < n; base += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const BigComplex& tw = w[j * step];
        mpfr_srcptr wr = tw.re.raw(), wi = tw.im.raw();
        BigComplex& x = a[base + j];
        BigComplex& y = a[base + j + half];
        if (sign < 0) {
          mpfr_fmms(tr.raw(), wr, y.re.raw(), wi, y.im.raw(), MPFR_RNDN);
          mpfr_fmma(ti.raw(), wr, y.im.raw(), wi, y.re.raw(), MPFR_RNDN);
        } else {  // inverse kernel uses the conjugate twiddle
          mpfr_fmma(tr.raw(), wr, y.re.raw(), wi, y.im.raw(), MPFR_RNDN);
          mpfr_fmms(ti.raw(), wr, y.im.raw(), wi, y.re.raw(), MPFR_RNDN);
        }
        mpfr_sub(y.re.raw(), x.re.raw(), tr.raw(), MPFR_RNDN);
        mpfr_sub(y.im.raw(), x.im.raw(), ti.raw(), MPFR_RNDN);
        mpfr_add(x.re.raw(), x.re.raw(), tr.raw(), MPFR_RNDN);
        mpfr_add(x.im.raw(), x.im.raw(), ti.raw(), MPFR_RNDN);
      }
    }
  }
}

}  // namespace detail

/// Samples of a function at theta_j = j/N, j = 0..N-1.
struct GridValues {
  PrecisionContext ctx;
  std::vector<BigComplex> values;

  GridValues(const PrecisionContext& c, std::size_t n) : ctx(c), values(n, BigComplex(c)) {
    if (!is_pow2(n)) throw DomainError("grid size must be a power of two");
  }
  std::size_t n_points() const { return values.size(); }
};

/// Truncated Fourier series sum_k f_k e^{2 pi i k theta}, k in [-N/2, N/2).
/// Coefficients are stored in FFT order: index i holds k = i for i < N/2 and
/// k = i - N otherwise.
class PeriodicFunction {
 public:
  PeriodicFunction(const PrecisionContext& c, std::size_t n)
      : ctx_(c), c_(n, BigComplex(c)) {
    if (!is_pow2(n)) throw DomainError("mode count must be a power of two");
  }

  const PrecisionContext& ctx() const { return ctx_; }
  std::size_t n_modes() const { return c_.size(); }

  std::size_t index_of(long k) const {
    long n = static_cast<long>(c_.size());
    if (k < -n / 2 || k >= n / 2) throw DomainError("mode index out of range");
    return static_cast<std::size_t>(k >= 0 ? k : k + n);
  }
  const BigComplex& coeff(long k) const { return c_[index_of(k)]; }
  BigComplex& coeff(long k) { return c_[index_of(k)]; }

  std::vector<BigComplex>& data() { return c_; }
  const std::vector<BigComplex>& data() const { return c_; }

  /// k value held at storage index i.
  long k_at(std::size_t i) const {
    long n = static_cast<long>(c_.size());
    long k = static_cast<long>(i);
    return k < n / 2 ? k : k - n;
  }

 private:
  PrecisionContext ctx_;
  std::vector<BigComplex> c_;
};

inline PeriodicFunction fft_forward(const GridValues& g) {
  PeriodicFunction f(g.ctx, g.n_points());
  f.data() = g.values;
  detail::fft_in_place(f.data(), g.ctx, -1);
  for (auto& z : f.data()) {
    mpfr_div_2ui(z.re.raw(), z.re.raw(), static_cast<unsigned long>(__builtin_ctzll(g.n_points())), MPFR_RNDN);
    mpfr_div_2ui(z.im.raw(), z.im.raw(), static_cast<unsigned long>(__builtin_ctzll(g.n_points())), MPFR_RNDN);
  }
  return f;
}

inline GridValues fft_inverse(const PeriodicFunction& f) {
  GridValues g(f.ctx(), f.n_modes());
  g.values = f.data();
  detail::fft_in_place(g.values, f.ctx(), +1);
  return g;
}

/// Zero-pad to m >= n modes (same function, finer grid).
inline PeriodicFunction pad_to(const PeriodicFunction& f, std::size_t m) {
  const std::size_t n = f.n_modes();
  if (m < n) throw DomainError("pad_to target smaller than source");
  PeriodicFunction out(f.ctx(), m);
  for (std::size_t i = 0; i < n; ++i) out.coeff(f.k_at(i)) = f.data()[i];
  return out;
}

/// Keep modes with |k| <= n/2; the Nyquist slot k = -n/2 receives the source
/// coefficient at that k when present.
inline PeriodicFunction truncate_to(const PeriodicFunction& f, std::size_t n) {
  if (n > f.n_modes()) throw DomainError("truncate_to target larger than source");
  PeriodicFunction out(f.ctx(), n);
  long h = static_cast<long>(n) / 2;
  for (long k = -h; k < h; ++k) out.coeff(k) = f.coeff(k);
  return out;
}

inline PeriodicFunction derivative(const PeriodicFunction& f) {
  PeriodicFunction out(f.ctx(), f.n_modes());
  BigReal two_pi = pi(f.ctx());
  mpfr_mul_2ui(two_pi.raw(), two_pi.raw(), 1, MPFR_RNDN);
  BigReal fac(f.ctx());
  for (std::size_t i = 0; i < out.n_modes(); ++i) {
    long k = out.k_at(i);
    if (k == -static_cast<long>(f.n_modes()) / 2) continue;  // Nyquist zeroed
    mpfr_mul_si(fac.raw(), two_pi.raw(), k, MPFR_RNDN);
    // (re,im) * (2 pi i k) = (-im*fac, re*fac)
    mpfr_mul(out.data()[i].re.raw(), f.data()[i].im.raw(), fac.raw(), MPFR_RNDN);
    mpfr_neg(out.data()[i].re.raw(), out.data()[i].re.raw(), MPFR_RNDN);
    mpfr_mul(out.data()[i].im.raw(), f.data()[i].re.raw(), fac.raw(), MPFR_RNDN);
  }
  return out;
}

/// Zero-average antiderivative: coefficients divided by 2 pi i k, k=0 -> 0.
inline PeriodicFunction antiderivative(const PeriodicFunction& f) {
  PeriodicFunction out(f.ctx(), f.n_modes());
  BigReal two_pi = pi(f.ctx());
  mpfr_mul_2ui(two_pi.raw(), two_pi.raw(), 1, MPFR_RNDN);
  BigReal fac(f.ctx());
  for (std::size_t i = 0; i < out.n_modes(); ++i) {
    long k = out.k_at(i);
    if (k == 0 || k == -static_cast<long>(f.n_modes()) / 2) continue;
    mpfr_mul_si(fac.raw(), two_pi.raw(), k, MPFR_RNDN);
    mpfr_div(out.data()[i].re.raw(), f.data()[i].im.raw(), fac.raw(), MPFR_RNDN);
    mpfr_div(out.data()[i].im.raw(), f.data()[i].re.raw(), fac.raw(), MPFR_RNDN);
    mpfr_neg(out.data()[i].im.raw(), out.data()[i].im.raw(), MPFR_RNDN);
  }
  return out;
}

namespace detail {

/// e^{2 pi i k om} for all k in [-n/2, n/2), via binary powers of
/// e^{2 pi i 2^j om} so per-entry rounding stays at O(log n) ulps.
inline std::vector<BigComplex> shift_multipliers(const PrecisionContext& ctx,
                                                 std::size_t n, const BigReal& om) {
  BigReal two_pi = pi(ctx);
  mpfr_mul_2ui(two_pi.raw(), two_pi.raw(), 1, MPFR_RNDN);
  std::size_t lg = 0;
  while ((std::size_t{1} << lg) < n) ++lg;
  std::vector<BigComplex> pow2(lg + 1, BigComplex(ctx));   // e^{2 pi i 2^j om}
  std::vector<BigComplex> pow2c(lg + 1, BigComplex(ctx));  // conjugates
  BigReal frac(ctx), ang(ctx);
  for (std::size_t j = 0; j <= lg; ++j) {
    // reduce 2^j om mod 1 before multiplying by 2 pi
    mpfr_mul_2ui(frac.raw(), om.raw(), static_cast<unsigned long>(j), MPFR_RNDN);
    mpfr_frac(frac.raw(), frac.raw(), MPFR_RNDN);
    mpfr_mul(ang.raw(), frac.raw(), two_pi.raw(), MPFR_RNDN);
    mpfr_sin_cos(pow2[j].im.raw(), pow2[j].re.raw(), ang.raw(), MPFR_RNDN);
    pow2c[j] = pow2[j].conj();
  }
  std::vector<BigComplex> out(n, BigComplex(ctx));
  BigReal one(ctx, 1L);
  for (std::size_t i = 0; i < n; ++i) {
    long k = static_cast<long>(i) < static_cast<long>(n) / 2
                 ? static_cast<long>(i)
                 : static_cast<long>(i) - static_cast<long>(n);
    unsigned long a = static_cast<unsigned long>(k >= 0 ? k : -k);
    const auto& table = k >= 0 ? pow2 : pow2c;
    BigComplex acc(ctx);
    mpfr_set(acc.re.raw(), one.raw(), MPFR_RNDN);
    bool started = false;
    for (std::size_t j = 0; a != 0; ++j, a >>= 1)
      if (a & 1) {
        if (!started) {
          acc = table[j];
          started = true;
        } else {
          acc = acc * table[j];
        }
      }
    out[i] = acc;
  }
  return out;
}

}  // namespace detail

/// f(theta + om): coefficients multiplied by e^{2 pi i k om}.
inline PeriodicFunction shift(const PeriodicFunction& f, const BigReal& om) {
  auto mult = detail::shift_multipliers(f.ctx(), f.n_modes(), om);
  PeriodicFunction out(f.ctx(), f.n_modes());
  for (std::size_t i = 0; i < f.n_modes(); ++i) out.data()[i] = f.data()[i] * mult[i];
  return out;
}

inline BigReal average(const PeriodicFunction& f) { return f.coeff(0).re; }

inline PeriodicFunction zero_average(const PeriodicFunction& f) {
  PeriodicFunction out = f;
  out.coeff(0).set_zero();
  return out;
}

struct NormEstimate {
  BigReal value;
  BigReal tail_fraction;   // contribution of the last decade of modes
  bool under_resolved;
};

/// Weighted l1 bound sum_k |f_k| e^{2 pi rho |k|} on the sup over the strip
/// of half-width rho.  The tail diagnostic flags when the top 10% of mode
/// indices carry more than tail_threshold of the total.
inline NormEstimate analytic_norm_ex(const PeriodicFunction& f, const BigReal& rho,
                                     double tail_threshold = 1e-20) {
  const PrecisionContext& ctx = f.ctx();
  if (rho.sign() < 0) throw DomainError("analytic_norm: rho must be >= 0");
  const long h = static_cast<long>(f.n_modes()) / 2;
  BigReal total(ctx), tail(ctx), m(ctx), w(ctx, 1L), gr(ctx), term(ctx);
  bool weighted = rho.sign() > 0;
  if (weighted) {
    // growth per unit k: e^{2 pi rho}
    gr = pi(ctx);
    mpfr_mul_2ui(gr.raw(), gr.raw(), 1, MPFR_RNDN);
    gr = exp(gr * rho);
  }
  const long tail_start = h - (h / 10 > 0 ? h / 10 : 1);
  for (long k = 0; k <= h; ++k) {
    bool have_pos = k < h, have_neg = k > 0;
    if (!have_pos && !have_neg) break;
    mpfr_set_zero(m.raw(), 1);
    if (have_pos && k > 0) m = f.coeff(k).modulus();
    else if (k == 0) m = f.coeff(0).modulus();
    if (have_neg) m += f.coeff(-k).modulus();
    if (weighted && k > 0) mpfr_mul(w.raw(), w.raw(), gr.raw(), MPFR_RNDN);
    if (weighted) mpfr_mul(term.raw(), m.raw(), w.raw(), MPFR_RNDN);
    else mpfr_set(term.raw(), m.raw(), MPFR_RNDN);
    total += term;
    if (k >= tail_start) tail += term;
  }
  NormEstimate est{total, BigReal(ctx), false};
  if (total.sign() > 0) {
    est.tail_fraction = tail / total;
    est.under_resolved = est.tail_fraction > BigReal(ctx, tail_threshold);
  }
  return est;
}

inline BigReal analytic_norm(const PeriodicFunction& f, const BigReal& rho) {
  return analytic_norm_ex(f, rho).value;
}

inline BigReal analytic_norm(const PeriodicFunction& f) {
  return analytic_norm_ex(f, BigReal(f.ctx())).value;
}

inline PeriodicFunction add(const PeriodicFunction& a, const PeriodicFunction& b) {
  if (a.n_modes() != b.n_modes()) throw DomainError("mode count mismatch");
  PeriodicFunction out(a.ctx(), a.n_modes());
  for (std::size_t i = 0; i < a.n_modes(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

inline PeriodicFunction sub(const PeriodicFunction& a, const PeriodicFunction& b) {
  if (a.n_modes() != b.n_modes()) throw DomainError("mode count mismatch");
  PeriodicFunction out(a.ctx(), a.n_modes());
  for (std::size_t i = 0; i < a.n_modes(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return out;
}

inline PeriodicFunction scale(const PeriodicFunction& a, const BigReal& s) {
  PeriodicFunction out(a.ctx(), a.n_modes());
  for (std::size_t i = 0; i < a.n_modes(); ++i) out.data()[i] = s * a.data()[i];
  return out;
}

/// Pointwise product, dealiased on a 2N zero-padded grid, truncated back to
/// N modes with the Nyquist mode zeroed.
inline PeriodicFunction multiply(const PeriodicFunction& a, const PeriodicFunction& b) {
  if (a.n_modes() != b.n_modes()) throw DomainError("mode count mismatch");
  const std::size_t n = a.n_modes();
  GridValues ga = fft_inverse(pad_to(a, 2 * n));
  GridValues gb = fft_inverse(pad_to(b, 2 * n));
  for (std::size_t j = 0; j < 2 * n; ++j) ga.values[j] = ga.values[j] * gb.values[j];
  PeriodicFunction out = truncate_to(fft_forward(ga), n);
  out.coeff(-static_cast<long>(n) / 2).set_zero();
  return out;
}

/// Force exact Hermitian symmetry (real-valued function): used by the solver
/// after every update so conjugate-pair drift cannot accumulate.
inline void symmetrize_real(PeriodicFunction& f) {
  const long h = static_cast<long>(f.n_modes()) / 2;
  mpfr_set_zero(f.coeff(0).im.raw(), 1);
  mpfr_set_zero(f.coeff(-h).im.raw(), 1);
  BigReal t(f.ctx());
  for (long k = 1; k < h; ++k) {
    BigComplex& p = f.coeff(k);
    BigComplex& q = f.coeff(-k);
    mpfr_add(t.raw(), p.re.raw(), q.re.raw(), MPFR_RNDN);
    mpfr_div_2ui(t.raw(), t.raw(), 1, MPFR_RNDN);
    mpfr_set(p.re.raw(), t.raw(), MPFR_RNDN);
    mpfr_set(q.re.raw(), t.raw(), MPFR_RNDN);
    mpfr_sub(t.raw(), p.im.raw(), q.im.raw(), MPFR_RNDN);
    mpfr_div_2ui(t.raw(), t.raw(), 1, MPFR_RNDN);
    mpfr_set(p.im.raw(), t.raw(), MPFR_RNDN);
    mpfr_neg(t.raw(), t.raw(), MPFR_RNDN);
    mpfr_set(q.im.raw(), t.raw(), MPFR_RNDN);
  }
}

}  // namespace kam
