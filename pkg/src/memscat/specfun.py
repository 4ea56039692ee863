"""Cylinder Bessel functions with an extended exponent range, plus two
hypergeometric helpers used by the truncation-bound series.

Why not scipy.special: the multipole blocks need J_m and H_m^(1) up to order
200 at arguments as small as k*a ~ 1e-3, where J underflows (J_200(0.3) ~
1e-540) and Y overflows (~1e+537) in IEEE doubles long before the *ratios*
that actually enter the system matrices are formed.  Every sequence here is
therefore carried as a (mantissa, exponent-of-2) pair, value = mant * 2**exp,
and callers combine exponents before converting to plain floats.

Method notes
------------
* J_m: Miller's downward recurrence normalized with the even-order sum rule
  J_0(x) + 2*sum_k J_2k(x) = 1 (Abramowitz & Stegun 9.1.46).  The start order
  sits well past the turning point so contamination by the dominant solution
  is below 1e-16 relative.
* Y_0, Y_1: ascending series (A&S 9.1.13) in 80-bit arithmetic for x <= 17,
  Hankel's asymptotic expansion (A&S 9.2.5-9.2.10) beyond.  The crossover is
  chosen so both branches stay under ~5e-13 relative error.
* Y_m: upward recurrence from the anchors; stable, since Y is the dominant
  solution in the growing direction.
* H_m^(1) = J_m + i Y_m, combined in scaled space per order.

Supported envelope: 0 <= order <= 200, 0 < x <= 1000 (J alone also allows
x = 0).  Outside it, CapabilityError.  Plain-float accessors raise
OverflowError when a value exceeds the double range; underflow returns 0.0.
"""

from __future__ import annotations

import numpy as np

from .errors import CapabilityError

ORDER_CAP = 200
ARG_CAP = 1000.0

# Exponent housekeeping: mantissas are renormalized whenever they leave
# [2^-600, 2^600] during recurrences, and frexp'd to [0.5, 1) at the end.
_RESCALE_THRESHOLD = 2.0 ** 600
_RESCALE_SHIFT = 600

_LD = np.longdouble
_PI_LD = np.longdouble("3.14159265358979323846264338327950288")
_GAMMA_LD = np.longdouble("0.57721566490153286060651209008240243")
_SERIES_CROSSOVER = 17.0
_ASYM_TERMS = 30


def _check_order(m_max: int) -> int:
    m_max = int(m_max)
    if m_max < 0:
        raise ValueError(f"order must be >= 0, got {m_max}")
    if m_max > ORDER_CAP:
        raise CapabilityError(f"order {m_max} exceeds cap {ORDER_CAP}")
    return m_max


def _check_arg(x: np.ndarray, positive: bool) -> None:
    if np.any(~np.isfinite(x)):
        raise ValueError("argument must be finite")
    if positive and np.any(x <= 0.0):
        raise ValueError("argument must be > 0 for Y and H sequences")
    if np.any(x < 0.0):
        raise ValueError("argument must be >= 0")
    if np.any(x > ARG_CAP):
        raise CapabilityError(f"argument exceeds cap {ARG_CAP}")


def _renormalize(mant: np.ndarray, exp2: np.ndarray):
    """Bring mantissas to frexp form (magnitude in [0.5,1)); zeros keep exp 0."""
    if np.iscomplexobj(mant):
        _, e = np.frexp(np.abs(mant))
        e = e.astype(np.int64)
        ne = (-e).astype(np.int32)
        frac = np.ldexp(mant.real, ne) + 1j * np.ldexp(mant.imag, ne)
        out_exp = np.asarray(exp2, dtype=np.int64) + e
        out_exp = np.where(frac == 0.0, 0, out_exp)
        return frac, out_exp
    frac, e = np.frexp(mant)
    out_exp = np.asarray(exp2, dtype=np.int64) + e.astype(np.int64)
    out_exp = np.where(frac == 0.0, 0, out_exp)
    return frac, out_exp


def scaled_to_float(mant, exp2):
    """Convert (mantissa, exponent-of-2) pairs to plain floats.

    Underflow flushes to zero; overflow raises OverflowError since a silent
    inf would poison every downstream product.
    """
    scalar = np.isscalar(mant) or np.ndim(mant) == 0
    m, e = _renormalize(np.atleast_1d(np.asarray(mant)),
                        np.atleast_1d(np.asarray(exp2, dtype=np.int64)))
    if np.any((e > 1024) & (m != 0.0)):
        raise OverflowError("scaled value exceeds double-precision range")
    safe = np.clip(e, -1500, 1024).astype(np.int32)
    if np.iscomplexobj(m):
        out = np.ldexp(m.real, safe) + 1j * np.ldexp(m.imag, safe)
    else:
        out = np.ldexp(m, safe)
    return out[0] if scalar else out


def scaled_log_abs(mant: np.ndarray, exp2: np.ndarray):
    """Natural log of |value| for scaled pairs; -inf where the mantissa is 0."""
    mant = np.asarray(mant, dtype=np.complex128 if np.iscomplexobj(mant) else np.float64)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(mant)) + np.asarray(exp2, dtype=np.float64) * np.log(2.0)


# ---------------------------------------------------------------------------
# anchors: J_0, J_1, Y_0, Y_1
# ---------------------------------------------------------------------------

def _jy01_series(x: np.ndarray):
    """Ascending-series anchors in longdouble; valid for small/moderate x."""
    xl = x.astype(_LD)
    q = 0.25 * xl * xl
    lg = np.log(0.5 * xl) + _GAMMA_LD

    j0 = np.ones_like(xl)
    sh0 = np.zeros_like(xl)             # sum_k>=1 H_k (-q)^k / (k!)^2
    j1s = np.ones_like(xl)              # sum_k (-q)^k / (k! (k+1)!)
    sh1 = np.ones_like(xl)              # sum_k (H_k + H_{k+1}) (-q)^k / (k! (k+1)!)
    t0 = np.ones_like(xl)
    t1 = np.ones_like(xl)
    hk = _LD(0.0)
    for k in range(1, 200):
        kl = _LD(k)
        t0 *= -q / (kl * kl)
        t1 *= -q / (kl * (kl + 1))
        hk += 1 / kl
        j0 += t0
        sh0 += hk * t0
        j1s += t1
        sh1 += (hk + hk + 1 / (kl + 1)) * t1
        if np.max(np.abs(t0)) < 1e-26 and np.max(np.abs(t1)) < 1e-26:
            break
    two_over_pi = _LD(2.0) / _PI_LD
    j1 = 0.5 * xl * j1s
    y0 = two_over_pi * (lg * j0 - sh0)
    y1 = two_over_pi * (lg * j1 - 1.0 / xl) - (xl / (2.0 * _PI_LD)) * sh1
    return (j0.astype(np.float64), j1.astype(np.float64),
            y0.astype(np.float64), y1.astype(np.float64))


def _jy01_asymptotic(x: np.ndarray):
    """Hankel asymptotic-expansion anchors; truncation error ~ e^{-2x} at x=17."""
    out = []
    # argument reduction in longdouble keeps the oscillatory phase accurate
    xl = x.astype(_LD)
    for nu in (0, 1):
        phase = np.mod(xl - (0.5 * nu + 0.25) * _PI_LD,
                       2.0 * _PI_LD).astype(np.float64)
        s = np.zeros(x.shape, dtype=np.complex128)
        term = np.ones(x.shape, dtype=np.complex128)
        s += term
        for k in range(1, _ASYM_TERMS + 1):
            term = term * (4.0 * nu * nu - (2.0 * k - 1.0) ** 2) / (8.0 * k) * (1j / x)
            s += term
        h = np.sqrt(2.0 / (np.pi * x)) * np.exp(1j * phase) * s
        out.append(h)
    h0, h1 = out
    return (h0.real, h1.real, h0.imag, h1.imag)


def _jy01(x: np.ndarray):
    """Anchor values (J_0, J_1, Y_0, Y_1) for an array of positive arguments."""
    j0 = np.empty_like(x)
    j1 = np.empty_like(x)
    y0 = np.empty_like(x)
    y1 = np.empty_like(x)
    lo = x <= _SERIES_CROSSOVER
    if np.any(lo):
        j0[lo], j1[lo], y0[lo], y1[lo] = _jy01_series(x[lo])
    hi = ~lo
    if np.any(hi):
        j0[hi], j1[hi], y0[hi], y1[hi] = _jy01_asymptotic(x[hi])
    return j0, j1, y0, y1


# ---------------------------------------------------------------------------
# scaled sequences over a batch of arguments
# ---------------------------------------------------------------------------

def _miller_start(m_max: int, x_max: float) -> int:
    base = max(m_max, int(np.ceil(x_max)))
    return base + 20 + int(np.ceil(np.sqrt(40.0 * max(m_max, x_max, 1.0))))


def bessel_j_grid_scaled(m_max: int, x):
    """J_m(x_i) for m = 0..m_max over a batch of points, in scaled form.

    Returns (mant, exp2) arrays of shape (m_max+1, len(x)).
    """
    m_max = _check_order(m_max)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    _check_arg(x, positive=False)
    n = x.size
    mant = np.zeros((m_max + 1, n))
    exp2 = np.zeros((m_max + 1, n), dtype=np.int64)

    zero = x == 0.0
    if np.all(zero):
        mant[0, :] = 1.0
        return mant, exp2
    xs = x[~zero]
    start = _miller_start(m_max, float(np.max(xs)))

    fp = np.zeros(xs.size)            # unnormalized f_{m+2}
    fc = np.ones(xs.size)             # unnormalized f_{m+1}
    shift = np.zeros(xs.size, dtype=np.int64)
    store_m = np.zeros((m_max + 1, xs.size))
    store_e = np.zeros((m_max + 1, xs.size), dtype=np.int64)
    # even-order accumulator for the normalization sum, kept in scaled form
    acc = np.zeros(xs.size)
    acc_e = np.zeros(xs.size, dtype=np.int64)
    if start % 2 == 0:
        acc[:] = 2.0 * fc

    inv_x = 1.0 / xs
    for m in range(start - 1, -1, -1):
        fn = (2.0 * (m + 1)) * inv_x * fc - fp
        big = np.abs(fn) > _RESCALE_THRESHOLD
        if np.any(big):
            fn[big] = np.ldexp(fn[big], -_RESCALE_SHIFT)
            fc[big] = np.ldexp(fc[big], -_RESCALE_SHIFT)
            acc[big] = np.ldexp(acc[big], -_RESCALE_SHIFT)
            shift[big] += _RESCALE_SHIFT
        if m == 0:
            acc += fn
        elif m % 2 == 0:
            acc += 2.0 * fn
        if m <= m_max:
            store_m[m] = fn
            store_e[m] = shift
        fp, fc = fc, fn

    # J_m = f_m / lambda with lambda = f_0 + 2 sum f_even.  acc holds lambda
    # under the final shift; each stored row remembers the shift it saw, so
    # the true exponent is the difference.  |store_m| <= 2^600 and |acc| >= O(1)
    # after any rescale, so the division itself cannot overflow.
    out_m = store_m / acc
    out_e = store_e - shift
    om, oe = _renormalize(out_m, out_e)
    mant[:, ~zero] = om
    exp2[:, ~zero] = oe
    if np.any(zero):
        mant[0, zero] = 1.0
    return mant, exp2


def bessel_y_grid_scaled(m_max: int, x):
    """Y_m(x_i) for m = 0..m_max over a batch of points, in scaled form."""
    m_max = _check_order(m_max)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    _check_arg(x, positive=True)
    n = x.size
    j0, j1, y0, y1 = _jy01(x)
    del j0, j1
    mant = np.zeros((m_max + 1, n))
    exp2 = np.zeros((m_max + 1, n), dtype=np.int64)
    mant[0] = y0
    if m_max >= 1:
        mant[1] = y1
    if m_max >= 2:
        ya = y0.copy()
        yb = y1.copy()
        shift = np.zeros(n, dtype=np.int64)
        inv_x = 1.0 / x
        for m in range(1, m_max):
            yn = (2.0 * m) * inv_x * yb - ya
            big = np.abs(yn) > _RESCALE_THRESHOLD
            if np.any(big):
                yn[big] = np.ldexp(yn[big], -_RESCALE_SHIFT)
                yb[big] = np.ldexp(yb[big], -_RESCALE_SHIFT)
                shift[big] += _RESCALE_SHIFT
            mant[m + 1] = yn
            exp2[m + 1] = shift
            ya, yb = yb, yn
    return _renormalize(mant, exp2)


def hankel1_grid_scaled(m_max: int, x):
    """H_m^(1)(x_i) = J_m + i Y_m, combined order-by-order in scaled form."""
    jm, je = bessel_j_grid_scaled(m_max, x)
    # J path allows x = 0; H does not, so validate through the Y path
    ym, ye = bessel_y_grid_scaled(m_max, x)
    e = np.maximum(je, ye)
    mant = np.ldexp(jm, np.clip(je - e, -1500, 0).astype(np.int32)) \
        + 1j * np.ldexp(ym, np.clip(ye - e, -1500, 0).astype(np.int32))
    return _renormalize(mant, e)


# ---------------------------------------------------------------------------
# single-argument conveniences
# ---------------------------------------------------------------------------

def bessel_j_seq_scaled(m_max: int, x: float):
    """Scaled (mant, exp2) arrays of J_0..J_{m_max} at a scalar argument."""
    mant, exp2 = bessel_j_grid_scaled(m_max, float(x))
    return mant[:, 0], exp2[:, 0]


def bessel_y_seq_scaled(m_max: int, x: float):
    """Scaled (mant, exp2) arrays of Y_0..Y_{m_max} at a scalar argument."""
    mant, exp2 = bessel_y_grid_scaled(m_max, float(x))
    return mant[:, 0], exp2[:, 0]


def hankel1_seq_scaled(m_max: int, x: float):
    """Scaled (complex mant, exp2) arrays of H_0^(1)..H_{m_max}^(1)."""
    mant, exp2 = hankel1_grid_scaled(m_max, float(x))
    return mant[:, 0], exp2[:, 0]


def hankel1_seq(m_max: int, x: float) -> np.ndarray:
    """Plain complex H_0^(1)(x)..H_{m_max}^(1)(x).

    Raises OverflowError when the highest orders leave the double range;
    use the scaled variant in that regime.
    """
    mant, exp2 = hankel1_seq_scaled(m_max, x)
    return scaled_to_float(mant, exp2)


def _parity_sign(m: int) -> float:
    return -1.0 if (m % 2) else 1.0


def bessel_j(m: int, x: float) -> float:
    """J_m(x) as a plain float; negative orders via J_{-m} = (-1)^m J_m."""
    am = abs(int(m))
    mant, exp2 = bessel_j_seq_scaled(am, x)
    v = float(scaled_to_float(mant[am], exp2[am]))
    return _parity_sign(am) * v if m < 0 else v


def bessel_y(m: int, x: float) -> float:
    """Y_m(x) as a plain float; raises OverflowError out of double range."""
    am = abs(int(m))
    mant, exp2 = bessel_y_seq_scaled(am, x)
    v = float(scaled_to_float(mant[am], exp2[am]))
    return _parity_sign(am) * v if m < 0 else v


def hankel1(m: int, x: float) -> complex:
    """H_m^(1)(x) = complex(J_m(x), Y_m(x)); parity rule for negative orders."""
    am = abs(int(m))
    jm, je = bessel_j_seq_scaled(am, x)
    ym, ye = bessel_y_seq_scaled(am, x)
    v = complex(float(scaled_to_float(jm[am], je[am])),
                float(scaled_to_float(ym[am], ye[am])))
    return _parity_sign(am) * v if m < 0 else v


# ---------------------------------------------------------------------------
# hypergeometric helpers
# ---------------------------------------------------------------------------

def hyp2f1_peaked(m: int, z: float) -> float:
    """2F1(m+1, m+1; 1; z) for integer m >= 0 and 0 <= z < 1.

    Uses the Pfaff transform to a terminating sum,

        (1-z)^{-(m+1)} 2F1(m+1, -m; 1; z/(z-1)),

    whose m+1 terms are all positive, so there is no cancellation; errors stay
    at a few ulp.  The direct series would need ~m/(1-z) terms near z = 1.
    Grows like (1-sqrt(z))^{-2m}; raises OverflowError when that leaves the
    double range (around m = 60 at z = 0.9 the value is ~1e155, still fine;
    m = 200 there is not).
    """
    m = int(m)
    if m < 0:
        raise ValueError("m must be a nonnegative integer")
    if not (0.0 <= z < 1.0):
        raise ValueError("z must lie in [0, 1)")
    w = z / (z - 1.0)
    s = 1.0
    t = 1.0
    for j in range(m):
        t *= (m + 1.0 + j) * (j - m) / ((j + 1.0) ** 2) * w
        s += t
    with np.errstate(over="ignore"):
        out = s * (1.0 - z) ** (-(m + 1.0))
    if not np.isfinite(out):
        raise OverflowError("2F1 value exceeds double-precision range")
    return float(out)


def hyp0f3_ones(x: float) -> float:
    """0F3(; 1, 1, 1; x) = sum_n x^n / (n!)^4 for x >= 0.

    Grows like exp(4 x^{1/4}); raises OverflowError past the double range.
    """
    if x < 0.0:
        raise ValueError("x must be >= 0")
    s = 1.0
    t = 1.0
    n = 0
    while True:
        n += 1
        t *= x / float(n) ** 4
        s += t
        if not np.isfinite(s):
            raise OverflowError("0F3 value exceeds double-precision range")
        if t < 1e-17 * s or n > 2000:
            break
    return float(s)
