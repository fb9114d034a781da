"""Exact Wigner algebra: Clebsch-Gordan, 6j, Racah W, and rank-1 rotations.

Conventions used throughout the package
---------------------------------------

* Clebsch-Gordan coefficients are real and follow the Condon-Shortley phase.
  ``clebsch_gordan(j1, m1, j2, m2, j, m)`` is <j1 m1 j2 m2 | j m>.
* ``wigner_6j`` is the standard 6j symbol; ``racah_w(l1..l6)`` is the Racah W
  coefficient, W = (-1)^(l1+l2+l3+l4) {l1 l2 l5; l4 l3 l6}.
* ``wigner_d1(lam, sig, beta)`` is the rank-1 rotation table with rows/columns
  indexed by spherical components: d(0,0) = cos(beta),
  d(+1,0) = d(0,-1) = sin(beta)/sqrt(2), d(0,+1) = d(-1,0) = -sin(beta)/sqrt(2),
  d(+-1,+-1) = (1+cos)/2, d(+-1,-+1) = (1-cos)/2.  Note this is the transpose
  of the d^1 table printed in most z-y-z texts; it is an orthogonal matrix and
  the package's mode expansions are built on it consistently.
* ``wigner_D1(lam, sig, phi, theta) = exp(i*sig*phi) * d(lam, sig)(theta)``,
  so conj(D(lam, sig')) * D(lam, sig) carries exp(i(sig - sig')phi) and the
  sky average of that product over the unit sphere is delta(sig, sig')/3.

Coefficients are evaluated by the Racah finite sums with exact integer
factorials (``fractions.Fraction`` accumulation); the only floating-point
operation is one square root at the end.  Every value is cached on its
twice-integer key, so repeated assembly loops pay dictionary lookups only.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import AngularDomainError
from .halfint import HalfInt, HalfIntLike, check_sigma, half

__all__ = [
    "clebsch_gordan",
    "wigner_6j",
    "racah_w",
    "wigner_d1",
    "wigner_D1",
    "set_momentum_cap",
    "momentum_cap",
    "cg_orthogonality_defect",
    "channel_sum_defect",
    "d1_orthogonality_defect",
    "D1_sky_average_defect",
    "sixj_sum_rule_defect",
]

# ---------------------------------------------------------------------------
# factorial table
# ---------------------------------------------------------------------------

# The CG Racah sum needs factorials up to j1 + j2 + J + 1 and the 6j sum up
# to one past the largest pair sum, i.e. 2*cap + 1 with every momentum at the
# cap.  Default cap: J <= 25/2.
_DEFAULT_CAP_TWICE = 25

_fact_table: list[int] = [1]
_cap_twice: int = 0


def _grow_factorials(n_max: int) -> None:
    while len(_fact_table) <= n_max:
        _fact_table.append(_fact_table[-1] * len(_fact_table))


def set_momentum_cap(j_max: HalfIntLike) -> None:
    """Resize the exact factorial table to admit momenta up to ``j_max``.

    Raising the cap is cheap (a few big-int multiplies); lowering it only
    tightens the argument check, it does not shrink caches.
    """
    global _cap_twice
    cap = half(j_max)
    if cap.twice < 2:
        raise AngularDomainError(f"momentum cap must be at least 1, got {cap}")
    _cap_twice = cap.twice
    _grow_factorials(2 * _cap_twice + 2)


def momentum_cap() -> HalfInt:
    """Largest momentum the factorial table currently admits."""
    return HalfInt(_cap_twice)


set_momentum_cap(HalfInt(_DEFAULT_CAP_TWICE))


def _check_cap(*twice_values: int) -> None:
    biggest = max(abs(t) for t in twice_values)
    if biggest > _cap_twice:
        raise AngularDomainError(
            f"momentum {HalfInt(biggest)} exceeds the factorial-table cap "
            f"{HalfInt(_cap_twice)}; call set_momentum_cap({HalfInt(biggest)}) first"
        )


def _f(n: int) -> int:
    # callers guarantee n >= 0 and within the table
    return _fact_table[n]


# ---------------------------------------------------------------------------
# Clebsch-Gordan
# ---------------------------------------------------------------------------


def _check_projection(j: HalfInt, m: HalfInt, label: str) -> None:
    if j.twice < 0:
        raise AngularDomainError(f"{label}: angular momentum must be >= 0, got {j}")
    if (j.twice - m.twice) % 2 != 0:
        raise AngularDomainError(
            f"{label}: projection {m} is not in the ladder of j={j} "
            f"(values must differ by an integer)"
        )


def clebsch_gordan(
    j1: HalfIntLike,
    m1: HalfIntLike,
    j2: HalfIntLike,
    m2: HalfIntLike,
    j: HalfIntLike,
    m: HalfIntLike,
) -> float:
    """<j1 m1 j2 m2 | j m> with the Condon-Shortley phase.

    Returns 0.0 for violated selection rules (m != m1+m2, triangle, |m| > j).
    Raises :class:`AngularDomainError` for malformed inputs: negative j,
    projections outside the ladder of their j, or momenta above the cap.
    """
    a, ma = half(j1), half(m1)
    b, mb = half(j2), half(m2)
    c, mc = half(j), half(m)
    _check_projection(a, ma, "j1")
    _check_projection(b, mb, "j2")
    _check_projection(c, mc, "j")
    _check_cap(a.twice, b.twice, c.twice)
    if abs(ma.twice) > a.twice or abs(mb.twice) > b.twice or abs(mc.twice) > c.twice:
        return 0.0
    if ma.twice + mb.twice != mc.twice:
        return 0.0
    if (a.twice + b.twice + c.twice) % 2 != 0:
        return 0.0
    if not (abs(a.twice - b.twice) <= c.twice <= a.twice + b.twice):
        return 0.0
    return _cg_cached(a.twice, ma.twice, b.twice, mb.twice, c.twice, mc.twice)


@lru_cache(maxsize=None)
def _cg_cached(t1: int, tm1: int, t2: int, tm2: int, t3: int, tm3: int) -> float:
    # Racah's closed form; all the half-sums below are integers because the
    # caller has already enforced parity and the selection rules.
    pref = Fraction(
        (t3 + 1)
        * _f((t1 + t2 - t3) // 2)
        * _f((t1 - t2 + t3) // 2)
        * _f((-t1 + t2 + t3) // 2)
        * _f((t3 + tm3) // 2)
        * _f((t3 - tm3) // 2)
        * _f((t1 - tm1) // 2)
        * _f((t1 + tm1) // 2)
        * _f((t2 - tm2) // 2)
        * _f((t2 + tm2) // 2),
        _f((t1 + t2 + t3) // 2 + 1),
    )
    k_min = max(0, (t2 - t3 - tm1) // 2, (t1 + tm2 - t3) // 2)
    k_max = min((t1 + t2 - t3) // 2, (t1 - tm1) // 2, (t2 + tm2) // 2)
    if k_max < k_min:
        return 0.0
    total = Fraction(0)
    for k in range(k_min, k_max + 1):
        denom = (
            _f(k)
            * _f((t1 + t2 - t3) // 2 - k)
            * _f((t1 - tm1) // 2 - k)
            * _f((t2 + tm2) // 2 - k)
            * _f((t3 - t2 + tm1) // 2 + k)
            * _f((t3 - t1 - tm2) // 2 + k)
        )
        total += Fraction(-1 if k % 2 else 1, denom)
    if total == 0:
        return 0.0
    magnitude = math.sqrt(float(pref * total * total))
    return magnitude if total > 0 else -magnitude


# ---------------------------------------------------------------------------
# 6j and Racah W
# ---------------------------------------------------------------------------


def wigner_6j(
    a: HalfIntLike,
    b: HalfIntLike,
    c: HalfIntLike,
    d: HalfIntLike,
    e: HalfIntLike,
    f: HalfIntLike,
) -> float:
    """The 6j symbol {a b c; d e f}.

    Returns 0.0 when any of the four triads (abc), (aef), (dbf), (dec)
    violates the triangle rule or has half-odd perimeter.
    """
    ta, tb, tc = half(a).twice, half(b).twice, half(c).twice
    td, te, tf = half(d).twice, half(e).twice, half(f).twice
    for t in (ta, tb, tc, td, te, tf):
        if t < 0:
            raise AngularDomainError("6j arguments must be >= 0")
    _check_cap(ta, tb, tc, td, te, tf)
    if not (
        _triad_ok(ta, tb, tc)
        and _triad_ok(ta, te, tf)
        and _triad_ok(td, tb, tf)
        and _triad_ok(td, te, tc)
    ):
        return 0.0
    return _sixj_cached(ta, tb, tc, td, te, tf)


def _triad_ok(x: int, y: int, z: int) -> bool:
    return (x + y + z) % 2 == 0 and abs(x - y) <= z <= x + y


def _triangle_fraction(x: int, y: int, z: int) -> Fraction:
    return Fraction(
        _f((x + y - z) // 2) * _f((x - y + z) // 2) * _f((-x + y + z) // 2),
        _f((x + y + z) // 2 + 1),
    )


@lru_cache(maxsize=None)
def _sixj_cached(ta: int, tb: int, tc: int, td: int, te: int, tf: int) -> float:
    delta = (
        _triangle_fraction(ta, tb, tc)
        * _triangle_fraction(ta, te, tf)
        * _triangle_fraction(td, tb, tf)
        * _triangle_fraction(td, te, tc)
    )
    triads = (
        (ta + tb + tc) // 2,
        (ta + te + tf) // 2,
        (td + tb + tf) // 2,
        (td + te + tc) // 2,
    )
    pairs = (
        (ta + tb + td + te) // 2,
        (tb + tc + te + tf) // 2,
        (tc + ta + tf + td) // 2,
    )
    total = Fraction(0)
    for t in range(max(triads), min(pairs) + 1):
        denom = 1
        for s in triads:
            denom *= _f(t - s)
        for s in pairs:
            denom *= _f(s - t)
        term = Fraction(_f(t + 1), denom)
        total += -term if t % 2 else term
    if total == 0:
        return 0.0
    magnitude = math.sqrt(float(delta * total * total))
    return magnitude if total > 0 else -magnitude


def racah_w(
    l1: HalfIntLike,
    l2: HalfIntLike,
    l3: HalfIntLike,
    l4: HalfIntLike,
    l5: HalfIntLike,
    l6: HalfIntLike,
) -> float:
    """Racah W(l1 l2 l3 l4; l5 l6) = (-1)^(l1+l2+l3+l4) {l1 l2 l5; l4 l3 l6}.

    Returns 0.0 (with no phase evaluation) when the underlying 6j vanishes by
    the triangle rules, so half-odd phase exponents on dead channels are never
    an issue.
    """
    value = wigner_6j(l1, l2, l5, l4, l3, l6)
    if value == 0.0:
        return 0.0
    exponent_twice = (
        half(l1).twice + half(l2).twice + half(l3).twice + half(l4).twice
    )
    # a surviving 6j forces this sum to be even
    return value if (exponent_twice // 2) % 2 == 0 else -value


# ---------------------------------------------------------------------------
# rank-1 rotation tables
# ---------------------------------------------------------------------------

ArrayLike = Union[float, np.ndarray]


def wigner_d1(lam: int, sig: int, beta: ArrayLike) -> ArrayLike:
    """Rank-1 reduced rotation element d(lam, sig)(beta); see module docstring.

    ``beta`` may be a float or an ndarray; the return matches.
    """
    check_sigma(lam)
    check_sigma(sig)
    b = np.asarray(beta, dtype=float)
    c, s = np.cos(b), np.sin(b)
    if lam == 0 and sig == 0:
        out = c
    elif lam == sig:  # (+1,+1) and (-1,-1)
        out = (1.0 + c) / 2.0
    elif lam == -sig and lam != 0:  # (+1,-1) and (-1,+1)
        out = (1.0 - c) / 2.0
    elif (lam, sig) in ((1, 0), (0, -1)):
        out = s / math.sqrt(2.0)
    else:  # (0, +1) and (-1, 0)
        out = -s / math.sqrt(2.0)
    if np.isscalar(beta) or np.asarray(beta).ndim == 0:
        return float(out)
    return out


def wigner_D1(lam: int, sig: int, phi: ArrayLike, theta: ArrayLike) -> ArrayLike:
    """Rank-1 rotation element D(lam, sig) = exp(i*sig*phi) d(lam, sig)(theta)."""
    check_sigma(lam)
    check_sigma(sig)
    phase = np.exp(1j * sig * np.asarray(phi, dtype=float))
    out = phase * wigner_d1(lam, sig, theta)
    if np.isscalar(phi) and np.isscalar(theta):
        return complex(out)
    return out


# ---------------------------------------------------------------------------
# identity batteries (consumed by the test suite and the doctor command)
# ---------------------------------------------------------------------------


def _cg_t(t1: int, tm1: int, t2: int, tm2: int, t3: int, tm3: int) -> float:
    """Fast CG accessor on twice-integer keys for trusted internal loops.

    Callers must guarantee parity consistency of each (j, m) pair; selection
    rules are still applied here, so dead channels cost one branch.
    """
    if abs(tm1) > t1 or abs(tm2) > t2 or abs(tm3) > t3:
        return 0.0
    if tm1 + tm2 != tm3:
        return 0.0
    if (t1 + t2 + t3) % 2 != 0 or not (abs(t1 - t2) <= t3 <= t1 + t2):
        return 0.0
    return _cg_cached(t1, tm1, t2, tm2, t3, tm3)


def cg_orthogonality_defect(j1: HalfIntLike, j2: HalfIntLike) -> float:
    """Worst deviation of both CG orthogonality relations for fixed (j1, j2).

    For each total projection M, builds the matrix A[m1, J] = C(m1, M-m1 -> J M)
    and checks A.T A = identity (J-orthogonality) and A A.T = identity
    (completeness back onto the product basis); the selection rule m1+m2 = M
    makes these two Gram products the entire content of both relations.
    """
    ta, tb = half(j1).twice, half(j2).twice
    worst = 0.0
    tj_values = list(range(abs(ta - tb), ta + tb + 1, 2))
    for tm in range(-(ta + tb), ta + tb + 1, 2):
        tjs = [tj for tj in tj_values if abs(tm) <= tj]
        tm1s = [tm1 for tm1 in range(-ta, ta + 1, 2) if abs(tm - tm1) <= tb]
        if not tjs or not tm1s:
            continue
        a = np.empty((len(tm1s), len(tjs)))
        for r, tm1 in enumerate(tm1s):
            for c, tj in enumerate(tjs):
                a[r, c] = _cg_t(ta, tm1, tb, tm - tm1, tj, tm)
        eye = np.eye(len(tjs))
        worst = max(worst, float(np.max(np.abs(a.T @ a - eye))))
        eye = np.eye(len(tm1s))
        worst = max(worst, float(np.max(np.abs(a @ a.T - eye))))
    return worst


def channel_sum_defect(j_d: HalfIntLike, j1: HalfIntLike, j2: HalfIntLike) -> float:
    """Worst deviation of the dipole channel sum rule for a level pair.

    For every shared upper projection M:
    sum over Md of C(Jd Md, 1 sig -> J1 M) C(Jd Md, 1 sig -> J2 M), with
    sig = M - Md tied to the summation index, equals delta(J1, J2).  This is
    the cancellation that makes free-space relaxation strictly diagonal.
    """
    td, t1, t2 = half(j_d).twice, half(j1).twice, half(j2).twice
    worst = 0.0
    expect = 1.0 if t1 == t2 else 0.0
    for tm in range(-min(t1, t2), min(t1, t2) + 1, 2):
        acc = 0.0
        for tmd in range(-td, td + 1, 2):
            if abs(tm - tmd) > 2:
                continue
            acc += _cg_t(td, tmd, 2, tm - tmd, t1, tm) * _cg_t(
                td, tmd, 2, tm - tmd, t2, tm
            )
        worst = max(worst, abs(acc - expect))
    return worst


def d1_orthogonality_defect(betas: np.ndarray) -> float:
    """Worst deviation of d1(beta) @ d1(beta).T from the identity."""
    worst = 0.0
    for beta in np.atleast_1d(betas):
        mat = np.array(
            [
                [wigner_d1(lam, sig, float(beta)) for sig in (-1, 0, 1)]
                for lam in (-1, 0, 1)
            ]
        )
        worst = max(worst, float(np.max(np.abs(mat @ mat.T - np.eye(3)))))
    return worst


def D1_sky_average_defect(quad_order: int = 16) -> float:
    """Worst deviation of the sky average of conj(D(lam,sig'))D(lam,sig).

    The average over the unit sphere with measure d(cos theta) d(phi) / 4pi
    must equal delta(sig, sig')/3 for every lam.  Evaluated with
    Gauss-Legendre nodes in cos(theta) and a uniform periodic rule in phi.
    """
    x, w = np.polynomial.legendre.leggauss(quad_order)
    theta = np.arccos(x)
    n_phi = 4 * quad_order
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    worst = 0.0
    for lam in (-1, 0, 1):
        for sig in (-1, 0, 1):
            for sigp in (-1, 0, 1):
                dd = wigner_d1(lam, sigp, theta) * wigner_d1(lam, sig, theta)
                polar = np.sum(w * dd)
                azimuthal = np.mean(np.exp(1j * (sig - sigp) * phi))
                value = polar * azimuthal / 2.0  # /2 normalizes int dx over [-1,1]
                expect = (1.0 / 3.0) if sig == sigp else 0.0
                worst = max(worst, abs(value - expect))
    return worst


def sixj_sum_rule_defect(l_max: HalfIntLike) -> float:
    """Worst deviation of the 6j orthogonality sum rule on a momentum grid.

    sum over x of (2x+1)(2lp+1) {l1 l2 x; l3 l4 lp} {l1 l2 x; l3 l4 lpp}
    = delta(lp, lpp), for all arguments up to ``l_max`` with (l1, l4, lp) and
    (l2, l3, lp) admissible.  The enumeration is quotiented by the two column
    symmetries that leave the sum invariant ((l1,l2,l3,l4) -> (l2,l1,l4,l3)
    and -> (l3,l4,l1,l2)): the skipped tuples produce bitwise-identical sums.
    """
    cap = half(l_max)
    worst = 0.0
    grid = range(0, cap.twice + 1)
    for t1 in grid:
        for t2 in grid:
            for t3 in grid:
                for t4 in grid:
                    key = (t1, t2, t3, t4)
                    if (t2, t1, t4, t3) < key or (t3, t4, t1, t2) < key:
                        continue
                    lps = [
                        tp
                        for tp in range(0, cap.twice + 1)
                        if _triad_ok(t1, t4, tp) and _triad_ok(t2, t3, tp)
                    ]
                    if not lps:
                        continue
                    txs = [
                        tx
                        for tx in range(
                            max(abs(t1 - t2), abs(t3 - t4)),
                            min(t1 + t2, t3 + t4) + 1,
                            2,
                        )
                    ]
                    # every (tx, tp) pair here satisfies all four triads of
                    # {l1 l2 x; l3 l4 lp} by construction of lps and txs
                    v = np.empty((len(lps), len(txs)))
                    for r, tp in enumerate(lps):
                        for c, tx in enumerate(txs):
                            v[r, c] = _sixj_cached(t1, t2, tx, t3, t4, tp)
                    weights = np.array([tx + 1 for tx in txs], dtype=float)
                    scale = np.array([tp + 1 for tp in lps], dtype=float)
                    gram = (v * weights) @ v.T * scale[np.newaxis, :]
                    defect = float(np.max(np.abs(gram - np.eye(len(lps)))))
                    worst = max(worst, defect)
    return worst
