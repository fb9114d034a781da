"""Transition-rate tables and relaxation superoperators for V-type schemes.

The level labels are fixed: two excited levels "b" and "c" share a common
ground level "d".  Every photon channel carries helicity sigma = M_upper -
M_lower in {-1, 0, +1}, and the environment enters only through a 3x3
helicity matrix (see environment.KMatrix).

Rate tables come in two shapes.  The two-index table ("upper") couples pairs
of excited sublevels and drives depopulation together with the coherence
decay between the excited levels.  The four-index table ("feeding") resolves
the ground sublevels the decay feeds into; summing its diagonal-ground
entries reproduces the two-index table exactly, and the assembly loops are
ordered so that this holds to the last bit, not merely to rounding.

Superoperators act on the row-major vectorisation of the density matrix:
vec(A rho B) = kron(A, B.T) vec(rho).  Feeding terms are inserted in
conjugate pairs so that trace and Hermiticity are preserved for complex
helicity matrices, not only for real ones.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .angular import clebsch_gordan, wigner_6j
from .environment import KMatrix
from .errors import RateSetContractError, SchemeError
from .halfint import HalfInt, half, projections, triangle_ok, triangle_range

EXCITED_LEVELS = ("b", "c")
GROUND_LEVEL = "d"
LEVEL_ORDER = ("d", "c", "b")

__all__ = [
    "EXCITED_LEVELS",
    "GROUND_LEVEL",
    "LEVEL_ORDER",
    "LevelScheme",
    "HyperfineScheme",
    "hyperfine_mixing",
    "BasisState",
    "Basis",
    "RateSet",
    "rates_fine",
    "rates_stimulated",
    "rates_injected",
    "rates_hyperfine",
    "Superoperator",
    "build_relaxation_superop",
    "build_stimulated_superop",
    "InterferencePoint",
    "InterferenceReport",
    "interference_report",
]


# ---------------------------------------------------------------------------
# level schemes


@dataclass(frozen=True)
class LevelScheme:
    """Angular momenta, transition frequencies and dipole strengths.

    ``dipole_mode`` selects how the scalar prefactor S_{j1 j2} of each rate
    coefficient is built:

    * ``"alkali"``: every S_{j1 j2} equals ``rate_scale``.  This is the
      common case where both excited levels belong to one fine-structure
      multiplet and share a reduced dipole element, and it makes the
      interference degree scale-free.
    * ``"explicit"``: S_{j1 j2} = rate_scale * 2 * mu_{j1} mu_{j2}
      omega_{j2 d}^3 / sqrt((2 J_{j1}+1)(2 J_{j2}+1)), with hbar = c = 1
      absorbed into ``rate_scale``.  Note the cube sits on the frequency of
      the *second* index, so the two cross coefficients differ by
      (omega_cd / omega_bd)^3.
    """

    j_b: HalfInt
    j_c: HalfInt
    j_d: HalfInt
    omega_bd: float = 1.0
    omega_cd: float = 1.0
    dipole_mode: str = "alkali"
    rate_scale: float = 1.0
    mu_bd: float | None = None
    mu_cd: float | None = None

    def __post_init__(self) -> None:
        for name in ("j_b", "j_c", "j_d"):
            value = half(getattr(self, name))
            if value.twice < 0:
                raise SchemeError(f"{name} must be non-negative, got {value}")
            object.__setattr__(self, name, value)
        for name in ("omega_bd", "omega_cd"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise SchemeError(f"{name} must be a positive finite frequency, got {value!r}")
            object.__setattr__(self, name, value)
        for level in EXCITED_LEVELS:
            if not triangle_ok(self.j(level), self.j_d, half(1)):
                raise SchemeError(
                    f"transition {level}-d is not dipole allowed: "
                    f"J_{level}={self.j(level)}, J_d={self.j_d}"
                )
        if not math.isfinite(self.rate_scale) or self.rate_scale <= 0.0:
            raise SchemeError(f"rate_scale must be positive, got {self.rate_scale!r}")
        if self.dipole_mode == "alkali":
            if self.mu_bd is not None or self.mu_cd is not None:
                raise SchemeError("dipole moments are only meaningful with dipole_mode='explicit'")
        elif self.dipole_mode == "explicit":
            for name in ("mu_bd", "mu_cd"):
                value = getattr(self, name)
                if value is None or not math.isfinite(value) or value <= 0.0:
                    raise SchemeError(f"dipole_mode='explicit' requires positive {name}")
        else:
            raise SchemeError(f"unknown dipole_mode {self.dipole_mode!r}")

    def j(self, level: str) -> HalfInt:
        try:
            return {"b": self.j_b, "c": self.j_c, "d": self.j_d}[level]
        except KeyError:
            raise SchemeError(f"unknown level {level!r}, expected one of 'b', 'c', 'd'") from None

    def omega(self, level: str) -> float:
        """Transition frequency of level -> d; zero for the ground level itself."""
        self.j(level)
        return {"b": self.omega_bd, "c": self.omega_cd, "d": 0.0}[level]

    def s_factor(self, j1: str, j2: str) -> float:
        """Scalar prefactor of the (j1, j2) rate coefficient."""
        if j1 not in EXCITED_LEVELS or j2 not in EXCITED_LEVELS:
            raise SchemeError(f"s_factor is defined for excited level pairs, got ({j1!r}, {j2!r})")
        if self.dipole_mode == "alkali":
            return self.rate_scale
        mu = {"b": self.mu_bd, "c": self.mu_cd}
        om = {"b": self.omega_bd, "c": self.omega_cd}
        norm = math.sqrt((self.j(j1).twice + 1) * (self.j(j2).twice + 1))
        return self.rate_scale * 2.0 * mu[j1] * mu[j2] * om[j2] ** 3 / norm


@dataclass(frozen=True)
class HyperfineScheme:
    """Fine-structure scheme dressed with a nuclear spin.

    ``f_offsets`` maps (level, F) to a frequency offset added to the level
    energy in the Hamiltonian only; the rate tables never see it (the
    hyperfine splitting is assumed small against the optical frequencies).
    """

    fine: LevelScheme
    nuclear_spin: HalfInt
    f_offsets: Mapping[tuple[str, HalfInt], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        spin = half(self.nuclear_spin)
        if spin.twice < 0:
            raise SchemeError(f"nuclear_spin must be non-negative, got {spin}")
        object.__setattr__(self, "nuclear_spin", spin)
        normalized: dict[tuple[str, HalfInt], float] = {}
        for key, offset in dict(self.f_offsets).items():
            level, f_raw = key
            f_value = half(f_raw)
            if f_value not in self.f_values(level):
                raise SchemeError(
                    f"f_offsets key ({level!r}, {f_value}) is not a hyperfine level of "
                    f"J={self.fine.j(level)}, I={spin}"
                )
            normalized[(level, f_value)] = float(offset)
        object.__setattr__(self, "f_offsets", normalized)

    def f_values(self, level: str) -> tuple[HalfInt, ...]:
        return tuple(triangle_range(self.fine.j(level), self.nuclear_spin))

    def f_offset(self, level: str, f: HalfInt) -> float:
        return self.f_offsets.get((level, half(f)), 0.0)


def hyperfine_mixing(scheme: HyperfineScheme, level: str, f: HalfInt, f_d: HalfInt) -> float:
    """Recoupling factor carried by a hyperfine channel F -> F_d.

    This is the exact reduction of the uncoupling sum over nuclear
    projections: for J coupled with I to F, the dipole amplitude between
    |F M> and |F_d M_d> equals this factor times the plain channel amplitude
    <F_d M_d; 1 sigma | F M>, all divided by sqrt(2 J + 1).  At I = 0 it
    collapses to 1/sqrt(2 J + 1) so the hyperfine tables reduce entry by
    entry to the fine-structure ones.
    """
    j_level = scheme.fine.j(level)
    t_sum = j_level.twice + scheme.nuclear_spin.twice + half(f_d).twice
    sign = -1.0 if (t_sum // 2 + 1) % 2 else 1.0
    return (
        sign
        * math.sqrt(half(f_d).twice + 1)
        * wigner_6j(j_level, f, scheme.nuclear_spin, f_d, scheme.fine.j_d, 1)
    )


# ---------------------------------------------------------------------------
# basis bookkeeping


@dataclass(frozen=True)
class BasisState:
    level: str
    m: HalfInt
    f: HalfInt | None = None

    def label(self) -> str:
        if self.f is None:
            return f"{self.level}:M={self.m}"
        return f"{self.level}:F={self.f}:M={self.m}"


class Basis:
    """Ordered sublevel basis: levels d, c, b; within a level F then M ascending."""

    def __init__(self, states: Iterable[BasisState]):
        self.states = tuple(states)
        self._index = {state: i for i, state in enumerate(self.states)}
        if len(self._index) != len(self.states):
            raise SchemeError("basis states must be distinct")

    @classmethod
    def for_fine(cls, scheme: LevelScheme) -> "Basis":
        states = [
            BasisState(level, m)
            for level in LEVEL_ORDER
            for m in projections(scheme.j(level))
        ]
        return cls(states)

    @classmethod
    def for_hyperfine(cls, scheme: HyperfineScheme) -> "Basis":
        states = [
            BasisState(level, m, f)
            for level in LEVEL_ORDER
            for f in scheme.f_values(level)
            for m in projections(f)
        ]
        return cls(states)

    def index(self, state: BasisState) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise SchemeError(f"state {state.label()} is not in the basis") from None

    def labels(self) -> tuple[str, ...]:
        return tuple(state.label() for state in self.states)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(self.states)


# ---------------------------------------------------------------------------
# rate tables

# Key layouts (all angular momenta as HalfInt):
#   fine upper    (j1, M1, j2, M2)
#   fine feeding  (j1, M1, Md1, j2, M2, Md2)
#   hf upper      (j1, F1, M1, j2, F2, M2)
#   hf feeding    (j1, F1, M1, Fd1, Md1, j2, F2, M2, Fd2, Md2)
#   ground        (Md1, Md2)


def _coerce_key(key: tuple) -> tuple:
    out = []
    for part in key:
        if isinstance(part, str) and part in LEVEL_ORDER:
            out.append(part)
        else:
            out.append(half(part))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class RateSet:
    """Sparse rate tables plus enough context to build superoperators.

    The tables are Hermitian (Γ(2,1) = conj Γ(1,2)) whenever one helicity
    matrix serves every level pair; per-frequency evaluation with detuned
    levels legitimately breaks that symmetry in the cross block, and the
    superoperator builders are written to preserve trace and Hermiticity of
    the density matrix regardless.  Only the trace identities are therefore
    load-bearing contracts; ``hermitian_defect`` stays available as a
    structure diagnostic.
    """

    kind: str
    scheme: LevelScheme | HyperfineScheme
    hyperfine: bool
    upper: Mapping[tuple, complex]
    feeding: Mapping[tuple, complex]
    ground: Mapping[tuple, complex] | None = None

    def gamma(self, *key) -> complex:
        return self.upper.get(_coerce_key(key), 0.0 + 0.0j)

    def gamma_feeding(self, *key) -> complex:
        return self.feeding.get(_coerce_key(key), 0.0 + 0.0j)

    def gamma_ground(self, md1, md2) -> complex:
        if self.ground is None:
            return 0.0 + 0.0j
        return self.ground.get((half(md1), half(md2)), 0.0 + 0.0j)

    def hermitian_defect(self) -> tuple[float, tuple | None]:
        worst, worst_key = 0.0, None
        for table in (self.upper, self.feeding, self.ground):
            if table is None:
                continue
            for key, value in table.items():
                mid = len(key) // 2
                partner = table.get(key[mid:] + key[:mid], 0.0 + 0.0j)
                defect = abs(complex(value).conjugate() - complex(partner))
                if defect > worst:
                    worst, worst_key = defect, key
        return worst, worst_key

    def trace_identity_defect(self) -> tuple[float, tuple | None]:
        """Max |upper - sum over shared ground sublevels of feeding|, with argmax key."""
        sums: dict[tuple, complex] = {}
        if self.hyperfine:
            for key, value in self.feeding.items():
                j1, f1, m1, fd1, md1, j2, f2, m2, fd2, md2 = key
                if fd1 == fd2 and md1 == md2:
                    upper_key = (j1, f1, m1, j2, f2, m2)
                    sums[upper_key] = sums.get(upper_key, 0.0 + 0.0j) + value
        else:
            for key, value in self.feeding.items():
                j1, m1, md1, j2, m2, md2 = key
                if md1 == md2:
                    upper_key = (j1, m1, j2, m2)
                    sums[upper_key] = sums.get(upper_key, 0.0 + 0.0j) + value
        worst, worst_key = 0.0, None
        for key in set(sums) | set(self.upper):
            defect = abs(sums.get(key, 0.0 + 0.0j) - self.upper.get(key, 0.0 + 0.0j))
            if defect > worst:
                worst, worst_key = defect, key
        return worst, worst_key

    def selection_defect(self) -> tuple[float, tuple | None]:
        """Largest feeding entry whose two channels carry different helicity.

        Exactly zero for any environment whose helicity matrix is diagonal
        (isotropic, axisymmetric, cavity, photonic crystal); a genuinely
        helicity-mixing K populates such entries legitimately, so this is a
        structure diagnostic rather than a validity gate.
        """
        worst, worst_key = 0.0, None
        for key, value in self.feeding.items():
            if self.hyperfine:
                _, _, m1, _, md1, _, _, m2, _, md2 = key
            else:
                _, m1, md1, _, m2, md2 = key
            if (m1 - md1).twice != (m2 - md2).twice and abs(value) > worst:
                worst, worst_key = abs(value), key
        return worst, worst_key

    def ground_identity_defect(self) -> tuple[float, tuple | None]:
        """Max |ground - sum over shared excited sublevels of feeding|."""
        if self.ground is None:
            return 0.0, None
        sums: dict[tuple, complex] = {}
        for key, value in self.feeding.items():
            j1, m1, md1, j2, m2, md2 = key
            if j1 == j2 and m1 == m2:
                gkey = (md1, md2)
                sums[gkey] = sums.get(gkey, 0.0 + 0.0j) + value
        worst, worst_key = 0.0, None
        for key in set(sums) | set(self.ground):
            defect = abs(sums.get(key, 0.0 + 0.0j) - self.ground.get(key, 0.0 + 0.0j))
            if defect > worst:
                worst, worst_key = defect, key
        return worst, worst_key

    def validate(self, tol: float = 1e-10) -> None:
        if self.kind not in ("spontaneous", "stimulated"):
            raise RateSetContractError(f"unknown rate-set kind {self.kind!r}")
        if self.kind == "stimulated" and self.ground is None:
            raise RateSetContractError("stimulated rate set is missing the ground-depopulation table")
        defect, key = self.trace_identity_defect()
        if defect > tol:
            raise RateSetContractError(
                f"feeding table does not sum back to the two-index table: "
                f"defect {defect:.3e} at {key}"
            )
        defect, key = self.ground_identity_defect()
        if defect > tol:
            raise RateSetContractError(
                f"feeding table does not sum back to the ground table: "
                f"defect {defect:.3e} at {key}"
            )


def _sigma_of(m_upper: HalfInt, m_lower: HalfInt) -> int | None:
    t = m_upper.twice - m_lower.twice
    if t in (-2, 0, 2):
        return t // 2
    return None


def _fine_halves(scheme: LevelScheme, level: str) -> list[tuple[HalfInt, HalfInt, int, float]]:
    """Nonzero channel amplitudes (M, Md, sigma, C) of one excited level."""
    out = []
    j_level, j_d = scheme.j(level), scheme.j_d
    for m in projections(j_level):
        for md in projections(j_d):
            sigma = _sigma_of(m, md)
            if sigma is None:
                continue
            c = clebsch_gordan(j_d, md, 1, sigma, j_level, m)
            if c != 0.0:
                out.append((m, md, sigma, c))
    return out


def _k_for_pair(j1: str, j2: str, k_b: KMatrix, k_c: KMatrix, k_cross: KMatrix | None) -> KMatrix:
    if j1 != j2 and k_cross is not None:
        return k_cross
    # the coefficient inherits the frequency of its second index
    return k_b if j2 == "b" else k_c


def _fine_block(
    scheme: LevelScheme,
    j1: str,
    j2: str,
    k: KMatrix,
) -> tuple[dict, dict]:
    s = scheme.s_factor(j1, j2)
    halves1 = _fine_halves(scheme, j1)
    halves2 = _fine_halves(scheme, j2)
    feeding: dict[tuple, complex] = {}
    for m1, md1, sig1, c1 in halves1:
        for m2, md2, sig2, c2 in halves2:
            value = s * c1 * c2 * k.entry(sig1, sig2)
            if value != 0.0:
                feeding[(j1, m1, md1, j2, m2, md2)] = value
    # two-index sums iterate the shared Md ascending, exactly like the
    # diagonal feeding entries above, so the trace identity is bitwise
    upper: dict[tuple, complex] = {}
    for m1 in projections(scheme.j(j1)):
        for m2 in projections(scheme.j(j2)):
            acc = 0.0 + 0.0j
            for md in projections(scheme.j_d):
                value = feeding.get((j1, m1, md, j2, m2, md))
                if value is not None:
                    acc += value
            if acc != 0.0:
                upper[(j1, m1, j2, m2)] = acc
    return upper, feeding


def _merge_blocks(blocks: Iterable[tuple[dict, dict]]) -> tuple[dict, dict]:
    upper: dict[tuple, complex] = {}
    feeding: dict[tuple, complex] = {}
    for block_upper, block_feeding in blocks:
        upper.update(block_upper)
        feeding.update(block_feeding)
    return upper, feeding


def rates_fine(
    scheme: LevelScheme,
    k_b: KMatrix,
    k_c: KMatrix,
    k_cross: KMatrix | None = None,
    *,
    kind: str = "spontaneous",
    workers: int = 1,
) -> RateSet:
    """Assemble the fine-structure rate tables from per-level helicity matrices.

    ``k_b`` and ``k_c`` are the helicity matrices evaluated at omega_bd and
    omega_cd.  The two cross coefficients default to the matrix of their
    second index; passing ``k_cross`` overrides both of them, which is the
    right tool when the two transition frequencies are close enough to share
    one evaluation point.
    """
    for matrix in (k_b, k_c) + (() if k_cross is None else (k_cross,)):
        matrix.validate()
    pairs = [(j1, j2) for j1 in EXCITED_LEVELS for j2 in EXCITED_LEVELS]

    def run(pair: tuple[str, str]) -> tuple[dict, dict]:
        j1, j2 = pair
        return _fine_block(scheme, j1, j2, _k_for_pair(j1, j2, k_b, k_c, k_cross))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, pairs))
    else:
        blocks = [run(pair) for pair in pairs]
    upper, feeding = _merge_blocks(blocks)
    return RateSet(kind=kind, scheme=scheme, hyperfine=False, upper=upper, feeding=feeding)


def _ground_table(scheme: LevelScheme, k_b: KMatrix, k_c: KMatrix) -> dict[tuple, complex]:
    """Two-index ground table: total absorption out of each ground sublevel pair."""
    table: dict[tuple, complex] = {}
    for md1 in projections(scheme.j_d):
        for md2 in projections(scheme.j_d):
            acc = 0.0 + 0.0j
            for level, k in (("b", k_b), ("c", k_c)):
                s = scheme.s_factor(level, level)
                for mj in projections(scheme.j(level)):
                    sig1 = _sigma_of(mj, md1)
                    sig2 = _sigma_of(mj, md2)
                    if sig1 is None or sig2 is None:
                        continue
                    c1 = clebsch_gordan(scheme.j_d, md1, 1, sig1, scheme.j(level), mj)
                    c2 = clebsch_gordan(scheme.j_d, md2, 1, sig2, scheme.j(level), mj)
                    acc += s * c1 * c2 * k.entry(sig1, sig2)
            if acc != 0.0:
                table[(md1, md2)] = acc
    return table


def rates_stimulated(
    scheme: LevelScheme,
    distribution,
    modifier,
    *,
    quad_order: int = 16,
    workers: int = 1,
) -> RateSet:
    """Stimulated tables for a photon distribution seen through a mode modifier.

    Each coefficient is evaluated with the helicity matrix at the frequency
    of its second index, so detuned level pairs pick up different photon
    occupations.  The ground table that drives absorption is built from the
    same per-level matrices.
    """
    from .environment import k_stimulated

    k_b = k_stimulated(distribution, modifier, scheme.omega_bd, quad_order=quad_order)
    k_c = k_stimulated(distribution, modifier, scheme.omega_cd, quad_order=quad_order)
    base = rates_fine(scheme, k_b, k_c, kind="stimulated", workers=workers)
    ground = _ground_table(scheme, k_b, k_c)
    return RateSet(
        kind="stimulated",
        scheme=scheme,
        hyperfine=False,
        upper=base.upper,
        feeding=base.feeding,
        ground=ground,
    )


def rates_injected(scheme: LevelScheme, k: KMatrix, *, workers: int = 1) -> RateSet:
    """Stimulated-structure tables from one literal helicity matrix.

    The injection path feeds externally specified K values straight into
    the operator assembly, bypassing any angular quadrature.
    Both excited levels share the single matrix, and the ground absorption
    table is built from it as well, so the result can drive the full two-way
    superoperator just like a quadrature product.
    """
    base = rates_fine(scheme, k, k, kind="stimulated", workers=workers)
    return RateSet(
        kind="stimulated",
        scheme=scheme,
        hyperfine=False,
        upper=base.upper,
        feeding=base.feeding,
        ground=_ground_table(scheme, k, k),
    )


def _hyperfine_halves(
    scheme: HyperfineScheme, level: str
) -> list[tuple[HalfInt, HalfInt, HalfInt, HalfInt, int, float]]:
    """Nonzero (F, M, Fd, Md, sigma, R*C) channel amplitudes of one excited level."""
    out = []
    for f in scheme.f_values(level):
        for m in projections(f):
            for fd in scheme.f_values(GROUND_LEVEL):
                mixing = hyperfine_mixing(scheme, level, f, fd)
                if mixing == 0.0:
                    continue
                for md in projections(fd):
                    sigma = _sigma_of(m, md)
                    if sigma is None:
                        continue
                    c = clebsch_gordan(fd, md, 1, sigma, f, m)
                    if c != 0.0:
                        out.append((f, m, fd, md, sigma, mixing * c))
    return out


def rates_hyperfine(
    scheme: HyperfineScheme,
    k: KMatrix,
    *,
    workers: int = 1,
) -> RateSet:
    """Spontaneous hyperfine rate tables from a single helicity matrix.

    The hyperfine splittings are assumed negligible on the scale over which
    the mode density varies, so one matrix per fine-structure line suffices.
    Only spontaneous tables are built here; resolving a photon distribution
    over hyperfine components is out of scope.
    """
    k.validate()
    pairs = [(j1, j2) for j1 in EXCITED_LEVELS for j2 in EXCITED_LEVELS]
    halves = {level: _hyperfine_halves(scheme, level) for level in EXCITED_LEVELS}

    def run(pair: tuple[str, str]) -> tuple[dict, dict]:
        j1, j2 = pair
        j_1, j_2 = scheme.fine.j(j1), scheme.fine.j(j2)
        # the recoupling factors absorb 1/sqrt(2J+1) each, which this scale
        # puts back so that I = 0 reproduces the fine-structure tables
        scale = scheme.fine.s_factor(j1, j2) * math.sqrt((j_1.twice + 1) * (j_2.twice + 1))
        feeding: dict[tuple, complex] = {}
        for f1, m1, fd1, md1, sig1, a1 in halves[j1]:
            for f2, m2, fd2, md2, sig2, a2 in halves[j2]:
                value = scale * a1 * a2 * k.entry(sig1, sig2)
                if value != 0.0:
                    feeding[(j1, f1, m1, fd1, md1, j2, f2, m2, fd2, md2)] = value
        # accumulate the two-index table in exactly the order the diagonal
        # entries were written to the feeding table, so the trace identity
        # holds without rounding slack
        upper: dict[tuple, complex] = {}
        for f1, m1, fd1, md1, sig1, a1 in halves[j1]:
            for f2, m2, fd2, md2, sig2, a2 in halves[j2]:
                if fd1 != fd2 or md1 != md2:
                    continue
                key = (j1, f1, m1, j2, f2, m2)
                value = scale * a1 * a2 * k.entry(sig1, sig2)
                if value != 0.0:
                    upper[key] = upper.get(key, 0.0 + 0.0j) + value
        return upper, feeding

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, pairs))
    else:
        blocks = [run(pair) for pair in pairs]
    upper, feeding = _merge_blocks(blocks)
    return RateSet(kind="spontaneous", scheme=scheme, hyperfine=True, upper=upper, feeding=feeding)


# ---------------------------------------------------------------------------
# superoperators


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Linear map on density matrices, stored on the row-major vec basis."""

    matrix: np.ndarray
    basis: Basis
    label: str

    def apply(self, rho: np.ndarray) -> np.ndarray:
        n = len(self.basis)
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (n, n):
            raise RateSetContractError(
                f"density matrix shape {rho.shape} does not match basis size {n}"
            )
        return (self.matrix @ rho.reshape(n * n)).reshape(n, n)


def _upper_state(rates: RateSet, key_half: tuple) -> BasisState:
    if rates.hyperfine:
        level, f, m = key_half
        return BasisState(level, m, f)
    level, m = key_half
    return BasisState(level, m)


def _feeding_states(rates: RateSet, key: tuple) -> tuple[BasisState, BasisState, BasisState, BasisState]:
    """Unpack one feeding key into (upper1, ground1, upper2, ground2) states."""
    if rates.hyperfine:
        j1, f1, m1, fd1, md1, j2, f2, m2, fd2, md2 = key
        return (
            BasisState(j1, m1, f1),
            BasisState(GROUND_LEVEL, md1, fd1),
            BasisState(j2, m2, f2),
            BasisState(GROUND_LEVEL, md2, fd2),
        )
    j1, m1, md1, j2, m2, md2 = key
    return (
        BasisState(j1, m1),
        BasisState(GROUND_LEVEL, md1),
        BasisState(j2, m2),
        BasisState(GROUND_LEVEL, md2),
    )


def _default_basis(rates: RateSet) -> Basis:
    if rates.hyperfine:
        return Basis.for_hyperfine(rates.scheme)
    return Basis.for_fine(rates.scheme)


def _embed_upper(rates: RateSet, basis: Basis) -> np.ndarray:
    n = len(basis)
    g = np.zeros((n, n), dtype=complex)
    for key, value in rates.upper.items():
        mid = len(key) // 2
        i = basis.index(_upper_state(rates, key[:mid]))
        j = basis.index(_upper_state(rates, key[mid:]))
        g[i, j] += value
    return g


def _add_depopulation(lmat: np.ndarray, g: np.ndarray) -> None:
    # -(G rho + rho G^dagger): the conjugate on the right factor is what
    # keeps Hermiticity preservation exact when per-frequency evaluation
    # leaves the embedded table non-Hermitian
    n = g.shape[0]
    eye = np.eye(n, dtype=complex)
    lmat -= np.kron(g, eye)
    lmat -= np.kron(eye, g.conj())


def build_relaxation_superop(rates: RateSet, basis: Basis | None = None) -> Superoperator:
    """Spontaneous-decay superoperator: excited depopulation plus ground feeding.

    The feeding insertion places each four-index coefficient twice, once
    conjugated, so the result preserves trace and Hermiticity whenever the
    tables satisfy their contract; ``rates.validate()`` enforces exactly the
    identities that proof needs, and runs first.
    """
    rates.validate()
    if basis is None:
        basis = _default_basis(rates)
    n = len(basis)
    lmat = np.zeros((n * n, n * n), dtype=complex)
    _add_depopulation(lmat, _embed_upper(rates, basis))
    for key, value in rates.feeding.items():
        up1, gr1, up2, gr2 = _feeding_states(rates, key)
        i1, id1 = basis.index(up1), basis.index(gr1)
        i2, id2 = basis.index(up2), basis.index(gr2)
        # conj(G) |d1><1| rho |2><d2|  +  G |d2><2| rho |1><d1|
        lmat[id1 * n + id2, i1 * n + i2] += complex(value).conjugate()
        lmat[id2 * n + id1, i2 * n + i1] += value
    return Superoperator(matrix=lmat, basis=basis, label="relaxation")


def build_stimulated_superop(rates: RateSet, basis: Basis | None = None) -> Superoperator:
    """Stimulated superoperator: emission plus absorption driven by one photon field.

    Reuses the emission feeding table for absorption with the state pairs
    swapped, which is exactly the detailed-balance structure of a single
    photon distribution acting on both directions of each line.
    """
    if rates.kind != "stimulated":
        raise RateSetContractError(
            f"stimulated superoperator needs a stimulated rate set, got kind={rates.kind!r}"
        )
    rates.validate()
    if basis is None:
        basis = _default_basis(rates)
    n = len(basis)
    lmat = np.zeros((n * n, n * n), dtype=complex)

    # emission: excited depopulation + feeding down into the ground manifold
    _add_depopulation(lmat, _embed_upper(rates, basis))
    g_ground = np.zeros((n, n), dtype=complex)
    for (md1, md2), value in rates.ground.items():
        i = basis.index(BasisState(GROUND_LEVEL, md1))
        j = basis.index(BasisState(GROUND_LEVEL, md2))
        g_ground[i, j] += value
    _add_depopulation(lmat, g_ground)
    for key, value in rates.feeding.items():
        up1, gr1, up2, gr2 = _feeding_states(rates, key)
        i1, id1 = basis.index(up1), basis.index(gr1)
        i2, id2 = basis.index(up2), basis.index(gr2)
        conj = complex(value).conjugate()
        # emission feeding
        lmat[id1 * n + id2, i1 * n + i2] += conj
        lmat[id2 * n + id1, i2 * n + i1] += value
        # absorption feeding: same coefficient, upper and ground roles swapped
        lmat[i1 * n + i2, id1 * n + id2] += conj
        lmat[i2 * n + i1, id2 * n + id1] += value
    return Superoperator(matrix=lmat, basis=basis, label="stimulated")


# ---------------------------------------------------------------------------
# interference diagnostics


@dataclass(frozen=True)
class InterferencePoint:
    m: HalfInt
    f: HalfInt | None
    value: float | None

    @property
    def defined(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class InterferenceReport:
    points: tuple[InterferencePoint, ...]
    off_diagonal: tuple[tuple[tuple, complex], ...]

    def max_abs(self) -> float:
        defined = [abs(p.value) for p in self.points if p.value is not None]
        return max(defined, default=0.0)


def _interference_value(g_bc: complex, g_bb: complex, g_cc: complex) -> float | None:
    denom = (complex(g_bb).real) * (complex(g_cc).real)
    if denom <= 0.0:
        # a vanishing diagonal forces a vanishing cross term, so the degree
        # is 0/0 and genuinely undefined rather than zero
        return None
    return complex(g_bc).real / math.sqrt(denom)


def interference_report(rates: RateSet) -> InterferenceReport:
    """Degree of interference per shared sublevel, plus the raw cross terms.

    The degree at sublevel M (or (F, M)) is the cross coefficient divided by
    the geometric mean of the two diagonal coefficients at the same
    projection.  Sublevels where both diagonals vanish report ``None``.
    """
    points: list[InterferencePoint] = []
    if rates.hyperfine:
        b_keys = {(f, m) for (j, f, m, *_rest) in _iter_upper_halves(rates) if j == "b"}
        c_keys = {(f, m) for (j, f, m, *_rest) in _iter_upper_halves(rates) if j == "c"}
        for f, m in sorted(b_keys & c_keys):
            g_bb = rates.gamma("b", f, m, "b", f, m)
            g_cc = rates.gamma("c", f, m, "c", f, m)
            g_bc = rates.gamma("b", f, m, "c", f, m)
            points.append(InterferencePoint(m=m, f=f, value=_interference_value(g_bc, g_bb, g_cc)))
    else:
        scheme = rates.scheme
        shared = [
            m
            for m in projections(scheme.j_b)
            if abs(m.twice) <= scheme.j_c.twice and (m.twice - scheme.j_c.twice) % 2 == 0
        ]
        for m in shared:
            g_bb = rates.gamma("b", m, "b", m)
            g_cc = rates.gamma("c", m, "c", m)
            g_bc = rates.gamma("b", m, "c", m)
            points.append(InterferencePoint(m=m, f=None, value=_interference_value(g_bc, g_bb, g_cc)))
    off = [
        (key, complex(value))
        for key, value in rates.upper.items()
        if key[: len(key) // 2] != key[len(key) // 2 :] and value != 0.0
    ]
    off.sort(key=lambda item: (-abs(item[1]), tuple(map(repr, item[0]))))
    return InterferenceReport(points=tuple(points), off_diagonal=tuple(off))


def _iter_upper_halves(rates: RateSet):
    for key in rates.upper:
        mid = len(key) // 2
        yield key[:mid]
        yield key[mid:]
