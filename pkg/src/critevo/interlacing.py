"""Strict hyperbolicity and root interlacing of homogeneous symbols.

A homogeneous symbol of order k is  sum_{j + |alpha| = k} c_{j,alpha} lambda^j xi^alpha.
Along a fixed direction xi' on the unit sphere it becomes a degree-k
polynomial in lambda; strict hyperbolicity asks for k real simple roots,
and two symbols of consecutive orders interlace strictly when

    lam_1 < lam~_1 < lam_2 < ... < lam~_{k-1} < lam_k.

The checker samples seeded random directions, finds roots numerically,
and reports per-direction root lists plus aggregate verdicts.  These are
floating-point verdicts with an explicit tolerance, not algebraic proofs.
The zero-root condition verified on the lowest-order symbol (its lambda
constant term must vanish along every direction) is the structural
requirement the decay theory places on the lowest-order part of a
dissipative hyperbolic cascade.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class HomogeneousSymbol:
    """Terms (j, alpha, coeff) with j + |alpha| = order, in n variables."""

    order: int
    n: int
    terms: tuple[tuple[int, tuple[int, ...], float], ...]

    def __post_init__(self):
        if not (isinstance(self.order, int) and self.order >= 1):
            raise ValidationError("symbol order must be an integer >= 1")
        for j, alpha, coeff in self.terms:
            if len(alpha) != self.n:
                raise ValidationError("alpha length must equal n")
            if any((not isinstance(a, int)) or a < 0 for a in alpha):
                raise ValidationError("alpha entries must be non-negative ints")
            if j < 0 or j + sum(alpha) != self.order:
                raise ValidationError(
                    f"term (j={j}, alpha={alpha}) is not homogeneous of order {self.order}"
                )

    def lambda_coefficients(self, direction: np.ndarray) -> np.ndarray:
        """Coefficients of the lambda polynomial along xi', highest degree first."""
        coeffs = np.zeros(self.order + 1)
        for j, alpha, coeff in self.terms:
            v = coeff
            for d, a in enumerate(alpha):
                if a:
                    v *= direction[d] ** a
            coeffs[self.order - j] += v
        return coeffs


@dataclass(frozen=True)
class DirectionResult:
    direction: tuple[float, ...]
    roots: tuple[tuple[float, ...], ...]  # per symbol, sorted ascending
    hyperbolic: bool
    interlacing: bool
    zero_root: bool
    note: str | None = None

    def to_json(self) -> dict:
        return {
            "direction": list(self.direction),
            "roots": [list(r) for r in self.roots],
            "hyperbolic": self.hyperbolic,
            "interlacing": self.interlacing,
            "zero_root": self.zero_root,
            "note": self.note,
        }


@dataclass(frozen=True)
class InterlacingReport:
    strictly_hyperbolic: bool
    strictly_interlacing: bool
    zero_root_condition: bool
    directions: tuple[DirectionResult, ...]
    tol: float
    seed: int

    def to_json(self) -> dict:
        return {
            "strictly_hyperbolic": self.strictly_hyperbolic,
            "strictly_interlacing": self.strictly_interlacing,
            "zero_root_condition": self.zero_root_condition,
            "tol": self.tol,
            "seed": self.seed,
            "directions": [d.to_json() for d in self.directions],
        }


def _check_direction(symbols: Sequence[HomogeneousSymbol], direction: np.ndarray,
                     tol: float) -> DirectionResult:
    all_roots: list[np.ndarray] = []
    hyperbolic = True
    note = None
    for sym in symbols:
        coeffs = sym.lambda_coefficients(direction)
        scale = float(np.max(np.abs(coeffs)))
        if scale == 0.0 or abs(coeffs[0]) < tol * scale:
            # degree drops: a root escapes to infinity, not strictly hyperbolic
            hyperbolic = False
            note = f"order-{sym.order} symbol loses its top lambda power along this direction"
            all_roots.append(np.array([]))
            continue
        try:
            roots = np.roots(coeffs)
        except np.linalg.LinAlgError as exc:
            hyperbolic = False
            note = f"root finding failed on order-{sym.order} symbol: {exc}"
            all_roots.append(np.array([]))
            continue
        rscale = max(1.0, float(np.max(np.abs(roots))) if roots.size else 1.0)
        if np.any(np.abs(np.imag(roots)) > tol * rscale):
            hyperbolic = False
        real = np.sort(np.real(roots))
        if real.size > 1 and float(np.min(np.diff(real))) <= tol * rscale:
            hyperbolic = False
        all_roots.append(real)

    interlacing = hyperbolic
    if hyperbolic:
        for hi, lo in zip(all_roots[:-1], all_roots[1:]):
            if lo.size != hi.size - 1:
                interlacing = False
                break
            rscale = max(1.0, float(np.max(np.abs(hi))))
            ok = np.all(lo > hi[:-1] + tol * rscale) and np.all(lo < hi[1:] - tol * rscale)
            if not ok:
                interlacing = False
                break

    low = symbols[-1]
    coeffs = low.lambda_coefficients(direction)
    cscale = max(float(np.max(np.abs(coeffs))), 1e-300)
    zero_root = abs(coeffs[-1]) <= tol * cscale

    return DirectionResult(
        direction=tuple(float(d) for d in direction),
        roots=tuple(tuple(float(r) for r in arr) for arr in all_roots),
        hyperbolic=hyperbolic,
        interlacing=interlacing,
        zero_root=zero_root,
        note=note,
    )


def interlacing_check(symbols: Sequence[HomogeneousSymbol], directions: int = 8,
                      seed: int = 0, tol: float = 1e-7) -> InterlacingReport:
    """Sampled verdicts for a cascade of consecutive-order symbols.

    ``symbols`` must be ordered by strictly decreasing order, each exactly
    one below the previous (the pairs being interlaced).  The zero-root
    flag reports on the last (lowest-order) symbol.
    """
    if not symbols:
        raise ValidationError("need at least one symbol")
    n = symbols[0].n
    for a, b in zip(symbols[:-1], symbols[1:]):
        if b.n != n:
            raise ValidationError("symbols must share the space dimension")
        if b.order != a.order - 1:
            raise ValidationError("symbol orders must decrease by exactly 1")
    rng = np.random.default_rng(seed)
    results = []
    for _ in range(directions):
        v = rng.normal(size=n)
        norm = float(np.linalg.norm(v))
        while norm < 1e-12:
            v = rng.normal(size=n)
            norm = float(np.linalg.norm(v))
        results.append(_check_direction(symbols, v / norm, tol))
    return InterlacingReport(
        strictly_hyperbolic=all(r.hyperbolic for r in results),
        strictly_interlacing=all(r.interlacing for r in results),
        zero_root_condition=all(r.zero_root for r in results),
        directions=tuple(results),
        tol=tol,
        seed=seed,
    )
