"""Constant-coefficient evolution operators and their Fourier symbols.

An operator here is

    d_t^m u + sum_{j=0}^{m-1} P_j(d_x) d_t^j u,

with the top order monic (P_m = 1, never stored).  Each lower level j
carries a list of spatial terms, either plain derivative monomials
``c * d_x^alpha`` or fractional Laplacian powers ``c * (-Lap)^p``.  The
module owns parsing/serialization of the operator JSON document, exact
bookkeeping of the spatial orders that drive the critical-exponent
computation, and evaluation of the Fourier multipliers

    P_j(i xi) = sum_alpha c_{j,alpha} (i xi)^alpha + sum c |xi|^{2p},

from which per-frequency companion matrices are assembled for the solver
and the decay verifier.

Exact quantities (term orders, fractional powers) are kept as
``fractions.Fraction``; coefficients are floats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError

OPERATOR_SCHEMA_VERSION = 1

_TERM_KINDS = ("monomial", "fractional_laplacian")


def as_fraction(value) -> Fraction:
    """Coerce ints, strings like '7/3', and exactly-representable floats."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValidationError("boolean is not a rational number")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"cannot parse rational from {value!r}") from exc
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValidationError("rational value must be finite")
        return Fraction(value).limit_denominator(10**9)
    raise ValidationError(f"cannot parse rational from {value!r}")


def format_fraction(x: Fraction) -> str:
    """Canonical string form: integer when the denominator is 1."""
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class SpatialTerm:
    """One additive term of a level symbol P_j(d_x).

    kind 'monomial' uses ``alpha`` (length-n tuple of non-negative ints)
    and contributes ``coeff * (i xi)^alpha``; kind 'fractional_laplacian'
    uses ``power`` (non-negative rational) and contributes
    ``coeff * |xi|^(2 power)``, i.e. the multiplier of ``coeff * (-Lap)^power``.
    """

    kind: str
    coeff: float
    alpha: tuple[int, ...] | None = None
    power: Fraction | None = None

    def __post_init__(self):
        if self.kind not in _TERM_KINDS:
            raise ValidationError(f"unknown term kind {self.kind!r}")
        if not math.isfinite(self.coeff):
            raise ValidationError("term coefficient must be finite")
        if self.kind == "monomial":
            if self.alpha is None or self.power is not None:
                raise ValidationError("monomial term needs alpha and no power")
            if any((not isinstance(a, int)) or a < 0 for a in self.alpha):
                raise ValidationError("alpha entries must be non-negative ints")
        else:
            if self.power is None or self.alpha is not None:
                raise ValidationError("fractional term needs power and no alpha")
            if self.power < 0:
                raise ValidationError("fractional Laplacian power must be >= 0")

    @property
    def order(self) -> Fraction:
        """Spatial differentiation order: |alpha|, or 2*power."""
        if self.kind == "monomial":
            return Fraction(sum(self.alpha))
        return 2 * self.power

    def sort_key(self):
        if self.kind == "monomial":
            return (0, tuple(self.alpha), Fraction(0))
        return (1, (), self.power)

    def to_json(self) -> dict:
        if self.kind == "monomial":
            return {"kind": "monomial", "alpha": list(self.alpha), "coeff": self.coeff}
        return {
            "kind": "fractional_laplacian",
            "power": format_fraction(self.power),
            "coeff": self.coeff,
        }


def _parse_term(doc: Mapping, n: int) -> SpatialTerm:
    if not isinstance(doc, Mapping):
        raise ValidationError("term must be a JSON object")
    kind = doc.get("kind")
    if kind == "monomial":
        allowed = {"kind", "alpha", "coeff"}
    elif kind == "fractional_laplacian":
        allowed = {"kind", "power", "coeff"}
    else:
        raise ValidationError(f"unknown term kind {kind!r}")
    unknown = set(doc) - allowed
    if unknown:
        raise ValidationError(f"unknown term keys {sorted(unknown)}")
    if "coeff" not in doc:
        raise ValidationError("term is missing 'coeff'")
    coeff = float(doc["coeff"])
    if kind == "monomial":
        alpha = doc.get("alpha")
        if not isinstance(alpha, Sequence) or isinstance(alpha, str):
            raise ValidationError("monomial 'alpha' must be a list")
        if len(alpha) != n:
            raise ValidationError(
                f"alpha has length {len(alpha)}, expected the space dimension {n}"
            )
        return SpatialTerm(kind="monomial", coeff=coeff, alpha=tuple(int(a) for a in alpha))
    return SpatialTerm(kind="fractional_laplacian", coeff=coeff, power=as_fraction(doc["power"]))


def _merge_terms(terms: Iterable[SpatialTerm]) -> tuple[SpatialTerm, ...]:
    # Duplicate monomials / equal fractional powers collapse; exact zeros drop.
    acc: dict = {}
    for t in terms:
        key = ("m", t.alpha) if t.kind == "monomial" else ("f", t.power)
        if key in acc:
            old = acc[key]
            acc[key] = SpatialTerm(kind=t.kind, coeff=old.coeff + t.coeff,
                                   alpha=t.alpha, power=t.power)
        else:
            acc[key] = t
    kept = [t for t in acc.values() if t.coeff != 0.0]
    return tuple(sorted(kept, key=SpatialTerm.sort_key))


@dataclass(frozen=True)
class EvolutionOperator:
    """Monic evolution operator d_t^m + sum_{j<m} P_j(d_x) d_t^j in R^n.

    ``levels`` maps a time-derivative level j in [0, m-1] to its spatial
    terms; levels absent from the map are identically zero.  The top level
    is implicit and monic: attempts to store level m are rejected so a
    non-monic operator must be divided through by its top coefficient
    before entering the system.
    """

    m: int
    n: int
    levels: Mapping[int, tuple[SpatialTerm, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not (isinstance(self.m, int) and self.m >= 1):
            raise ValidationError("time order m must be an integer >= 1")
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ValidationError("space dimension n must be an integer >= 1")
        clean: dict[int, tuple[SpatialTerm, ...]] = {}
        for j, terms in self.levels.items():
            if not (isinstance(j, int) and 0 <= j < self.m):
                if j == self.m:
                    raise ValidationError(
                        f"level {j} is the top order and is implicitly monic; "
                        "divide the operator by its top coefficient instead"
                    )
                raise ValidationError(f"level {j} outside [0, {self.m - 1}]")
            for t in terms:
                if t.kind == "monomial" and len(t.alpha) != self.n:
                    raise ValidationError("monomial alpha length must equal n")
            merged = _merge_terms(terms)
            if merged:
                clean[j] = merged
        object.__setattr__(self, "levels", dict(sorted(clean.items())))

    # ------------------------------------------------------------------
    # exact order bookkeeping

    def order_set(self) -> list[int]:
        """Levels with a nonzero symbol, always including the top order m."""
        return sorted(set(self.levels) | {self.m})

    def minimal_order(self, j: int) -> Fraction:
        """Lowest spatial differentiation order present at level j."""
        if j == self.m:
            return Fraction(0)
        if j not in self.levels:
            raise ValidationError(f"level {j} is not in the order set {self.order_set()}")
        return min(t.order for t in self.levels[j])

    def spatial_order(self, j: int) -> Fraction:
        """Highest spatial differentiation order present at level j."""
        if j == self.m:
            return Fraction(0)
        if j not in self.levels:
            raise ValidationError(f"level {j} is not in the order set {self.order_set()}")
        return max(t.order for t in self.levels[j])

    def max_spatial_order(self) -> Fraction:
        return max((self.spatial_order(j) for j in self.levels), default=Fraction(0))

    def constant_coefficient(self, j: int) -> float:
        """Coefficient of the zero-order part of P_j (0.0 when absent)."""
        if j == self.m:
            return 1.0
        total = 0.0
        for t in self.levels.get(j, ()):
            if t.order == 0:
                total += t.coeff
        return total

    # ------------------------------------------------------------------
    # Fourier side

    def multiplier(self, j: int, xi: Sequence[np.ndarray]) -> np.ndarray:
        """Evaluate P_j(i xi) on arrays of frequency components.

        ``xi`` is a length-n sequence of broadcastable real arrays.  The
        result is complex; its conjugate is the multiplier of the formal
        adjoint level (real coefficients), which the weak-residual check
        relies on.
        """
        if len(xi) != self.n:
            raise ValidationError("xi must supply one component array per dimension")
        shape = np.broadcast(*[np.asarray(x) for x in xi]).shape
        if j == self.m:
            return np.ones(shape, dtype=complex)
        out = np.zeros(shape, dtype=complex)
        terms = self.levels.get(j, ())
        frac = [t for t in terms if t.kind == "fractional_laplacian"]
        if frac:
            rho2 = sum(np.asarray(x, dtype=float) ** 2 for x in xi)
            for t in frac:
                out += t.coeff * rho2 ** float(t.power)
        for t in terms:
            if t.kind != "monomial":
                continue
            val = np.full(shape, t.coeff, dtype=complex)
            for d, a in enumerate(t.alpha):
                if a:
                    val = val * (1j * np.asarray(xi[d], dtype=float)) ** a
            out += val
        return out

    def companion(self, xi: Sequence[np.ndarray]) -> np.ndarray:
        """Per-frequency companion matrix A(xi), shape (..., m, m).

        The state v = (u, d_t u, ..., d_t^{m-1} u)^ in Fourier satisfies
        v' = A v + e_{m-1} F^; the last row is -(P_0, ..., P_{m-1})(i xi).
        Real operator coefficients give A(-xi) = conj(A(xi)), which keeps
        physical fields real under propagation.
        """
        mults = [self.multiplier(j, xi) for j in range(self.m)]
        shape = mults[0].shape if self.m else ()
        A = np.zeros(shape + (self.m, self.m), dtype=complex)
        for i in range(self.m - 1):
            A[..., i, i + 1] = 1.0
        for j in range(self.m):
            A[..., self.m - 1, j] = -mults[j]
        return A

    # ------------------------------------------------------------------
    # radial structure

    def laplacian_decomposition(self, j: int) -> dict[Fraction, float] | None:
        """Write P_j as sum_k c_k (-Lap)^{p_k} if possible, else None.

        Fractional terms qualify directly.  Monomial terms qualify as a
        group when, for each total order 2k, they reproduce the exact
        multinomial expansion (-Lap)^k = (-1)^k sum_{|beta|=k} (k!/beta!) d^{2beta}
        for a single scalar coefficient.
        """
        if j == self.m:
            return {Fraction(0): 1.0}
        decomp: dict[Fraction, float] = {}
        mono_groups: dict[int, list[SpatialTerm]] = {}
        for t in self.levels.get(j, ()):
            if t.kind == "fractional_laplacian":
                decomp[t.power] = decomp.get(t.power, 0.0) + t.coeff
                continue
            total = sum(t.alpha)
            if total % 2:
                return None
            mono_groups.setdefault(total // 2, []).append(t)
        for k, group in mono_groups.items():
            if any(a % 2 for t in group for a in t.alpha):
                return None
            betas = {tuple(a // 2 for a in t.alpha): t.coeff for t in group}
            want = _multinomial_betas(k, self.n)
            if set(betas) != set(want):
                return None
            scale = None
            for beta, coeff in betas.items():
                c = coeff / ((-1) ** k * want[beta])
                if scale is None:
                    scale = c
                elif not math.isclose(c, scale, rel_tol=1e-12, abs_tol=0.0):
                    return None
            decomp[Fraction(k)] = decomp.get(Fraction(k), 0.0) + scale
        return {p: c for p, c in decomp.items() if c != 0.0}

    def is_radial(self) -> bool:
        return all(self.laplacian_decomposition(j) is not None for j in self.levels)

    def radial_multiplier(self, j: int, rho: np.ndarray) -> np.ndarray:
        """P_j(i xi) as a function of rho = |xi| for radial operators."""
        decomp = self.laplacian_decomposition(j)
        if decomp is None:
            raise ValidationError(f"level {j} is not a sum of Laplacian powers")
        rho = np.asarray(rho, dtype=float)
        out = np.zeros_like(rho)
        for p, c in decomp.items():
            out = out + c * rho ** float(2 * p)
        return out

    def radial_companion(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        A = np.zeros(rho.shape + (self.m, self.m), dtype=complex)
        for i in range(self.m - 1):
            A[..., i, i + 1] = 1.0
        for j in range(self.m):
            A[..., self.m - 1, j] = -self.radial_multiplier(j, rho)
        return A

    # ------------------------------------------------------------------
    # serialization

    def to_json(self) -> dict:
        return {
            "schema_version": OPERATOR_SCHEMA_VERSION,
            "m": self.m,
            "n": self.n,
            "levels": {
                str(j): [t.to_json() for t in terms] for j, terms in self.levels.items()
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"


def _multinomial_betas(k: int, n: int) -> dict[tuple[int, ...], int]:
    """Multi-indices |beta| = k with multinomial weights k!/beta!."""
    out: dict[tuple[int, ...], int] = {}

    def rec(prefix: tuple[int, ...], remaining: int):
        if len(prefix) == n - 1:
            beta = prefix + (remaining,)
            w = math.factorial(k)
            for b in beta:
                w //= math.factorial(b)
            out[beta] = w
            return
        for v in range(remaining + 1):
            rec(prefix + (v,), remaining - v)

    rec((), k)
    return out


def parse_operator(doc: Mapping) -> EvolutionOperator:
    """Validate and build an operator from its JSON document (fail-closed)."""
    if not isinstance(doc, Mapping):
        raise ValidationError("operator document must be a JSON object")
    allowed = {"schema_version", "m", "n", "levels"}
    unknown = set(doc) - allowed
    if unknown:
        raise ValidationError(f"unknown operator keys {sorted(unknown)}")
    version = doc.get("schema_version", OPERATOR_SCHEMA_VERSION)
    if version != OPERATOR_SCHEMA_VERSION:
        raise ValidationError(f"unsupported operator schema_version {version!r}")
    for key in ("m", "n"):
        if key not in doc or not isinstance(doc[key], int) or isinstance(doc[key], bool):
            raise ValidationError(f"operator needs integer {key!r}")
    m, n = doc["m"], doc["n"]
    levels_doc = doc.get("levels", {})
    if not isinstance(levels_doc, Mapping):
        raise ValidationError("'levels' must map level -> term list")
    levels: dict[int, tuple[SpatialTerm, ...]] = {}
    for key, terms_doc in levels_doc.items():
        try:
            j = int(key)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"level key {key!r} is not an integer") from exc
        if j == m:
            raise ValidationError(
                f"level {m} is the top order and is implicitly monic; "
                "divide the operator by its top coefficient instead"
            )
        if not isinstance(terms_doc, Sequence) or isinstance(terms_doc, str):
            raise ValidationError(f"level {key!r} must hold a list of terms")
        levels[j] = tuple(_parse_term(t, n) for t in terms_doc)
    return EvolutionOperator(m=m, n=n, levels=levels)


def load_operator(path) -> EvolutionOperator:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"operator file {path}: {exc}") from exc
    return parse_operator(doc)


# ----------------------------------------------------------------------
# common builders


def laplacian_terms(n: int, power: int, coeff: float) -> list[SpatialTerm]:
    """Monomial expansion of coeff * (-Lap)^power in n dimensions."""
    if power == 0:
        return [SpatialTerm(kind="monomial", coeff=coeff, alpha=(0,) * n)]
    out = []
    for beta, w in _multinomial_betas(power, n).items():
        alpha = tuple(2 * b for b in beta)
        out.append(SpatialTerm(kind="monomial", coeff=coeff * ((-1) ** power) * w, alpha=alpha))
    return out


def fractional_term(power, coeff: float) -> SpatialTerm:
    return SpatialTerm(kind="fractional_laplacian", coeff=coeff, power=as_fraction(power))


def sigma_evolution(n: int, sigma, delta, damping_coeff: float = 1.0,
                    elastic_coeff: float = 1.0) -> EvolutionOperator:
    """d_t^2 u + (-Lap)^delta d_t u + (-Lap)^sigma u as fractional terms."""
    return EvolutionOperator(
        m=2,
        n=n,
        levels={
            0: (fractional_term(sigma, elastic_coeff),),
            1: (fractional_term(delta, damping_coeff),),
        },
    )


def damped_wave(n: int) -> EvolutionOperator:
    """Classical damped wave d_t^2 u + d_t u - Lap u with monomial terms."""
    return EvolutionOperator(
        m=2,
        n=n,
        levels={
            0: tuple(laplacian_terms(n, 1, 1.0)),
            1: (SpatialTerm(kind="monomial", coeff=1.0, alpha=(0,) * n),),
        },
    )


def damped_klein_gordon(n: int, damping: float, mass: float, sigma=1) -> EvolutionOperator:
    """d_t^2 u + (-Lap)^sigma u + 2a d_t u + mass^2 u."""
    return EvolutionOperator(
        m=2,
        n=n,
        levels={
            0: (fractional_term(sigma, 1.0), fractional_term(0, mass**2)),
            1: (fractional_term(0, 2.0 * damping),),
        },
    )
