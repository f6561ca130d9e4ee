"""Slowly-varying modulation factors mu and the nonlinearity F(s) = |s|^p mu(|s|).

The admissibility conditions a modulation must satisfy near zero are

  (i)   mu is non-decreasing,
  (ii)  mu is bounded on [0, eps_bar],
  (iii) F(s) = |s|^p mu(|s|) is convex,
  (iv)  F(0) = 0 and |F(y) - F(z)| <= C |y - z| (|y|^{p-1} + |z|^{p-1}) mu(|y| + |z|),

and the dividing line between existence and non-existence at the critical
power is the small-tau integral

    integral_0^{c0} mu(tau) / tau  d tau   (convergent vs divergent).

Families:

* ``constant``      mu == value.
* ``power``         mu(tau) = tau^epsilon on [0, tau*], frozen beyond.
* ``iterated_log``  mu(tau) = [prod_{i=0}^{k-1} (log^[i](-log tau))^{-1}]
                              * (log^[k](-log tau))^{-gamma}
  on (0, tau*], frozen beyond, with log^[0] = identity (so depth k = 0 is
  the plain (-log tau)^{-gamma}).  Its integral converges iff gamma > 1,
  with antiderivative (log^[k](-log c0))^{1-gamma} / (gamma - 1): under
  u = -log tau the integrand becomes d/du log^[k+1'ish] chains, i.e.
  substituting v = log^[k](u) turns the integral into integral v^{-gamma} dv.
* ``custom_table``  linear interpolation of sampled (tau, mu) pairs,
  constant beyond the last sample.  No exact classification is claimed.

The default extension point tau* is where every inner logarithm reaches 1:
tau* = exp(-exp^[k](1)) (= 1/e at depth 0).  Depths above 2 would push
tau* below the double-precision floor, so they are rejected.

Verification helpers sample the conditions rather than prove them: the
Lipschitz certificate reports the smallest empirical C over seeded sample
pairs together with monotonicity / derivative-bound / convexity witnesses,
never a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate

from .errors import NumericalError, ValidationError

_MU_FAMILIES = ("constant", "power", "iterated_log", "custom_table")

#: largest iterated-log depth representable in float64 (tau* underflows at 3)
MAX_DEPTH = 2


def iterated_exp(k: int, x: float = 1.0) -> float:
    for _ in range(k):
        x = math.exp(x)
    return x


def default_extension_point(depth: int) -> float:
    """Largest tau at which every inner log of the depth-k formula is >= 1."""
    return math.exp(-iterated_exp(depth))


@dataclass(frozen=True)
class MuSpec:
    """Declared modulation factor; evaluation lives in :func:`eval_mu`."""

    family: str
    value: float = 1.0
    epsilon: float | None = None
    depth: int = 0
    gamma: float = 1.0
    extension_point: float | None = None
    taus: tuple[float, ...] | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.family not in _MU_FAMILIES:
            raise ValidationError(f"unknown mu family {self.family!r}")
        if self.family == "power":
            if self.epsilon is None or not (self.epsilon > 0):
                raise ValidationError("power family needs epsilon > 0")
        if self.family == "iterated_log":
            if not (isinstance(self.depth, int) and 0 <= self.depth <= MAX_DEPTH):
                raise ValidationError(
                    f"iterated_log depth must be an integer in [0, {MAX_DEPTH}] "
                    "(deeper extension points underflow double precision)"
                )
            if not math.isfinite(self.gamma):
                raise ValidationError("gamma must be finite")
        if self.family == "custom_table":
            if not self.taus or not self.values or len(self.taus) != len(self.values):
                raise ValidationError("custom_table needs matching taus/values")
            if any(t < 0 for t in self.taus) or list(self.taus) != sorted(self.taus):
                raise ValidationError("custom_table taus must be sorted and >= 0")
        if self.extension_point is not None and not (self.extension_point > 0):
            raise ValidationError("extension_point must be > 0")

    @property
    def tau_star(self) -> float:
        if self.extension_point is not None:
            return self.extension_point
        if self.family == "iterated_log":
            return default_extension_point(self.depth)
        if self.family == "power":
            return 1.0
        if self.family == "custom_table":
            return float(self.taus[-1])
        return math.inf  # constant family has no extension

    def to_json(self) -> dict:
        doc: dict = {"family": self.family}
        if self.family == "constant":
            doc["value"] = self.value
        elif self.family == "power":
            doc["epsilon"] = self.epsilon
        elif self.family == "iterated_log":
            doc["depth"] = self.depth
            doc["gamma"] = self.gamma
        else:
            doc["taus"] = list(self.taus)
            doc["values"] = list(self.values)
        if self.extension_point is not None:
            doc["extension_point"] = self.extension_point
        return doc


_MU_KEYS = {
    "constant": {"family", "value", "extension_point"},
    "power": {"family", "epsilon", "extension_point"},
    "iterated_log": {"family", "depth", "gamma", "extension_point"},
    "custom_table": {"family", "taus", "values", "extension_point"},
}


def parse_mu(doc: Mapping) -> MuSpec:
    if not isinstance(doc, Mapping):
        raise ValidationError("mu must be a JSON object")
    family = doc.get("family")
    if family not in _MU_FAMILIES:
        raise ValidationError(f"unknown mu family {family!r}")
    unknown = set(doc) - _MU_KEYS[family]
    if unknown:
        raise ValidationError(f"unknown mu keys {sorted(unknown)}")
    kwargs: dict = {"family": family}
    for key in _MU_KEYS[family] - {"family"}:
        if key in doc:
            val = doc[key]
            if key in ("taus", "values"):
                val = tuple(float(v) for v in val)
            elif key == "depth":
                val = int(val)
            else:
                val = float(val)
            kwargs[key] = val
    return MuSpec(**kwargs)


def _iterated_log_value(mu: MuSpec, tau: np.ndarray) -> np.ndarray:
    """Evaluate the depth-k formula on 0 < tau <= tau*, fail-closed on bad logs."""
    u = -np.log(tau)
    out = np.ones_like(u)
    v = u
    for _ in range(mu.depth):
        if np.any(v <= 0):
            raise ValidationError(
                "inner log undefined on the requested range: extension_point is "
                "too large for this depth"
            )
        out = out / v
        v = np.log(v)
    if np.any(v <= 0):
        raise ValidationError(
            "inner log undefined on the requested range: extension_point is "
            "too large for this depth"
        )
    return out * v ** (-mu.gamma)


def eval_mu(mu: MuSpec, tau) -> np.ndarray | float:
    """mu(tau) for tau >= 0 (scalar or array); constant beyond tau*."""
    arr = np.asarray(tau, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise ValidationError("tau must be finite and >= 0")
    if mu.family == "constant":
        out = np.full_like(arr, mu.value)
    elif mu.family == "power":
        out = np.minimum(arr, mu.tau_star) ** mu.epsilon
    elif mu.family == "custom_table":
        out = np.interp(arr, mu.taus, mu.values)
    else:
        ts = mu.tau_star
        out = np.empty_like(arr)
        cap = np.minimum(arr, ts)
        pos = cap > 0
        if np.any(pos):
            out[pos] = _iterated_log_value(mu, cap[pos])
        if np.any(~pos):
            # tau = 0: every inner factor vanishes in the limit except the
            # depth-0, gamma <= 0 cases.
            if mu.depth == 0 and mu.gamma == 0:
                limit = 1.0
            elif mu.depth == 0 and mu.gamma < 0:
                limit = math.inf
            else:
                limit = 0.0
            out[~pos] = limit
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class NonlinearitySpec:
    """F(s) = |s|^p mu(|s|) with p >= 1."""

    p: float
    mu: MuSpec

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 1):
            raise ValidationError("nonlinearity power p must be finite and >= 1")

    def to_json(self) -> dict:
        return {"p": self.p, "mu": self.mu.to_json()}


def eval_F(nl: NonlinearitySpec, s) -> np.ndarray | float:
    """|s|^p mu(|s|), with F(0) pinned to 0 even when mu(0) is not finite."""
    arr = np.asarray(s, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    mag = np.abs(arr)
    out = np.zeros_like(mag)
    nz = mag > 0
    if np.any(nz):
        out[nz] = mag[nz] ** nl.p * np.asarray(eval_mu(nl.mu, mag[nz]))
    return float(out[0]) if scalar else out


# ----------------------------------------------------------------------
# sampled condition certificates


@dataclass(frozen=True)
class LipschitzCertificate:
    """Empirical check of conditions (i)-(iv) on [0, cap].

    ``constant`` is the smallest C that makes the difference bound hold on
    every sampled pair; a certificate is evidence, not a proof.  Witness
    fields hold the offending sample when a flag is False, else None.
    """

    constant: float
    worst_pair: tuple[float, float]
    monotone: bool
    monotone_witness: tuple[float, float] | None
    derivative_bound: bool
    derivative_witness: float | None
    convex: bool
    convex_witness: float | None
    cap: float
    n_samples: int
    seed: int

    def to_json(self) -> dict:
        return {
            "constant": self.constant,
            "worst_pair": list(self.worst_pair),
            "monotone": self.monotone,
            "monotone_witness": list(self.monotone_witness) if self.monotone_witness else None,
            "derivative_bound": self.derivative_bound,
            "derivative_witness": self.derivative_witness,
            "convex": self.convex,
            "convex_witness": self.convex_witness,
            "cap": self.cap,
            "n_samples": self.n_samples,
            "seed": self.seed,
        }


def lipschitz_certificate(nl: NonlinearitySpec, cap: float | None = None,
                          n_samples: int = 4000, seed: int = 0) -> LipschitzCertificate:
    """Sample the difference estimate and the pointwise sufficient conditions.

    Pairs are drawn uniformly from [0, cap]^2 (plus a log-spaced sweep near
    zero, where the modulation varies fastest); the reported constant is
    max |F(y)-F(z)| / (|y-z| (|y|^{p-1}+|z|^{p-1}) mu(|y|+|z|)).  The
    derivative bound checked is 0 <= tau mu'(tau) <= mu(tau) (sufficient
    for admissibility), by central differences.
    """
    if cap is None:
        cap = nl.mu.tau_star if math.isfinite(nl.mu.tau_star) else 1.0
    if not (cap > 0):
        raise ValidationError("cap must be > 0")
    rng = np.random.default_rng(seed)
    ys = rng.uniform(0.0, cap, n_samples)
    zs = rng.uniform(0.0, cap, n_samples)
    small = np.geomspace(cap * 1e-12, cap, 200)
    ys = np.concatenate([ys, small])
    zs = np.concatenate([zs, small * rng.uniform(0.0, 1.0, small.size)])

    Fy = np.asarray(eval_F(nl, ys))
    Fz = np.asarray(eval_F(nl, zs))
    mu_sum = np.asarray(eval_mu(nl.mu, np.abs(ys) + np.abs(zs)))
    denom = np.abs(ys - zs) * (np.abs(ys) ** (nl.p - 1) + np.abs(zs) ** (nl.p - 1)) * mu_sum
    ok = denom > 1e-300
    ratios = np.zeros_like(denom)
    ratios[ok] = np.abs(Fy - Fz)[ok] / denom[ok]
    worst = int(np.argmax(ratios))
    constant = float(ratios[worst])

    # (i) monotonicity on a mixed linear/log grid
    taus = np.unique(np.concatenate([
        np.linspace(0.0, cap, 800),
        np.geomspace(cap * 1e-12, cap, 400),
    ]))
    mu_vals = np.asarray(eval_mu(nl.mu, taus))
    drops = np.nonzero(np.diff(mu_vals) < -1e-12 * max(1.0, float(np.max(np.abs(mu_vals)))))[0]
    monotone = drops.size == 0
    monotone_witness = None if monotone else (float(taus[drops[0]]), float(taus[drops[0] + 1]))

    # sufficient condition 0 <= tau mu'(tau) <= mu(tau)
    inner = taus[(taus > cap * 1e-9) & (taus < cap * (1 - 1e-9))]
    h = np.minimum(inner * 1e-6, cap * 1e-7)
    dmu = (np.asarray(eval_mu(nl.mu, inner + h)) - np.asarray(eval_mu(nl.mu, inner - h))) / (2 * h)
    mu_inner = np.asarray(eval_mu(nl.mu, inner))
    scale = np.maximum(mu_inner, 1e-300)
    bad = (inner * dmu < -1e-6 * scale) | (inner * dmu > mu_inner + 1e-6 * scale)
    derivative_bound = not bool(np.any(bad))
    derivative_witness = None if derivative_bound else float(inner[np.nonzero(bad)[0][0]])

    # (iii) convexity of F via second differences on [0, cap]
    ss = np.linspace(0.0, cap, 1201)
    Fs = np.asarray(eval_F(nl, ss))
    d2 = Fs[:-2] - 2 * Fs[1:-1] + Fs[2:]
    fscale = max(float(np.max(np.abs(Fs))), 1e-300)
    cbad = np.nonzero(d2 < -1e-9 * fscale)[0]
    convex = cbad.size == 0
    convex_witness = None if convex else float(ss[cbad[0] + 1])

    return LipschitzCertificate(
        constant=constant,
        worst_pair=(float(ys[worst]), float(zs[worst])),
        monotone=monotone,
        monotone_witness=monotone_witness,
        derivative_bound=derivative_bound,
        derivative_witness=derivative_witness,
        convex=convex,
        convex_witness=convex_witness,
        cap=float(cap),
        n_samples=int(ys.size),
        seed=seed,
    )


# ----------------------------------------------------------------------
# small-tau integral


@dataclass(frozen=True)
class IntegralVerdict:
    """Verdict on integral_0^{c0} mu(tau)/tau dtau.

    ``classification`` is exact for the constructive families ('convergent'
    / 'divergent') and 'unknown' for tables.  ``quadrature_value`` is the
    full improper integral when it exists; ``partial_integrals`` are the
    truncations at tau = c0 * 10^{-k}, whose growth feeds the label.
    """

    classification: str
    c0: float
    closed_form_value: float | None
    quadrature_value: float | None
    partial_integrals: tuple[float, ...]
    growth_label: str
    fitted_slope: float | None
    quadrature_tol: float

    def to_json(self) -> dict:
        return {
            "classification": self.classification,
            "c0": self.c0,
            "closed_form_value": self.closed_form_value,
            "quadrature_value": self.quadrature_value,
            "partial_integrals": list(self.partial_integrals),
            "growth_label": self.growth_label,
            "fitted_slope": self.fitted_slope,
            "quadrature_tol": self.quadrature_tol,
        }


def iterated_log_antiderivative(depth: int, gamma: float, c0: float) -> float:
    """Exact value of the depth-k integral on (0, c0] for gamma > 1.

    u = -log tau maps the integral to one of d(log^[k] u) weighted by
    (log^[k] u)^{-gamma}, so the antiderivative telescopes to
    (log^[k](-log c0))^{1-gamma} / (gamma - 1).
    """
    if gamma <= 1:
        raise ValidationError("closed form exists only for gamma > 1")
    v = -math.log(c0)
    for _ in range(depth):
        v = math.log(v)
    return v ** (1.0 - gamma) / (gamma - 1.0)


def _quad_log_sub(mu: MuSpec, u_lo: float, u_hi: float, tol: float) -> float:
    """integral of mu(e^{-u}) du, the substituted integrand (u_hi may be inf)."""
    val, err = integrate.quad(lambda u: eval_mu(mu, math.exp(-u)), u_lo, u_hi,
                              epsabs=tol, epsrel=tol * 10, limit=400)
    if not math.isfinite(val) or err > max(tol * 50, abs(val) * 1e-6):
        raise NumericalError(
            f"quadrature did not converge on u-window [{u_lo}, {u_hi}] "
            f"(value {val}, error estimate {err})"
        )
    return val


def _quad_iterated_tail(mu: MuSpec, u0: float, tol: float) -> float:
    """Improper integral for the iterated_log family, gamma > 1.

    Integrating mu(e^{-u}) in u truncates where tau = e^{-u} underflows
    double precision (u ~ 745), and for depth >= 1 the tail beyond still
    carries O(1/log^[depth] u) mass, so the naive quadrature is silently
    wrong by percents.  Substituting w = log^[depth](u) cancels the inner
    log factors against the Jacobian exactly and leaves w^{-gamma}, whose
    tail the infinite-interval transform handles to full accuracy.
    """
    w0 = u0
    for _ in range(mu.depth):
        w0 = math.log(w0)
    val, err = integrate.quad(lambda w: w ** (-mu.gamma), w0, math.inf,
                              epsabs=tol, epsrel=tol * 10, limit=400)
    if not math.isfinite(val) or err > max(tol * 50, abs(val) * 1e-6):
        raise NumericalError(
            f"tail quadrature did not converge from w = {w0} "
            f"(value {val}, error estimate {err})"
        )
    return val


def integral_condition(mu: MuSpec, c0: float, levels: int = 8,
                       tol: float = 1e-9) -> IntegralVerdict:
    """Classify and measure the small-tau integral up to c0 (0 < c0 <= tau*)."""
    if not (0 < c0 <= mu.tau_star):
        raise ValidationError(
            f"c0 must lie in (0, tau*]; got c0 = {c0}, tau* = {mu.tau_star}"
        )
    if mu.family == "constant":
        classification = "divergent" if mu.value > 0 else "convergent"
        closed = 0.0 if mu.value == 0 else None
    elif mu.family == "power":
        classification = "convergent"
        closed = c0**mu.epsilon / mu.epsilon
    elif mu.family == "iterated_log":
        classification = "convergent" if mu.gamma > 1 else "divergent"
        closed = iterated_log_antiderivative(mu.depth, mu.gamma, c0) if mu.gamma > 1 else None
    else:
        classification = "unknown"
        closed = None

    u0 = -math.log(c0)
    partials = []
    running = 0.0
    for k in range(1, levels + 1):
        running += _quad_log_sub(mu, u0 + (k - 1) * math.log(10), u0 + k * math.log(10), tol)
        partials.append(running)

    quadrature_value = None
    if classification == "convergent":
        if mu.family == "iterated_log":
            quadrature_value = _quad_iterated_tail(mu, u0, tol)
        else:
            quadrature_value = _quad_log_sub(mu, u0, math.inf, tol)

    # Growth label from the fitted local exponent of mu(e^{-u}) in u: the
    # increments behave like u^s * log 10, and s <= -1 is the convergence line.
    diffs = np.diff([0.0] + partials)
    us = u0 + (np.arange(1, levels + 1) - 0.5) * math.log(10)
    fitted_slope = None
    if np.all(diffs > 0):
        slope, _ = np.polyfit(np.log(us), np.log(diffs), 1)
        fitted_slope = float(slope)
        if fitted_slope < -1.05:
            growth_label = "saturating"
        elif fitted_slope <= -0.95:
            growth_label = "marginal"
        else:
            growth_label = "growing"
    else:
        growth_label = "saturating" if np.all(diffs <= tol * 100) else "irregular"

    return IntegralVerdict(
        classification=classification,
        c0=float(c0),
        closed_form_value=closed,
        quadrature_value=quadrature_value,
        partial_integrals=tuple(float(p) for p in partials),
        growth_label=growth_label,
        fitted_slope=fitted_slope,
        quadrature_tol=tol,
    )
