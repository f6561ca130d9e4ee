"""Linear decay verification: whole-space L2 curves, rate fits, verdicts.

For radial operators (every level a sum of Laplacian powers) the linear
solution with data f in the top layer has the exact Fourier representation
u^(t, xi) = [exp(t A(|xi|))]_{layer, m-1} f^(|xi|), so whole-space norms at
q = 2 reduce to a one-dimensional Plancherel integral

    ||d_t^layer u(t)||_2^2 = c_n * integral_0^inf |K(t,rho)|^2 |f^(rho)|^2 rho^{n-1} drho,

with c_n = |S^{n-1}| / (2 pi)^n.  The integrand develops a peak near
rho ~ t^{-1/(2(sigma-delta))}-type scales at late times, so the quadrature
uses geometrically graded Gauss-Legendre panels reaching down to 1e-8 of
the tail cutoff, doubled until the curve is stable.

Rate fitting is deliberately dumb and transparent: least squares on
log-norm against log(1+t) (power laws) or against t (exponential decay),
with an RMS flag for "this was not a power law at all".  Targets come
from the caller (1/p_c from the exponent module, or a closed-form rate);
nothing here derives its own target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import NumericalError, ValidationError
from .operators import EvolutionOperator
from . import solver as _solver


@dataclass(frozen=True)
class RadialProfile:
    """Radial data shape on whole space, known through its Fourier transform.

    The gaussian is L1-normalized (unit mass): f^(rho) = exp(-w^2 rho^2 / 2),
    f^(0) = 1.  ``l2_norm`` reports ||f||_2 for reference alongside.
    """

    kind: str = "gaussian"
    width: float = 1.0

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValidationError("only the gaussian radial profile is built in")
        if not (self.width > 0):
            raise ValidationError("width must be > 0")

    def fourier(self, rho: np.ndarray) -> np.ndarray:
        return np.exp(-0.5 * (self.width * np.asarray(rho, dtype=float)) ** 2)

    def l2_norm(self, n: int) -> float:
        # ||f||_2^2 = (2 pi)^{-n} integral |f^|^2 = (4 pi w^2)^{-n/2}
        return (4.0 * math.pi * self.width**2) ** (-n / 4.0)

    def tail_cutoff(self) -> float:
        # |f^(rho)|^2 = exp(-(w rho)^2) < 1e-40 beyond this
        return math.sqrt(40.0 * math.log(10.0)) / self.width


def sphere_area(n: int) -> float:
    """Surface measure of S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def _mode_weights(A: np.ndarray, layer: int, gap_tol: float = 1e-8):
    """Eigen-decompose one companion matrix; None when nearly defective."""
    lam, V = np.linalg.eig(A)
    scale = max(float(np.max(np.abs(lam))), 1.0)
    gaps = np.abs(lam[:, None] - lam[None, :]) + np.eye(lam.size) * scale
    if float(np.min(gaps)) < gap_tol * scale:
        return None
    Vinv = np.linalg.inv(V)
    w = V[layer, :] * Vinv[:, A.shape[0] - 1]
    return lam, w


def _kernel_matrix(op: EvolutionOperator, rhos: np.ndarray, times: np.ndarray,
                   layer: int) -> np.ndarray:
    """K[i, j] = [exp(times_j A(rhos_i))]_{layer, m-1}."""
    m = op.m
    A_all = op.radial_companion(rhos)
    K = np.empty((rhos.size, times.size), dtype=complex)
    for i in range(rhos.size):
        mw = _mode_weights(A_all[i], layer)
        if mw is not None:
            lam, w = mw
            K[i] = np.exp(np.outer(times, lam)) @ w
        else:
            # near-defective eigensystem: fall back to one expm per time
            for j, t in enumerate(times):
                K[i, j] = expm(t * A_all[i])[layer, m - 1]
    return K


def _panel_nodes(P: float, panels_per_decade: int, nodes_per_panel: int):
    """Geometrically graded Gauss-Legendre nodes on (0, P]."""
    edges = [0.0]
    lo = P * 1e-8
    count = int(math.ceil(8 * panels_per_decade))
    edges.extend(np.geomspace(lo, P, count + 1))
    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes_per_panel)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        nodes.append(a + half * (gl_x + 1.0))
        weights.append(half * gl_w)
    return np.concatenate(nodes), np.concatenate(weights)


def l2_decay_curve(op: EvolutionOperator, profile: RadialProfile,
                   times: Sequence[float], layer: int = 0,
                   qtol: float = 1e-8) -> np.ndarray:
    """||d_t^layer u_lin(t)||_{L2(R^n)} at the given times (exact linear flow).

    Requires a radial operator.  The panel count doubles until the whole
    curve moves by less than ``qtol`` relatively, and the tail beyond the
    cutoff is certified negligible by the gaussian data weight.
    """
    if not op.is_radial():
        raise ValidationError("whole-space decay needs a radial operator")
    if not (0 <= layer < op.m):
        raise ValidationError("layer out of range")
    times = np.asarray(list(times), dtype=float)
    if np.any(times < 0):
        raise ValidationError("times must be >= 0")
    n = op.n
    cn = sphere_area(n) / (2.0 * math.pi) ** n
    P = profile.tail_cutoff()

    # curves can be legitimately ~0 (e.g. layer 0 at t = 0); anything below
    # roundoff of the linear flow applied to the data counts as stable
    floor = 1e-13 * profile.l2_norm(n)
    prev = None
    for ppd in (2, 4, 8, 16, 32):
        rhos, wts = _panel_nodes(P, ppd, 16)
        K = _kernel_matrix(op, rhos, times, layer)
        dens = (np.abs(K) ** 2) * (profile.fourier(rhos) ** 2 * rhos ** (n - 1))[:, None]
        vals = np.sqrt(np.maximum(cn * (wts[:, None] * dens).sum(axis=0), 0.0))
        if prev is not None:
            scale = np.maximum(np.max(prev), 1e-300)
            if float(np.max(np.abs(vals - prev))) <= qtol * scale + floor:
                return vals
        prev = vals
    raise NumericalError("decay quadrature did not stabilize under panel doubling")


def spectral_gap(op: EvolutionOperator, rho_max: float | None = None,
                 samples: int = 4001) -> float:
    """c1 = -sup_rho max_i Re lambda_i(A(rho)) over a dense radial grid."""
    if not op.is_radial():
        raise ValidationError("spectral gap scan needs a radial operator")
    if rho_max is None:
        rho_max = 10.0
    rhos = np.linspace(0.0, rho_max, samples)
    A = op.radial_companion(rhos)
    lam = np.linalg.eigvals(A)
    worst = float(np.max(np.real(lam)))
    return -worst


@dataclass(frozen=True)
class DecayFit:
    """Least-squares decay fit over a time window.

    slope is d log(norm) / d log(1+t) for kind='power' and
    d log(norm) / dt for kind='exponential'.  ``clean`` flags whether the
    model explains the window (RMS of log residuals below ``rms_tol``).
    """

    kind: str
    slope: float
    intercept: float
    rms: float
    n_samples: int
    window: tuple[float, float]
    clean: bool
    target: float | None = None
    tol: float | None = None
    verdict: str | None = None

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "slope": self.slope,
            "intercept": self.intercept,
            "rms": self.rms,
            "n_samples": self.n_samples,
            "window": list(self.window),
            "clean": self.clean,
            "target": self.target,
            "tol": self.tol,
            "verdict": self.verdict,
        }


def _fit(times, values, window, transform, kind, rms_tol, target, tol, mode) -> DecayFit:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    sel = (times >= lo) & (times <= hi)
    if int(np.sum(sel)) < 10:
        raise ValidationError(
            f"need >= 10 samples inside the window [{lo}, {hi}]; got {int(np.sum(sel))}"
        )
    tt, vv = times[sel], values[sel]
    if np.any(vv <= 0):
        raise NumericalError("norm values must be positive for a log fit")
    x = transform(tt)
    y = np.log(vv)
    slope, intercept = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    clean = rms <= rms_tol
    verdict = None
    if target is not None:
        if mode == "two-sided":
            verdict = "pass" if abs(slope - target) <= tol else "fail"
        else:  # at-least-as-fast: slope must not exceed target + tol
            verdict = "pass" if slope <= target + tol else "fail"
    return DecayFit(kind=kind, slope=float(slope), intercept=float(intercept),
                    rms=rms, n_samples=int(np.sum(sel)), window=(float(lo), float(hi)),
                    clean=clean, target=target, tol=tol, verdict=verdict)


def fit_decay(times, values, window, target: float | None = None,
              tol: float = 0.05, rms_tol: float = 0.05,
              mode: str = "two-sided") -> DecayFit:
    """Power-law fit log(norm) ~ slope * log(1+t); verdict against a target."""
    return _fit(times, values, window, lambda t: np.log1p(t), "power",
                rms_tol, target, tol, mode)


def fit_exponential(times, values, window, target: float | None = None,
                    tol: float = 0.05, rms_tol: float = 0.05,
                    mode: str = "two-sided") -> DecayFit:
    """Exponential fit log(norm) ~ slope * t (slope = -rate)."""
    return _fit(times, values, window, lambda t: t, "exponential",
                rms_tol, target, tol, mode)


@dataclass(frozen=True)
class HypothesisEntry:
    q: float
    fit: DecayFit
    # the fitted curve, for CSV emission; not part of the JSON verdict
    times: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def to_json(self) -> dict:
        return {"q": self.q, "fit": self.fit.to_json()}


@dataclass(frozen=True)
class HypothesisReport:
    """Per-q verdicts for the linear-decay premise behind global existence.

    The premise asks ||d_t^ell u_lin(t)||_q <= C (1+t)^{-1/p_c} for q from
    p_c up to infinity; each entry checks 'fitted decay at least as fast as
    -1/p_c' on its window.  Whole-space mode supports q = 2 only
    (Plancherel); torus mode fits solver norms and inherits the box
    horizon caveat.
    """

    mode: str
    p_c: float
    entries: tuple[HypothesisEntry, ...]
    notes: tuple[str, ...] = ()

    @property
    def all_pass(self) -> bool:
        return all(e.fit.verdict == "pass" for e in self.entries)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "p_c": self.p_c,
            "entries": [e.to_json() for e in self.entries],
            "all_pass": self.all_pass,
            "notes": list(self.notes),
        }


def check_linear_decay_hypothesis(
    op: EvolutionOperator, ell: int, p_c: float, q_list: Sequence[float],
    profile: RadialProfile | None = None, mode: str = "whole-space",
    window: tuple[float, float] = (1e2, 1e4), n_times: int = 40,
    tol: float = 0.05, torus_grid: "_solver.Grid | None" = None,
    torus_dt: float = 0.05, targets: Mapping[float, float] | None = None,
    fit_mode: str = "at-least-as-fast",
) -> HypothesisReport:
    """Fit ||d_t^ell u_lin||_q on the window and compare against -1/p_c.

    ``targets`` overrides the -1/p_c target per q (use it to check a known
    exact rate two-sided instead of the one-sided premise).
    """
    if not (p_c > 0):
        raise ValidationError("p_c must be > 0")
    targets = dict(targets or {})

    def target_for(q: float) -> float:
        return float(targets.get(q, -1.0 / p_c))

    notes: list[str] = []
    entries: list[HypothesisEntry] = []
    times = np.geomspace(max(window[0], 1e-3), window[1], n_times)

    if mode == "whole-space":
        profile = profile or RadialProfile()
        for q in q_list:
            if q != 2:
                raise ValidationError(
                    "whole-space mode evaluates L2 only (Plancherel); "
                    f"q = {q} needs torus mode"
                )
            vals = l2_decay_curve(op, profile, times, layer=ell)
            fit = fit_decay(times, vals, window, target=target_for(q), tol=tol,
                            mode=fit_mode)
            entries.append(HypothesisEntry(q=float(q), fit=fit,
                                           times=tuple(float(t) for t in times),
                                           values=tuple(float(v) for v in vals)))
    elif mode == "torus":
        if torus_grid is None:
            raise ValidationError("torus mode needs a grid")
        horizon = _solver.box_horizon(op, torus_grid)
        if window[1] > horizon:
            notes.append(
                f"window end {window[1]} exceeds the box horizon {horizon:.3g}; "
                "late-time fits reflect the box, not whole space"
            )
        width = profile.width if profile is not None else 1.0
        prof = _solver.DataProfile(kind="gaussian", width=width, zero_mean=True)
        for q in q_list:
            # L^inf is always recorded; the Lp column carries the finite q
            col = f"Linf[{ell}]" if math.isinf(q) else f"Lp[{ell}]"
            cfg = _solver.RunConfig(
                op=op, grid=torus_grid, profile=prof, ell=ell, dt=torus_dt,
                T=window[1], nl=None,
                p_for_norms=2.0 if math.isinf(q) else float(q),
                record_every=max(1, int(round((window[1] / torus_dt) / 400))),
            )
            report = _solver.run(cfg)
            fit = fit_decay(report.times, report.series[col], window,
                            target=target_for(q), tol=tol, mode=fit_mode)
            entries.append(HypothesisEntry(q=float(q), fit=fit,
                                           times=tuple(float(t) for t in report.times),
                                           values=tuple(float(v) for v in report.series[col])))
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    return HypothesisReport(mode=mode, p_c=float(p_c), entries=tuple(entries),
                            notes=tuple(notes))
