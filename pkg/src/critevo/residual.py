"""Weak-form identity residual for recorded solver runs.

A weak solution on [0, T) must satisfy, for every admissible test function
psi (smooth, compactly supported in [0, T) x box),

    int int F(d_t^l u) psi dx dt
      = sum_{j in J u {m}} (-1)^{j-l} int int d_t^l u * P~_j(d_x) D_t^{j-l} psi dx dt
        - sum_{j > l} sum_{i=0}^{j-l-1} (-1)^i int u_{j-1-i} P~_j d_t^i psi(0) dx
        - sum_{j < l} sum_{i=0}^{l-j-1} (-1)^i int u_{j+i} P~_j (D_t^{-(i+1)} psi)(0) dx,

where P~_j is the formal adjoint level (multiplier conj(P_j(i k)) for real
coefficients), D_t^k psi is the plain k-th time derivative for k >= 0 and
the backward time anti-derivative  D_t^{-1} w(t) = -int_t^T w  for k < 0.
The boundary sums collect every initial layer the time integrations by
parts strand at t = 0; the i >= 1 pieces vanish only when the data lives
inside the core where psi(0, x) is identically 1, which is not assumed.

The test function is the scaled bump

    psi(t, x) = chi((t + rho(x)) / R)^{q_tf},
    rho(x) = (|x|^2 + reg_eps^2)^{eta_bar / 2},

with chi == 1 on [0, 1/2], a polynomial smoothstep transition with
``smooth_order`` vanishing derivatives down to 0 at 1, and 0 beyond.  Time
derivatives of psi are closed-form piecewise polynomials; adjoint spatial
levels act through Fourier multipliers on the grid (psi is smooth and
supported strictly inside the box, so the periodic representation is the
function itself); anti-derivatives are numeric backward trapezoids over
the recorded times.

The returned relative residual is |LHS - RHS| / (|LHS| + |RHS| + floor)
with floor defaulting to the gross scale sum_j |term_j| + |data term| (so
a linear run, where LHS = 0 and RHS cancels to zero, is scored against
the size of what cancelled).  Passing this check is necessary for the
recorded field to be a weak solution, never sufficient: it is one test
function out of the whole admissible class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial

from scipy import special

from .errors import ValidationError
from .mu import NonlinearitySpec, eval_F
from .operators import EvolutionOperator, as_fraction, format_fraction
from .solver import Grid


def _series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cauchy product of truncated Taylor series stacked along axis 0."""
    c = np.zeros_like(a)
    for i in range(a.shape[0]):
        for r in range(i + 1):
            c[i] += a[r] * b[i - r]
    return c


def _series_pow(c: np.ndarray, q: int) -> np.ndarray:
    out = np.zeros_like(c)
    out[0] = 1.0
    base = c
    while q:
        if q & 1:
            out = _series_mul(out, base)
        q >>= 1
        if q:
            base = _series_mul(base, base)
    return out


def smoothstep_descent(order: int) -> Polynomial:
    """Polynomial T on [0,1] with T(0)=1, T(1)=0 and ``order`` flat derivatives.

    T(u) = 1 - int_0^u v^p (1-v)^p dv / int_0^1 v^p (1-v)^p dv.
    """
    if not (isinstance(order, int) and order >= 1):
        raise ValidationError("smooth_order must be an integer >= 1")
    base = Polynomial([0.0, 1.0]) ** order * Polynomial([1.0, -1.0]) ** order
    integ = base.integ()
    return Polynomial([1.0]) - integ / integ(1.0)


@dataclass(frozen=True)
class TestFunctionSpec:
    """Bump psi(t,x) = chi((t + rho(x))/R)^q_tf (see module docstring).

    ``eta_bar`` sets the parabolic-type spatial scaling |x|^eta_bar;
    ``scale`` is R; ``flat_fraction`` the end of the chi == 1 core;
    ``reg_epsilon`` regularizes |x|^eta_bar at the origin when eta_bar/2
    is not an integer (0 keeps the bare power).
    """

    eta_bar: Fraction
    scale: float
    q_tf: int
    flat_fraction: float = 0.5
    smooth_order: int = 6
    reg_epsilon: float = 0.0

    __test__ = False  # keep pytest from collecting the Test* name

    def __post_init__(self):
        object.__setattr__(self, "eta_bar", as_fraction(self.eta_bar))
        if self.eta_bar <= 0:
            raise ValidationError("eta_bar must be > 0")
        if not (self.scale > 0):
            raise ValidationError("scale R must be > 0")
        if not (isinstance(self.q_tf, int) and self.q_tf >= 1):
            raise ValidationError("q_tf must be an integer >= 1")
        if not (0 < self.flat_fraction < 1):
            raise ValidationError("flat_fraction must be in (0, 1)")
        if self.reg_epsilon < 0:
            raise ValidationError("reg_epsilon must be >= 0")

    @cached_property
    def _beta_norm(self) -> float:
        o = self.smooth_order
        return float(special.beta(o + 1, o + 1))

    def _chi_taylor(self, k: int, u: np.ndarray) -> np.ndarray:
        """Taylor rows chi^(i)(u)/i!, i = 0..k, of the descent polynomial.

        chi is evaluated through the regularized incomplete beta and its
        derivatives through the Leibniz expansion of u^o (1-u)^o.  Expanding
        chi**q_tf into monomial coefficients instead is catastrophically
        ill-conditioned (degree ~ 40, coefficients ~ 1e19, total cancellation
        near u = 1), which corrupts the identity at the support edge.
        """
        o = self.smooth_order
        rows = np.empty((k + 1,) + u.shape)
        rows[0] = 1.0 - special.betainc(o + 1, o + 1, u)
        for i in range(1, k + 1):
            r = i - 1
            acc = np.zeros_like(u)
            for a in range(r + 1):
                if a > o or r - a > o:
                    continue
                fall_a = math.prod(range(o, o - a, -1))
                fall_b = math.prod(range(o, o - (r - a), -1))
                acc += (math.comb(r, a) * fall_a * fall_b * (-1) ** (r - a)
                        * u ** (o - a) * (1.0 - u) ** (o - (r - a)))
            rows[i] = -acc / (self._beta_norm * math.factorial(i))
        return rows

    def weight(self, k: int, s: np.ndarray) -> np.ndarray:
        """k-th s-derivative of chi(s)^q_tf, piecewise closed form."""
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        s0 = self.flat_fraction
        core = s <= s0
        if k == 0:
            out[core] = 1.0
        mid = (~core) & (s < 1.0)
        if np.any(mid):
            u = (s[mid] - s0) / (1.0 - s0)
            series = _series_pow(self._chi_taylor(k, u), self.q_tf)
            out[mid] = series[k] * math.factorial(k) / (1.0 - s0) ** k
        return out

    def rho(self, grid: Grid) -> np.ndarray:
        coords = grid.coords()
        r2 = sum(c**2 for c in coords) + self.reg_epsilon**2
        return r2 ** (float(self.eta_bar) / 2.0)

    def time_derivative(self, k: int, t: float, rho: np.ndarray) -> np.ndarray:
        """d_t^k psi(t, .) on the grid (k >= 0)."""
        s = (t + rho) / self.scale
        return self.weight(k, s) / self.scale**k

    def support_checks(self, grid: Grid, t_end: float) -> list[str]:
        msgs = []
        if self.scale > t_end * (1 + 1e-12):
            msgs.append(
                f"psi needs recorded times up to R = {self.scale}, run ends at {t_end}"
            )
        half = grid.L / 2.0
        rho_edge = (half**2 + self.reg_epsilon**2) ** (float(self.eta_bar) / 2.0)
        if rho_edge < self.scale * (1 - 1e-12):
            msgs.append(
                "psi support leaks through the box edge: (L/2)^eta_bar = "
                f"{rho_edge:.6g} < R = {self.scale}"
            )
        if (self.reg_epsilon ** float(self.eta_bar)) / self.scale > self.flat_fraction:
            msgs.append("reg_epsilon so large that psi is not 1 at the origin")
        return msgs

    def to_json(self) -> dict:
        return {
            "eta_bar": format_fraction(self.eta_bar),
            "scale": self.scale,
            "q_tf": self.q_tf,
            "flat_fraction": self.flat_fraction,
            "smooth_order": self.smooth_order,
            "reg_epsilon": self.reg_epsilon,
        }


def default_q_tf(op: EvolutionOperator, ell: int, p_c) -> int:
    """ceil of max_j (d_j + (j - ell)_+) * p_c', with p_c' = p_c/(p_c - 1)."""
    if p_c == math.inf:
        dual = Fraction(1)
    else:
        p_c = as_fraction(p_c)
        if p_c <= 1:
            raise ValidationError("q_tf default needs p_c > 1 (finite conjugate)")
        dual = p_c / (p_c - 1)
    worst = max(
        op.spatial_order(j) + max(j - ell, 0) for j in op.order_set()
    )
    return max(1, math.ceil(worst * dual))


def make_test_function(op: EvolutionOperator, ell: int, p_c, scale: float,
                       eta_bar, grid: Grid | None = None,
                       q_tf: int | None = None, flat_fraction: float = 0.5,
                       smooth_order: int | None = None,
                       reg_epsilon: float | None = None) -> TestFunctionSpec:
    """Defaults wired to the operator: q_tf from the dual exponent, smoothness
    covering every derivative the identity takes, regularization only when
    |x|^eta_bar itself is not smooth."""
    eta_bar = as_fraction(eta_bar)
    if q_tf is None:
        q_tf = default_q_tf(op, ell, p_c)
    if smooth_order is None:
        smooth_order = max(6, int(math.ceil(op.max_spatial_order())) + 2, op.m - ell + 2)
    if reg_epsilon is None:
        even_integer = eta_bar.denominator == 1 and eta_bar.numerator % 2 == 0
        reg_epsilon = 0.0 if even_integer else (grid.h / 4.0 if grid is not None else 1e-3)
    return TestFunctionSpec(eta_bar=eta_bar, scale=scale, q_tf=q_tf,
                            flat_fraction=flat_fraction, smooth_order=smooth_order,
                            reg_epsilon=reg_epsilon)


@dataclass(frozen=True)
class ResidualReport:
    residual: float
    lhs: float
    rhs: float
    data_term: float
    contributions: dict[str, float]
    floor: float
    test_function: dict
    notes: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "residual": self.residual,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "data_term": self.data_term,
            "contributions": self.contributions,
            "floor": self.floor,
            "test_function": self.test_function,
            "notes": list(self.notes),
        }


def _backward_antiderivative(arr: np.ndarray, times: np.ndarray) -> np.ndarray:
    """-int_t^T arr dt' along axis 0 by trapezoids on the recorded times."""
    from scipy.integrate import cumulative_trapezoid

    cum = cumulative_trapezoid(arr, x=times, axis=0, initial=0.0)
    return -(cum[-1][None, ...] - cum)


def weak_residual(op: EvolutionOperator, ell: int, grid: Grid,
                  times, u_ell_frames: np.ndarray, tf: TestFunctionSpec,
                  nl: NonlinearitySpec | None = None,
                  initial_layers: np.ndarray | None = None,
                  floor: float | None = None) -> ResidualReport:
    """Evaluate the identity for one recorded run and one test function.

    ``u_ell_frames`` has shape (len(times), *grid.shape) holding the
    physical d_t^l u; ``initial_layers`` has shape (m, *grid.shape) with
    the physical initial layers (zero rows for absent data).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 3 or np.any(np.diff(times) <= 0):
        raise ValidationError("times must be strictly increasing, length >= 3")
    frames = np.asarray(u_ell_frames, dtype=float)
    if frames.shape != (times.size,) + grid.shape:
        raise ValidationError(
            f"u_ell_frames shape {frames.shape} != {(times.size,) + grid.shape}"
        )
    problems = tf.support_checks(grid, float(times[-1]))
    if problems:
        raise ValidationError("; ".join(problems))
    if not (isinstance(ell, int) and 0 <= ell < op.m):
        raise ValidationError(f"ell must be an integer in [0, {op.m - 1}]")
    if initial_layers is None:
        initial_layers = np.zeros((op.m,) + grid.shape)
    initial_layers = np.asarray(initial_layers, dtype=float)
    if initial_layers.shape != (op.m,) + grid.shape:
        raise ValidationError("initial_layers must have shape (m, *grid.shape)")

    dx = grid.quad_weight()
    rho = tf.rho(grid)
    s = (times.reshape((-1,) + (1,) * grid.n) + rho[None, ...]) / tf.scale
    space_axes = tuple(range(1, grid.n + 1))
    ks = grid.wavenumbers()

    contributions: dict[str, float] = {}
    rhs_sum = 0.0
    gross = 0.0
    data_term = 0.0
    for j in op.order_set():
        mult = np.conj(op.multiplier(j, ks))
        if j >= ell:
            G = tf.weight(j - ell, s) / tf.scale ** (j - ell)
        else:
            G = tf.weight(0, s)
        term = np.real(np.fft.ifftn(mult[None, ...] * np.fft.fftn(G, axes=space_axes),
                                    axes=space_axes))
        if j < ell:
            # each backward anti-derivative strands one initial layer at t = 0
            for i in range(ell - j):
                term = _backward_antiderivative(term, times)
                layer = initial_layers[j + i]
                if np.any(layer):
                    data_term += (-1) ** i * float(np.sum(layer * term[0]) * dx)
        ip = np.sum(frames * term, axis=space_axes) * dx
        val = float((-1) ** abs(j - ell) * np.trapezoid(ip, x=times))
        contributions[str(j)] = val
        rhs_sum += val
        gross += abs(val)
        # layers stranded by moving d_t^{j-l} onto psi
        for i in range(j - ell):
            layer = initial_layers[j - 1 - i]
            if not np.any(layer):
                continue
            psi_i0 = tf.time_derivative(i, 0.0, rho)
            adj = np.real(np.fft.ifftn(mult * np.fft.fftn(psi_i0)))
            data_term += (-1) ** i * float(np.sum(layer * adj) * dx)

    rhs = rhs_sum - data_term
    gross += abs(data_term)

    if nl is None:
        lhs = 0.0
    else:
        psi_frames = tf.weight(0, s)
        F = np.asarray(eval_F(nl, frames))
        lhs = float(np.trapezoid(np.sum(F * psi_frames, axis=space_axes) * dx, x=times))

    used_floor = floor if floor is not None else gross + 1e-30
    residual = abs(lhs - rhs) / (abs(lhs) + abs(rhs) + used_floor)
    return ResidualReport(
        residual=residual, lhs=lhs, rhs=rhs, data_term=data_term,
        contributions=contributions, floor=used_floor,
        test_function=tf.to_json(),
        notes=(),
    )


def initial_sign_functional(op: EvolutionOperator, ell: int,
                            initial_layers: np.ndarray, grid: Grid) -> float:
    """Diagnostic sum_{j >= ell, c_{j+1,0} != 0} c_{j+1,0} * int u_j dx.

    Positivity of this functional is the data hypothesis of the blow-up
    machinery (the top layer always contributes: the monic level m has
    constant coefficient 1).  It is reported as a diagnostic only; nothing
    here claims a link between its sign and an observed numerical blow-up.
    """
    initial_layers = np.asarray(initial_layers, dtype=float)
    if initial_layers.shape != (op.m,) + grid.shape:
        raise ValidationError("initial_layers must have shape (m, *grid.shape)")
    total = 0.0
    for j in range(ell, op.m):
        c = op.constant_coefficient(j + 1)
        if c != 0.0:
            total += c * float(np.sum(initial_layers[j]) * grid.quad_weight())
    return total
