"""Exponent fields and the parametric family of generalized Phi-functions.

A double-phase problem is described by a spatial dimension ``N`` and three
nodewise data fields: the lower exponent ``p``, the upper exponent ``q`` and a
nonnegative weight ``mu``.  From these every Phi-function used by the toolkit
is derived:

* the double-phase function  ``t^p(x) + mu(x) t^q(x)``,
* its normalized variant (linear below t=1),
* the interior/trace critical functions built from the Sobolev critical
  exponents ``N r / (N - r)`` and ``(N-1) r / (N - r)``,
* subcritical two-exponent families, and
* a free-weight family ``t^r + mu^alpha t^s`` used in optimality experiments.

Fields are stored as numpy arrays over an arbitrary common node shape; scalars
describe spatially constant data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    ConvergenceError,
    DomainError,
    GridMismatchError,
    HypothesisError,
    SingularityError,
)

__all__ = [
    "ExponentField",
    "PhiSpec",
    "ValidationReport",
    "CriticalExponents",
    "validate_hypotheses",
    "eval_phi",
    "critical_exponents",
    "phi_inverse",
]


def _as_field_array(value, shape):
    arr = np.asarray(value, dtype=float)
    if arr.shape == ():
        return np.broadcast_to(arr, shape).copy() if shape else arr
    if shape and arr.shape != shape:
        raise GridMismatchError(f"field shape {arr.shape} != node shape {shape}")
    return arr


@dataclass(frozen=True)
class ExponentField:
    """The (p, q, mu, N) data defining a double-phase structure on a node set.

    ``p``, ``q`` and ``mu`` may be scalars (spatially constant) or arrays over
    a common node shape.  ``spacing`` optionally records the mesh widths of the
    underlying lattice so that Lipschitz difference quotients can be checked.
    ``lipschitz_bound`` is a declared Lipschitz constant for p, q and mu; it is
    recorded and validated but never consumed by any formula.
    """

    N: int
    p: np.ndarray
    q: np.ndarray
    mu: np.ndarray
    lipschitz_bound: float | None = None
    spacing: tuple | None = None

    def __post_init__(self):
        if self.N < 2:
            raise DomainError(f"spatial dimension must be >= 2, got {self.N}")
        shapes = [np.shape(a) for a in (self.p, self.q, self.mu) if np.shape(a)]
        shape = shapes[0] if shapes else ()
        if any(s != shape for s in shapes):
            raise GridMismatchError(f"p/q/mu shapes disagree: {shapes}")
        object.__setattr__(self, "p", _as_field_array(self.p, shape))
        object.__setattr__(self, "q", _as_field_array(self.q, shape))
        object.__setattr__(self, "mu", _as_field_array(self.mu, shape))
        if self.spacing is not None:
            object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))

    @property
    def shape(self):
        return self.p.shape

    # Discrete surrogates for inf/sup over the closed domain.
    @property
    def p_minus(self) -> float:
        return float(np.min(self.p))

    @property
    def p_plus(self) -> float:
        return float(np.max(self.p))

    @property
    def q_minus(self) -> float:
        return float(np.min(self.q))

    @property
    def q_plus(self) -> float:
        return float(np.max(self.q))

    def at(self, x):
        """Pointwise (p, q, mu) at node index ``x`` (ignored for constant fields)."""
        if self.shape == () or x is None:
            return float(self.p), float(self.q), float(self.mu)
        return float(self.p[x]), float(self.q[x]), float(self.mu[x])

    def critical(self, which: str = "p") -> np.ndarray:
        """Nodewise critical exponent array: Nr/(N-r) for r = p or q."""
        r = self.p if which == "p" else self.q
        if np.any(r >= self.N):
            raise SingularityError(f"{which}(x) >= N somewhere: critical exponent undefined")
        return self.N * r / (self.N - r)

    def critical_trace(self, which: str = "p") -> np.ndarray:
        """Nodewise trace critical exponent array: (N-1)r/(N-r) for r = p or q."""
        r = self.p if which == "p" else self.q
        if np.any(r >= self.N):
            raise SingularityError(f"{which}(x) >= N somewhere: trace exponent undefined")
        return (self.N - 1) * r / (self.N - r)


class CriticalExponents(NamedTuple):
    p_star: float
    q_star: float
    p_trace: float
    q_trace: float


def critical_exponents(field: ExponentField, x=None) -> CriticalExponents:
    """Interior and trace critical exponents at a node.

    Returns (Np/(N-p), Nq/(N-q), (N-1)p/(N-p), (N-1)q/(N-q)).  Raises
    SingularityError when p(x) or q(x) reaches N.
    """
    p, q, _ = field.at(x)
    N = field.N
    for r, name in ((p, "p"), (q, "q")):
        if r >= N:
            raise SingularityError(f"{name}(x)={r} >= N={N}: critical exponent undefined")
    return CriticalExponents(
        N * p / (N - p), N * q / (N - q), (N - 1) * p / (N - p), (N - 1) * q / (N - q)
    )


# ---------------------------------------------------------------------------
# Hypothesis validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    level: str
    passed: bool
    violations: list  # (node index, condition name) pairs

    def conditions(self):
        return sorted({name for _, name in self.violations})


def _violating_nodes(mask):
    bad = np.argwhere(np.asarray(mask))
    out = []
    for idx in bad:
        out.append(tuple(int(i) for i in idx) if idx.size > 1 else int(idx[0]) if idx.size else ())
    return out


_LEVELS = ("H1", "H2", "H3")


def validate_hypotheses(field: ExponentField, level: str = "H3") -> ValidationReport:
    """Check the nodewise structural hypotheses at level H1, H2 or H3.

    H1: 1 < p(x) < N and p(x) < q(x), mu(x) >= 0.
    H2: additionally q(x) < Np(x)/(N-p(x)) and mu bounded.
    H3: additionally q(x) < N and max_x q(x)/p(x) < 1 + 1/N; when both a
    lipschitz_bound and a lattice spacing are attached, difference quotients of
    p, q and mu are checked against the declared bound.
    """
    if level not in _LEVELS:
        raise DomainError(f"unknown hypothesis level {level!r}")
    p, q, mu, N = field.p, field.q, field.mu, field.N
    checks = [
        (p <= 1.0, "1 < p(x)"),
        (p >= N, "p(x) < N"),
        (p >= q, "p(x) < q(x)"),
        (mu < 0.0, "mu(x) >= 0"),
    ]
    if level in ("H2", "H3"):
        with np.errstate(divide="ignore", invalid="ignore"):
            p_star = np.where(p < N, N * p / np.maximum(N - p, 1e-300), np.inf)
        checks.append((q >= p_star, "q(x) < p*(x)"))
        checks.append((~np.isfinite(mu), "mu bounded"))
    if level == "H3":
        checks.append((q >= N, "q(x) < N"))
        checks.append((q / p >= 1.0 + 1.0 / N, "(q/p)^+ < 1 + 1/N"))

    violations = []
    for mask, name in checks:
        mask = np.broadcast_to(np.asarray(mask), field.shape) if field.shape else np.asarray(mask)
        if field.shape == ():
            if bool(mask):
                violations.append(((), name))
        else:
            violations.extend((node, name) for node in _violating_nodes(mask))

    if level == "H3" and field.lipschitz_bound is not None and field.spacing is not None:
        violations.extend(_lipschitz_violations(field))

    return ValidationReport(level=level, passed=not violations, violations=violations)


def _lipschitz_violations(field: ExponentField):
    """Difference quotients of p, q, mu against the declared Lipschitz bound."""
    out = []
    if field.shape == ():
        return out
    bound = field.lipschitz_bound * (1.0 + 1e-12)
    for name, arr in (("p", field.p), ("q", field.q), ("mu", field.mu)):
        for axis, h in enumerate(field.spacing):
            quot = np.abs(np.diff(arr, axis=axis)) / h
            bad = quot > bound
            for node in _violating_nodes(bad):
                out.append((node, f"Lipschitz({name})"))
    return out


# ---------------------------------------------------------------------------
# PhiSpec: the parametric Phi-function family
# ---------------------------------------------------------------------------

_POWER_KINDS = (
    "double_phase",
    "critical",
    "critical_trace",
    "subcritical",
    "subcritical_trace",
    "weighted",
)
_ALL_KINDS = _POWER_KINDS + ("double_phase_normalized",)


@dataclass(frozen=True)
class PhiSpec:
    """A tagged selection of one generalized Phi-function over an ExponentField.

    Every kind except the normalized one evaluates as
    ``t^lo(x) + weight(x) * t^hi(x)`` with kind-specific exponent and weight
    arrays; the normalized kind is linear below t=1.
    """

    kind: str
    base: ExponentField
    lo: np.ndarray = field(repr=False, default=None)
    hi: np.ndarray = field(repr=False, default=None)
    weight: np.ndarray = field(repr=False, default=None)
    mode: str = "subcritical"

    # -- constructors -------------------------------------------------------

    @classmethod
    def double_phase(cls, base: ExponentField) -> "PhiSpec":
        """t^p(x) + mu(x) t^q(x)."""
        return cls("double_phase", base, base.p, base.q, base.mu)

    @classmethod
    def double_phase_normalized(cls, base: ExponentField) -> "PhiSpec":
        """Linear below t=1 (t times the value at 1), double-phase above."""
        return cls("double_phase_normalized", base, base.p, base.q, base.mu)

    @classmethod
    def critical(cls, base: ExponentField) -> "PhiSpec":
        """t^{p*(x)} + mu(x)^{q*(x)/q(x)} t^{q*(x)} with interior critical exponents."""
        lo = base.critical("p")
        hi = base.critical("q")
        return cls("critical", base, lo, hi, _mu_power(base.mu, hi / base.q))

    @classmethod
    def critical_trace(cls, base: ExponentField) -> "PhiSpec":
        """Trace analogue built from the boundary critical exponents."""
        lo = base.critical_trace("p")
        hi = base.critical_trace("q")
        return cls("critical_trace", base, lo, hi, _mu_power(base.mu, hi / base.q))

    @classmethod
    def subcritical(cls, base: ExponentField, r, s, mode: str = "subcritical") -> "PhiSpec":
        """t^r(x) + mu(x)^{s(x)/q(x)} t^s(x); r, s capped by the interior critical pair."""
        r = _as_field_array(r, base.shape)
        s = _as_field_array(s, base.shape)
        _check_subcritical_window(base, r, s, base.critical("p"), base.critical("q"), mode)
        return cls("subcritical", base, r, s, _mu_power(base.mu, s / base.q), mode=mode)

    @classmethod
    def subcritical_trace(cls, base: ExponentField, l, h, mode: str = "subcritical") -> "PhiSpec":
        """t^l(x) + mu(x)^{h(x)/q(x)} t^h(x); l, h capped by the trace critical pair."""
        l = _as_field_array(l, base.shape)
        h = _as_field_array(h, base.shape)
        _check_subcritical_window(base, l, h, base.critical_trace("p"), base.critical_trace("q"), mode)
        return cls("subcritical_trace", base, l, h, _mu_power(base.mu, h / base.q), mode=mode)

    @classmethod
    def weighted(cls, base: ExponentField, r, s, alpha) -> "PhiSpec":
        """Free-weight family t^r + mu^alpha t^s used in optimality scans."""
        r = _as_field_array(r, base.shape)
        s = _as_field_array(s, base.shape)
        alpha = _as_field_array(alpha, base.shape)
        if np.any(r <= 0) or np.any(s <= 0) or np.any(alpha <= 0):
            raise DomainError("weighted family needs positive r, s, alpha")
        return cls("weighted", base, r, s, _mu_power(base.mu, alpha))

    # -- evaluation ----------------------------------------------------------

    def exponent_bounds(self):
        """(min, max) exponent over all nodes; the normalized kind is linear near 0."""
        if self.kind == "double_phase_normalized":
            return 1.0, float(np.max(self.hi))
        lo = float(min(np.min(self.lo), np.min(self.hi)))
        hi = float(max(np.max(self.lo), np.max(self.hi)))
        return lo, hi

    def _params_at(self, x):
        if np.shape(self.lo) == () or x is None:
            return float(self.lo), float(self.hi), float(self.weight)
        return float(self.lo[x]), float(self.hi[x]), float(self.weight[x])

    def __call__(self, x, t):
        return eval_phi(self, x, t)

    def evaluate_nodes(self, t: np.ndarray) -> np.ndarray:
        """Vectorized evaluation with one t value per node (shapes must broadcast)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("Phi-functions are defined for t >= 0 only")
        if self.kind == "double_phase_normalized":
            at_one = 1.0 + self.base.mu
            raw = _power_form(t, self.lo, self.hi, self.weight)
            return np.where(t <= 1.0, t * at_one, raw)
        return _power_form(t, self.lo, self.hi, self.weight)


def _mu_power(mu, expo):
    # 0^0 := 0 here: a vanishing weight kills the upper-phase term entirely.
    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(mu > 0.0, np.power(np.maximum(mu, 1e-300), expo), 0.0)
    return out


def _power_form(t, lo, hi, w):
    t = np.asarray(t, dtype=float)
    with np.errstate(invalid="ignore"):
        first = np.where(t > 0.0, np.power(t, lo), 0.0)
        second = np.where(t > 0.0, np.power(t, hi), 0.0)
    return first + w * second


def _check_subcritical_window(base, lo, hi, cap_lo, cap_hi, mode):
    if mode == "subcritical":
        ok = np.all(base.p < lo) and np.all(lo < cap_lo) and np.all(base.q < hi) and np.all(hi < cap_hi)
        if not ok:
            raise HypothesisError("subcritical mode needs p < r < p-critical and q < s < q-critical nodewise")
    elif mode == "critical":
        if not (np.all(lo <= cap_lo) and np.all(hi <= cap_hi)):
            raise HypothesisError("critical mode needs r <= p-critical and s <= q-critical nodewise")
    else:
        raise DomainError(f"unknown subcritical mode {mode!r}")


def eval_phi(spec: PhiSpec, x, t):
    """Evaluate the selected Phi-function at node ``x`` and argument ``t >= 0``.

    ``t`` may be a scalar or an array; the node data are taken at ``x``
    (``None`` selects the single node of a constant field).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("Phi-functions are defined for t >= 0 only")
    scalar = t.ndim == 0
    tv = np.atleast_1d(t)
    if spec.kind == "double_phase_normalized":
        p, q, mu = spec.base.at(x)
        raw = _power_form(tv, p, q, mu)
        out = np.where(tv <= 1.0, tv * (1.0 + mu), raw)
    else:
        lo, hi, w = spec._params_at(x)
        out = _power_form(tv, lo, hi, w)
    return float(out[0]) if scalar else out


def phi_inverse(spec: PhiSpec, x, s: float, tol: float = 1e-12, max_iter: int = 400) -> float:
    """Invert the strictly increasing map t -> phi(x, t) at the value ``s``.

    Bracketing bisection with a doubling upper bracket; the returned t
    satisfies ``|phi(x, t) - s| <= tol * max(1, s)``.
    """
    if s < 0:
        raise DomainError("phi values are nonnegative")
    if s == 0.0:
        return 0.0
    target = tol * max(1.0, s)

    f = lambda t: eval_phi(spec, x, t)
    hi = 1.0
    for _ in range(max_iter):
        if f(hi) >= s:
            break
        hi *= 2.0
    else:
        raise ConvergenceError(f"could not bracket phi_inverse target s={s}")
    lo = 0.0 if hi == 1.0 else hi / 2.0

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        if abs(val - s) <= target:
            return mid
        if val < s:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-17 * max(1.0, hi):
            return 0.5 * (lo + hi)
    raise ConvergenceError(f"phi_inverse did not reach tol={tol} for s={s}")
