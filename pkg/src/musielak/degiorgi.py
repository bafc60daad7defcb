"""Level-set truncation iteration for sup-norm bounds.

The driver is a geometric-recursion fact: a nonnegative sequence obeying
``Z_{n+1} <= K b^n (Z_n^{1+mu1} + Z_n^{1+mu2})`` collapses to zero once the
seed is below an explicit threshold, with an explicit decay envelope.  The
truncation energies realize that sequence for grid functions: levels
``kappa_n = kappa_* (2 - 2^-n)`` rise toward ``2 kappa_*``, the level sets
``{u > kappa_n}`` shrink, and the energies integrate kind-specific
Phi-functions of ``(u - kappa_n)_+`` over them (plus boundary terms in the
Neumann regimes and gradient terms in the critical regimes).  When the
sequence dies, twice the starting level bounds the function from above.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DomainError, HypothesisError
from .modular import GridDomain, GridFunction
from .phi_core import ExponentField, PhiSpec

__all__ = [
    "RecursionParams",
    "RecursionTrace",
    "IterationEnergy",
    "BoundConstants",
    "LevelSet",
    "IterationReport",
    "recursion_thresholds",
    "iterate_recursion",
    "level_set",
    "kappa_sequence",
    "truncation_energy",
    "entry_condition",
    "kappa_star_dirichlet",
    "bound_estimate",
    "empirical_iteration",
    "two_sided_bound",
]

REGIMES = ("subcritical-D", "subcritical-N", "critical-D", "critical-N")

_SENTINEL = 1e150  # recursion values beyond this count as divergence


# ---------------------------------------------------------------------------
# Geometric recursion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecursionParams:
    K: float
    b: float
    mu1: float
    mu2: float

    def __post_init__(self):
        if not (self.K > 0 and self.b > 1 and 0 < self.mu1 <= self.mu2):
            raise DomainError("need K > 0, b > 1 and 0 < mu1 <= mu2")


def recursion_thresholds(params: RecursionParams):
    """The two admissible seed bounds guaranteeing collapse of the recursion."""
    K, b, m1, m2 = params.K, params.b, params.mu1, params.mu2
    with np.errstate(over="ignore"):
        theta1 = (2.0 * K) ** (-1.0 / m1) * b ** (-1.0 / m1**2)
        theta2 = (2.0 * K) ** (-1.0 / m2) * b ** (-1.0 / (m1 * m2) - (m2 - m1) / m2**2)
    return min(1.0, theta1), min(theta1, theta2)


@dataclass
class RecursionTrace:
    params: RecursionParams
    Z: np.ndarray
    n0: int | None
    thresholds: tuple
    envelope_ok: bool | None
    diverged: bool

    def envelope(self, n):
        K, b, m1 = self.params.K, self.params.b, self.params.mu1
        return np.minimum(1.0, (2.0 * K) ** (-1.0 / m1) * b ** (-1.0 / m1**2) * b ** (-np.asarray(n, dtype=float) / m1))


def iterate_recursion(Z0: float, params: RecursionParams, n_max: int = 200) -> RecursionTrace:
    """Run the worst-case recursion with equality and audit the collapse claim.

    ``n0`` is the first index with Z_n <= 1.  When the seed satisfies one of
    the two thresholds, the decay envelope is checked for every n >= n0.
    Divergence is capped at a sentinel and flagged, never raised.
    """
    if Z0 < 0:
        raise DomainError("seed must be nonnegative")
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    K, b, m1, m2 = params.K, params.b, params.mu1, params.mu2
    zs = [float(Z0)]
    diverged = False
    z = float(Z0)
    for n in range(n_max):
        with np.errstate(over="ignore", invalid="ignore"):
            z = K * b**n * (z ** (1.0 + m1) + z ** (1.0 + m2))
        if not np.isfinite(z) or z > _SENTINEL:
            diverged = True
            zs.append(_SENTINEL)
            break
        zs.append(z)
    Z = np.array(zs)

    below = np.nonzero(Z <= 1.0)[0]
    n0 = int(below[0]) if below.size else None

    T1, T2 = recursion_thresholds(params)
    envelope_ok = None
    if Z0 <= max(T1, T2) * (1.0 + 1e-12) and n0 is not None:
        ns = np.arange(n0, len(Z))
        trace = RecursionTrace(params, Z, n0, (T1, T2), None, diverged)
        env = trace.envelope(ns)
        envelope_ok = bool(np.all(Z[n0:] <= env * (1.0 + 1e-9)))
    return RecursionTrace(params, Z, n0, (T1, T2), envelope_ok, diverged)


# ---------------------------------------------------------------------------
# Level sets and truncation energies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelSet:
    interior_mask: np.ndarray
    measure: float
    boundary_mask: np.ndarray
    boundary_measure: float


def level_set(u: GridFunction, kappa: float) -> LevelSet:
    """Strict super-level set {u > kappa}, split into interior and boundary parts."""
    dom = u.domain
    bmask = dom.boundary_mask
    above = u.values > kappa
    interior = above & ~bmask
    boundary = above & bmask
    return LevelSet(
        interior,
        float(np.sum(dom.interior_weights[interior])),
        boundary,
        float(np.sum(dom.boundary_weights[boundary])),
    )


def kappa_sequence(kappa_star: float, n) -> float | np.ndarray:
    """Level n of the doubling ladder: kappa_* (2 - 2^-n), increasing to 2 kappa_*."""
    if kappa_star <= 0:
        raise DomainError("kappa_star must be positive")
    n = np.asarray(n)
    out = kappa_star * (2.0 - 0.5**n.astype(float))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class IterationEnergy:
    regime: str
    n: int
    kappa_n: float
    interior: float
    boundary: float

    @property
    def total(self) -> float:
        return self.interior + self.boundary


def _truncation_specs(field, regime, r, s, l, h):
    """Phi-functions used by the interior and boundary terms of each regime."""
    if regime in ("subcritical-D", "subcritical-N"):
        if r is None or s is None:
            raise HypothesisError(f"regime {regime} needs interior exponents r, s")
        interior = PhiSpec.subcritical(field, r, s)
    else:
        interior = PhiSpec.critical(field)
    boundary = None
    if regime == "subcritical-N":
        if l is None or h is None:
            raise HypothesisError("regime subcritical-N needs boundary exponents l, h")
        boundary = PhiSpec.subcritical_trace(field, l, h)
    elif regime == "critical-N":
        boundary = PhiSpec.critical_trace(field)
    return interior, boundary


def truncation_energy(
    u: GridFunction,
    field: ExponentField,
    regime: str,
    kappa_star: float,
    n: int,
    r=None,
    s=None,
    l=None,
    h=None,
) -> IterationEnergy:
    """One term of the truncation-energy sequence at level kappa_n.

    Subcritical regimes integrate the two-exponent function of (u-kappa_n)_+
    over the interior level set (plus the trace analogue over the boundary
    level set in the Neumann case).  Critical regimes integrate the
    double-phase function of the gradient over the level set plus the critical
    function of the truncation (plus its trace version on the boundary).
    """
    if regime not in REGIMES:
        raise DomainError(f"unknown regime {regime!r}")
    kappa_n = kappa_sequence(kappa_star, n)
    spec_i, spec_b = _truncation_specs(field, regime, r, s, l, h)
    dom = u.domain
    excess = np.maximum(u.values - kappa_n, 0.0)

    interior = float(np.sum(dom.interior_weights * spec_i.evaluate_nodes(excess)))
    if regime in ("critical-D", "critical-N"):
        H = PhiSpec.double_phase(field)
        on_set = (u.values > kappa_n) & ~dom.boundary_mask
        grad = u.gradient_magnitude()
        interior += float(np.sum(dom.interior_weights[on_set] * H.evaluate_nodes(grad)[on_set]))

    boundary = 0.0
    if spec_b is not None:
        boundary = float(np.sum(dom.boundary_weights * spec_b.evaluate_nodes(excess)))
    return IterationEnergy(regime, int(n), float(kappa_n), interior, boundary)


def entry_condition(
    u: GridFunction,
    field: ExponentField,
    regime: str,
    kappa_star: float,
    r=None,
    s=None,
    l=None,
    h=None,
) -> float:
    """Entry quantity whose value below 1 licenses the iteration at kappa_*.

    Critical Dirichlet: level-set integral of the double-phase function of the
    gradient and of |u| plus the critical function of |u|.  Critical Neumann:
    gradient term, critical function of |u| and the boundary trace term.
    Subcritical regimes use the n = 0 truncation energy itself.
    """
    if regime in ("subcritical-D", "subcritical-N"):
        return truncation_energy(u, field, regime, kappa_star, 0, r=r, s=s, l=l, h=h).total
    dom = u.domain
    ls = level_set(u, kappa_star)
    H = PhiSpec.double_phase(field)
    Gs = PhiSpec.critical(field)
    absu = np.abs(u.values)
    grad = u.gradient_magnitude()
    w = dom.interior_weights
    total = float(np.sum(w[ls.interior_mask] * H.evaluate_nodes(grad)[ls.interior_mask]))
    total += float(np.sum(w[ls.interior_mask] * Gs.evaluate_nodes(absu)[ls.interior_mask]))
    if regime == "critical-D":
        total += float(np.sum(w[ls.interior_mask] * H.evaluate_nodes(absu)[ls.interior_mask]))
    else:
        Ts = PhiSpec.critical_trace(field)
        wb = dom.boundary_weights
        total += float(np.sum(wb[ls.boundary_mask] * Ts.evaluate_nodes(absu)[ls.boundary_mask]))
    return total


# ---------------------------------------------------------------------------
# Closed-form starting level and a priori bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundConstants:
    """Configuration for the closed-form bound machinery.

    The analytic proofs produce these constants from embedding constants that
    are not computable here, so they are explicit configuration with neutral
    defaults.  ``recursion_constant`` is the prefactor of the truncation
    recursion; ``delta``/``mu`` are its exponents; ``tau1``/``tau2`` default
    to delta1/mu2 and delta2/mu1.  ``r_minus``/``s_plus`` convert a norm into
    a modular bound via max(norm^r_minus, norm^s_plus).
    """

    C: float = 1.0
    recursion_constant: float = 1.0
    b: float = 2.0
    mu1: float = 1.0
    mu2: float = 1.0
    delta1: float = 1.0
    delta2: float = 1.0
    alpha2: float = 1.0
    alpha3: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    tau1: float | None = None
    tau2: float | None = None
    r_minus: float = 1.0
    s_plus: float = 1.0

    def __post_init__(self):
        positive = (self.C, self.recursion_constant, self.mu1, self.mu2,
                    self.delta1, self.delta2, self.alpha2, self.alpha3,
                    self.beta, self.gamma, self.r_minus, self.s_plus)
        if any(c <= 0 for c in positive) or self.b <= 1:
            raise DomainError("constants must be positive and b > 1")
        if self.delta1 > self.delta2 or self.mu1 > self.mu2:
            raise DomainError("need delta1 <= delta2 and mu1 <= mu2")

    @property
    def exponents(self):
        t1 = self.delta1 / self.mu2 if self.tau1 is None else self.tau1
        t2 = self.delta2 / self.mu1 if self.tau2 is None else self.tau2
        return t1, t2


def kappa_star_dirichlet(psi_modular: float, constants: BoundConstants) -> float:
    """Closed-form starting level from the modular of the subcritical function.

    By construction the result satisfies both admissibility inequalities that
    license the recursion collapse (checked directly in the test suite).  A
    zero modular is degenerate and returns 0 with a warning.
    """
    if psi_modular < 0:
        raise DomainError("modular must be nonnegative")
    if psi_modular == 0.0:
        warnings.warn("zero modular: degenerate starting level 0", stacklevel=2)
        return 0.0
    c = constants
    C4 = 4.0 * c.recursion_constant
    prefactor = max(C4 ** (1.0 / c.mu1), C4 ** (1.0 / c.mu2))
    bpow = c.b ** ((1.0 / c.mu1) * (1.0 / c.delta1 + (c.delta2 - c.delta1) / c.delta2))
    M = psi_modular
    return prefactor * bpow * max(M ** (c.delta1 / c.mu2), M ** (c.delta2 / c.mu1))


def kappa_star_admissible(kappa_star: float, psi_modular: float, constants: BoundConstants):
    """The two admissibility inequalities for a candidate starting level.

    Returns the pair of right-hand sides; the candidate is admissible when it
    dominates both.
    """
    c = constants
    M = psi_modular
    C4 = 4.0 * c.recursion_constant
    bexp = 1.0 / c.delta1 + (c.delta2 - c.delta1) / c.delta2
    rhs1 = C4 ** (1.0 / c.mu1) * c.b ** (bexp / c.mu1) * max(M ** (c.delta1 / c.mu1), M ** (c.delta2 / c.mu1))
    rhs2 = C4 ** (1.0 / c.mu2) * c.b ** (bexp / c.mu2) * max(M ** (c.delta1 / c.mu2), M ** (c.delta2 / c.mu2))
    return rhs1, rhs2


def bound_estimate(
    psi_norm: float,
    constants: BoundConstants,
    regime: str = "subcritical-D",
    upsilon_norm: float | None = None,
) -> float:
    """A priori sup-norm bound from Luxemburg norms.

    Dirichlet regimes: C max(X^tau1, X^tau2) with X the modular surrogate
    max(norm^r_minus, norm^s_plus).  Neumann regimes: same with X built from
    the sum of the interior and boundary norms, taus purely configured.
    """
    if regime not in REGIMES:
        raise DomainError(f"unknown regime {regime!r}")
    if psi_norm < 0 or (upsilon_norm is not None and upsilon_norm < 0):
        raise DomainError("norms are nonnegative")
    neumann = regime.endswith("-N")
    if neumann:
        if upsilon_norm is None:
            raise HypothesisError("Neumann regime needs the boundary norm")
        base = psi_norm + upsilon_norm
    else:
        base = psi_norm
    if base == 0.0:
        warnings.warn("zero norm: degenerate bound 0", stacklevel=2)
        return 0.0
    c = constants
    X = max(base**c.r_minus, base**c.s_plus)
    t1, t2 = c.exponents
    return c.C * max(X**t1, X**t2)


# ---------------------------------------------------------------------------
# Empirical iteration on grid functions
# ---------------------------------------------------------------------------

@dataclass
class IterationReport:
    regime: str
    kappa_star: float | None
    esssup: float
    bound_ok: bool
    candidates: list = dc_field(default_factory=list)  # (kappa, entry, decayed, final energy)
    energies: list = dc_field(default_factory=list)  # IterationEnergy list of the chosen run

    @property
    def found(self) -> bool:
        return self.kappa_star is not None


def empirical_iteration(
    u: GridFunction,
    field: ExponentField,
    regime: str,
    kappa_star_grid,
    r=None,
    s=None,
    l=None,
    h=None,
    n_max: int = 60,
    decay_tol: float = 1e-12,
) -> IterationReport:
    """Grid search for the smallest admissible starting level.

    For each candidate the entry condition must be < 1 and the energy sequence
    must decay below ``decay_tol`` within ``n_max`` steps.  The report carries
    the one-sided supremum of u over interior nodes and whether it is bounded
    by twice the chosen level (plus one-cell slack).
    """
    if regime not in REGIMES:
        raise DomainError(f"unknown regime {regime!r}")
    dom = u.domain
    interior = ~dom.boundary_mask
    sup_u = float(np.max(u.values[interior]))
    cell_slack = max(dom.spacing) * float(np.max(u.gradient_magnitude()))

    candidates = []
    chosen = None
    chosen_energies = []
    for kappa in sorted(float(k) for k in kappa_star_grid):
        if kappa <= 0:
            continue
        entry = entry_condition(u, field, regime, kappa, r=r, s=s, l=l, h=h)
        energies = []
        decayed = False
        for n in range(n_max + 1):
            e = truncation_energy(u, field, regime, kappa, n, r=r, s=s, l=l, h=h)
            energies.append(e)
            if e.total <= decay_tol:
                decayed = True
                break
        candidates.append((kappa, entry, decayed, energies[-1].total))
        if entry < 1.0 and decayed and chosen is None:
            chosen = kappa
            chosen_energies = energies
    bound_ok = chosen is not None and sup_u <= 2.0 * chosen + cell_slack
    return IterationReport(regime, chosen, sup_u, bound_ok, candidates, chosen_energies)


def two_sided_bound(
    u: GridFunction,
    field: ExponentField,
    regime: str,
    kappa_star_grid,
    **kw,
) -> IterationReport:
    """Run the iteration for u and for -u and bound max |u| by twice the level."""
    up = empirical_iteration(u, field, regime, kappa_star_grid, **kw)
    down = empirical_iteration(-u, field, regime, kappa_star_grid, **kw)
    dom = u.domain
    interior = ~dom.boundary_mask
    sup_abs = float(np.max(np.abs(u.values[interior])))
    kappa = None
    if up.found and down.found:
        kappa = max(up.kappa_star, down.kappa_star)
    cell_slack = max(dom.spacing) * float(np.max(u.gradient_magnitude()))
    ok = kappa is not None and sup_abs <= 2.0 * kappa + cell_slack
    return IterationReport(regime, kappa, sup_abs, ok, up.candidates + down.candidates,
                           up.energies + down.energies)
