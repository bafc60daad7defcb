import numpy as np
import pytest

from musielak import (
    ContractError,
    GridDomain,
    GridFunction,
    ProblemSpec,
    energy,
    energy_gradient,
    solve,
    two_sided_bound,
    weak_residual,
)


def interval_problem(n=129, p=2.0, q=2.0, mu=0.0, f=1.0, N=3, **kw):
    dom = GridDomain.interval(n)
    field = dom.constant_field(N, p, q, mu)
    return ProblemSpec(dom, field, GridFunction.constant(dom, f), **kw)


def dense_newton_oracle(spec, tol=1e-12, max_iter=60):
    """Independent minimizer: damped Newton with finite-difference Hessian."""
    dom = spec.domain
    free = np.nonzero(spec.free_mask.ravel())[0]
    u = np.zeros(dom.shape)

    def grad(vec):
        full = np.zeros(dom.shape)
        full.ravel()[free] = vec
        return energy_gradient(spec, GridFunction(dom, full)).values.ravel()[free]

    vec = u.ravel()[free].copy()
    for _ in range(max_iter):
        g = grad(vec)
        if np.max(np.abs(g)) <= tol:
            break
        h = 1e-7
        H = np.empty((free.size, free.size))
        for j in range(free.size):
            e = np.zeros(free.size)
            e[j] = h
            H[:, j] = (grad(vec + e) - grad(vec - e)) / (2 * h)
        H = 0.5 * (H + H.T)
        step = np.linalg.solve(H, -g)
        t = 1.0
        e0 = None
        for _ in range(40):
            trial = vec + t * step
            full = np.zeros(dom.shape)
            full.ravel()[free] = trial
            et = energy(spec, GridFunction(dom, full))
            if e0 is None:
                full0 = np.zeros(dom.shape)
                full0.ravel()[free] = vec
                e0 = energy(spec, GridFunction(dom, full0))
            if et <= e0:
                vec = trial
                break
            t *= 0.5
    out = np.zeros(dom.shape)
    out.ravel()[free] = vec
    return GridFunction(dom, out)


class TestEnergy:
    def test_zero_function_zero_energy(self):
        spec = interval_problem(f=2.0)
        assert energy(spec, GridFunction.constant(spec.domain, 0.0)) == 0.0

    def test_quadratic_form_oracle(self, rng):
        # p = q = 2, mu = 0: energy is the hand-coded Dirichlet quadratic form
        spec = interval_problem(n=65, f=1.0)
        dom = spec.domain
        h = dom.spacing[0]
        vals = rng.normal(size=65)
        vals[0] = vals[-1] = 0.0
        u = GridFunction(dom, vals)
        hand = 0.5 * np.sum((np.diff(vals) / h) ** 2) * h - np.sum(dom.interior_weights * vals)
        assert energy(spec, u) == pytest.approx(hand, abs=1e-10)

    def test_dirichlet_contract_violation(self):
        spec = interval_problem()
        with pytest.raises(ContractError):
            energy(spec, GridFunction.constant(spec.domain, 1.0))

    def test_convexity_of_gradient_part(self, rng):
        spec = interval_problem(n=49, p=2.0, q=3.0, mu=1.0, f=0.0, N=5)
        dom = spec.domain
        for _ in range(20):
            a = rng.normal(size=49)
            b = rng.normal(size=49)
            a[0] = a[-1] = b[0] = b[-1] = 0.0
            mid = energy(spec, GridFunction(dom, 0.5 * (a + b)))
            avg = 0.5 * (energy(spec, GridFunction(dom, a)) + energy(spec, GridFunction(dom, b)))
            assert mid <= avg + 1e-12 * max(1.0, abs(avg))


class TestEnergyGradient:
    def test_zero_at_origin_without_load(self):
        spec = interval_problem(f=0.0)
        g = energy_gradient(spec, GridFunction.constant(spec.domain, 0.0))
        assert np.all(g.values == 0.0)

    def test_finite_difference_directional(self, rng):
        spec = interval_problem(n=49, p=2.0, q=3.0, mu=0.7, f=0.5, N=5)
        dom = spec.domain
        uv = rng.normal(size=49)
        vv = rng.normal(size=49)
        uv[0] = uv[-1] = vv[0] = vv[-1] = 0.0
        u = GridFunction(dom, uv)
        g = energy_gradient(spec, u).values
        eps = 1e-6
        ep = energy(spec, GridFunction(dom, uv + eps * vv))
        em = energy(spec, GridFunction(dom, uv - eps * vv))
        fd = (ep - em) / (2 * eps)
        directional = float(np.sum(g * vv))
        assert fd == pytest.approx(directional, rel=1e-5)

    def test_linear_case_matches_stiffness_pattern(self, rng):
        # p = q = 2, mu = 0: gradient is K u - load with the tridiagonal K
        spec = interval_problem(n=33, f=1.0)
        dom = spec.domain
        h = dom.spacing[0]
        vals = rng.normal(size=33)
        vals[0] = vals[-1] = 0.0
        g = energy_gradient(spec, GridFunction(dom, vals)).values
        K = (np.diag(np.full(33, 2.0)) - np.diag(np.ones(32), 1) - np.diag(np.ones(32), -1)) / h
        hand = K @ vals - dom.interior_weights
        hand[0] = hand[-1] = 0.0
        assert np.max(np.abs(g - hand)) <= 1e-10


class TestSolve:
    def test_zero_source_gives_zero(self):
        spec = interval_problem(f=0.0)
        u, rep = solve(spec)
        assert rep.converged
        assert np.max(np.abs(u.values)) <= 1e-12

    def test_poisson_matches_parabola(self):
        spec = interval_problem(n=1025)
        u, rep = solve(spec)
        x = spec.domain.axes[0]
        assert rep.converged
        assert np.max(np.abs(u.values - x * (1 - x) / 2)) <= 1e-4

    def test_double_phase_matches_newton_oracle(self):
        spec = interval_problem(n=129, p=2.0, q=4.0, mu=1.0, N=5, grad_tol=1e-12)
        u, rep = solve(spec)
        assert rep.converged
        oracle = dense_newton_oracle(spec)
        assert np.max(np.abs(u.values - oracle.values)) <= 1e-6

    def test_energy_monotone_along_iterations(self):
        spec = interval_problem(n=257, p=2.0, q=4.0, mu=1.0, N=5)
        _, rep = solve(spec)
        assert all(np.diff(rep.energy_history) <= 1e-13)

    def test_initialization_independence(self, rng):
        spec = interval_problem(n=129, p=2.0, q=3.0, mu=0.5, N=5, grad_tol=1e-12)
        u0, _ = solve(spec)
        init = rng.normal(size=129)
        init[0] = init[-1] = 0.0
        u1, _ = solve(spec, u0=GridFunction(spec.domain, init))
        assert np.max(np.abs(u0.values - u1.values)) <= 1e-8

    def test_vanishing_weight_ignores_q(self):
        a, _ = solve(interval_problem(n=129, p=2.0, q=2.5, mu=0.0, N=5))
        b, _ = solve(interval_problem(n=129, p=2.0, q=4.5, mu=0.0, N=6))
        assert np.max(np.abs(a.values - b.values)) <= 1e-10

    def test_equal_exponents_rescale(self):
        # p = q means the weight only rescales the operator: with mu = 1 the
        # solution halves relative to mu = 0
        a, _ = solve(interval_problem(n=129, p=2.0, q=2.0, mu=0.0))
        b, _ = solve(interval_problem(n=129, p=2.0, q=2.0, mu=1.0))
        assert np.max(np.abs(b.values - a.values / 2)) <= 1e-9

    def test_2d_problem_converges(self):
        dom = GridDomain.box((33, 33))
        field = dom.constant_field(4, 2.0, 3.0, 1.0)
        spec = ProblemSpec(dom, field, GridFunction.constant(dom, 1.0))
        u, rep = solve(spec)
        assert rep.converged
        assert weak_residual(spec, u) <= 1e-8
        assert np.max(u.values) > 0

    def test_iteration_cap_reports_not_converged(self):
        spec = interval_problem(n=257, p=2.0, q=4.0, mu=1.0, N=5, max_iter=1,
                                grad_tol=1e-14, step_tol=1e-16)
        _, rep = solve(spec)
        assert not rep.converged
        assert rep.message == "iteration cap reached"


class TestNeumann:
    def make_spec(self, n=129):
        dom = GridDomain.interval(n)
        field = dom.constant_field(3, 2.0, 2.2, 0.5)
        x = dom.axes[0]
        f = GridFunction(dom, np.sin(2 * np.pi * x))  # compatible: zero mean
        return ProblemSpec(dom, field, f, bc="neumann")

    def test_zero_data_zero_solution(self):
        dom = GridDomain.interval(65)
        field = dom.constant_field(3, 2.0, 2.2, 0.5)
        spec = ProblemSpec(dom, field, GridFunction.constant(dom, 0.0), bc="neumann")
        u, rep = solve(spec)
        assert rep.converged
        assert weak_residual(spec, u) <= 1e-10
        assert np.max(np.abs(u.values - np.mean(u.values))) <= 1e-10

    def test_compatible_source_converges(self):
        spec = self.make_spec()
        u, rep = solve(spec)
        assert rep.converged
        assert weak_residual(spec, u) <= 1e-8

    def test_weak_residual_positive_off_solution(self, rng):
        spec = self.make_spec(65)
        u = GridFunction(spec.domain, rng.normal(size=65))
        assert weak_residual(spec, u) > 1e-4


class TestWeakResidual:
    def test_at_minimizer_small(self):
        spec = interval_problem(n=129, p=2.0, q=3.0, mu=1.0, N=5,
                                grad_tol=1e-11, step_tol=0.0)
        u, _ = solve(spec)
        assert weak_residual(spec, u) <= 1e-10

    def test_custom_basis_directional(self, rng):
        spec = interval_problem(n=65, p=2.0, q=3.0, mu=1.0, N=5)
        u, _ = solve(spec)
        basis = []
        for _ in range(4):
            v = rng.normal(size=65)
            v[0] = v[-1] = 0.0
            basis.append(GridFunction(spec.domain, v))
        assert weak_residual(spec, u, basis) <= 1e-8

    def test_random_function_fails_stationarity(self, rng):
        spec = interval_problem(n=65, p=2.0, q=3.0, mu=1.0, N=5)
        vals = rng.normal(size=65)
        vals[0] = vals[-1] = 0.0
        assert weak_residual(spec, GridFunction(spec.domain, vals)) > 1e-4


class TestSolutionsFeedTruncationMachinery:
    def test_dirichlet_solution_bounded_via_iteration(self):
        spec = interval_problem(n=257, p=2.0, q=2.2, mu=1.0, N=3)
        u, rep = solve(spec)
        assert rep.converged
        top = float(np.max(np.abs(u.values)))
        report = two_sided_bound(u, spec.field, "subcritical-D",
                                 kappa_star_grid=np.geomspace(top / 16, top + 0.1, 10),
                                 r=3.0, s=3.5)
        assert report.found and report.bound_ok
