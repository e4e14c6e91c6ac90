import numpy as np
import pytest

from nmfbs.hilbert import inner
from nmfbs.pde import EllipticProblem, Grid2D, SPDSolver, directional_fd_check


def dense_newton(kappa, A, u, tol=1e-14, max_iter=60):
    """Independent dense Newton oracle for kappa A y + exp(y) = u."""
    y = np.zeros(u.size)
    for _ in range(max_iter):
        r = kappa * A @ y + np.exp(y) - u
        if np.max(np.abs(r)) < tol:
            break
        y -= np.linalg.solve(kappa * A + np.diag(np.exp(y)), r)
    return y


def test_unit_control_gives_zero_state():
    p = EllipticProblem(Grid2D(10))
    y = p.state_solve(p.space.element(np.ones(p.grid.dim)))
    assert np.all(y.coeffs == 0.0)


def test_manufactured_solution():
    g = Grid2D(24)
    p = EllipticProblem(g, kappa=0.05)
    x1, x2 = g.coordinates()
    y_star = 0.5 * np.sin(np.pi * x1) * np.sin(np.pi * x2)
    u = p.space.element(p.stiffness @ y_star + np.exp(y_star))
    np.testing.assert_allclose(p.state_solve(u).coeffs, y_star, atol=1e-9)


def test_state_and_adjoint_against_dense_oracle(rng):
    g = Grid2D(8)
    p = EllipticProblem(g, kappa=0.02)
    u = p.space.element(rng.uniform(-3, 2, g.dim))
    A = g.laplacian().toarray()
    y = dense_newton(0.02, A, u.coeffs)
    np.testing.assert_allclose(p.state_solve(u).coeffs, y, atol=1e-11)
    p_dense = np.linalg.solve(0.02 * A + np.diag(np.exp(y)), -(y - p.y_d.coeffs))
    np.testing.assert_allclose(p.adjoint_solve(p.state_solve(u)).coeffs, p_dense, atol=1e-11)


def test_jacobian_symmetric_and_diagonal_patch(rng):
    g = Grid2D(6)
    p = EllipticProblem(g)
    y = rng.normal(size=g.dim)
    J = p.jacobian(y).toarray()
    np.testing.assert_allclose(J, J.T, rtol=0, atol=0)
    np.testing.assert_allclose(J, p.stiffness.toarray() + np.diag(np.exp(y)), rtol=1e-15)
    # the stored stiffness matrix is not modified
    np.testing.assert_array_equal(p.jacobian(np.zeros(g.dim)).toarray(), p.stiffness.toarray() + np.eye(g.dim))


def test_warm_start_saves_newton_steps(rng):
    g = Grid2D(16)
    p = EllipticProblem(g)
    obj = p.objective()
    u = p.space.element(rng.uniform(-3, 2, g.dim))
    v = u + p.space.element(1e-3 * rng.normal(size=g.dim))
    obj.smooth_eval(u)
    obj.smooth_eval(v)
    cold, warm = obj.state_cache.newton_steps
    assert warm < cold
    # exact cache hit: no further Newton solve
    obj.smooth_eval(v.copy())
    assert len(obj.state_cache.newton_steps) == 2


def test_target_equal_to_state_gives_zero_cost_and_gradient(rng):
    g = Grid2D(8)
    base = EllipticProblem(g)
    u = base.space.element(rng.uniform(-3, 2, g.dim))
    p = EllipticProblem(g, y_d=base.state_solve(u).coeffs)
    f, grad = p.reduced_gradient(u)
    assert f == 0.0
    assert np.all(grad.coeffs == 0.0)


@pytest.mark.parametrize("n", [6, 12])
def test_finite_difference_gradient(n, rng):
    g = Grid2D(n)
    p = EllipticProblem(g)
    u = p.space.element(np.clip(rng.uniform(-1, 1, g.dim), -3, 2))
    _, grad = p.reduced_gradient(u)
    dirs = [p.space.element(rng.normal(size=g.dim)) for _ in range(4)]
    for chk in directional_fd_check(p.cost, grad, u, dirs, 1e-5):
        assert chk.rel_error < 1e-6


def test_flipped_adjoint_fails_gradient_check(rng):
    g = Grid2D(6)
    p = EllipticProblem(g, adjoint_sign=-1.0)
    u = p.space.zero()
    _, grad = p.reduced_gradient(u)
    h = p.space.element(rng.normal(size=g.dim))
    (chk,) = directional_fd_check(p.cost, grad, u, [h], 1e-5)
    assert chk.rel_error == pytest.approx(2.0, rel=1e-4)


def test_curvature_probe(rng):
    g = Grid2D(6)
    p = EllipticProblem(g)
    u = p.space.element(rng.uniform(-1, 1, g.dim))
    assert p.curvature_probe(u, p.space.zero()) == 0.0
    h = p.space.element(rng.normal(size=g.dim))
    eps = 1e-3
    fd = (p.cost(u + h * eps) - 2 * p.cost(u) + p.cost(u - h * eps)) / eps**2
    assert p.curvature_probe(u, h) == pytest.approx(fd, rel=1e-4)
    # with vanishing adjoint the probe reduces to |y_h|^2 > 0
    q = EllipticProblem(g, y_d=p.state_solve(u).coeffs)
    val = q.curvature_probe(u, h)
    assert val > 0
    assert q.convexity_margin(u, h) == pytest.approx(val + q.sigma * inner(h, h), rel=1e-14)


def test_bad_target_size():
    with pytest.raises(ValueError):
        EllipticProblem(Grid2D(4), y_d=np.zeros(3))
    with pytest.raises(ValueError):
        EllipticProblem(Grid2D(4), kappa=0.0)


def test_jacobian_solve_is_self_adjoint(rng):
    g = Grid2D(10)
    p = EllipticProblem(g)
    y = p.state_solve(p.space.element(rng.uniform(-3, 2, g.dim)))
    solve_j = SPDSolver(p.jacobian(y.coeffs), g.n)
    a, b = p.space.element(rng.normal(size=g.dim)), p.space.element(rng.normal(size=g.dim))
    lhs = inner(p.space.element(solve_j(a.coeffs)), b)
    rhs = inner(a, p.space.element(solve_j(b.coeffs)))
    assert lhs == pytest.approx(rhs, rel=1e-11)
