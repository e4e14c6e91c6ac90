import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nmfbs.composite import CompositeObjective, prox_grad
from nmfbs.hilbert import HilbertVec, InnerProductSpace, norm
from nmfbs.prox import ProxOperator
from nmfbs.solver import (
    TRACE_HEADER,
    BacktrackExhausted,
    SolverConfig,
    Status,
    backtrack,
    ell_nu_indices,
    memory_len,
    nonmonotone_accept,
    read_trace_csv,
    solve,
    write_trace_csv,
)
from nmfbs.stepsize import StepRule
from nmfbs.synthetic import QuadraticL1Problem

seeds = st.integers(0, 2**32 - 1)


def one_d():
    return QuadraticL1Problem(np.array([1.0]), np.array([3.0]), lam=1.0)


def test_hand_trace_fixed_with_linesearch():
    p = one_d()
    cfg = SolverConfig(delta=0.5, m_max=0, alpha0=1.0, alpha_lb=1e-4, alpha_ub=1e2, tol=1e-12,
                       rule="fixed", linesearch_enabled=True)
    res = solve(p.objective(), cfg, p.space.zero())
    assert res.status is Status.CONVERGED
    assert [r.k for r in res.trace] == [0, 1]
    assert [r.f_value for r in res.trace] == [4.5, 2.5]
    assert res.trace[0].gmap_norm == 2.0 and res.trace[0].alpha_k == 1.0
    assert res.trace[1].gmap_norm == 0.0
    assert res.u_final.coeffs[0] == 2.0
    # one accepted trial (exactly on the acceptance boundary 4.5 - 0.5*4 = 2.5)
    assert res.f_evals == 1 and res.grad_evals == 2


def test_nonmonotone_accept_boundary():
    # max(window) = 10, delta/alpha * |G|^2 = 0.5/1 * 6 = 3
    w = [7.0, 10.0, 3.0]
    assert nonmonotone_accept(w, 7.0, 0.5, 1.0, 6.0)
    assert not nonmonotone_accept(w, 7.0000001, 0.5, 1.0, 6.0)
    assert not nonmonotone_accept(w, math.inf, 0.5, 1.0, 6.0)
    assert not nonmonotone_accept(w, math.nan, 0.5, 1.0, 6.0)
    with pytest.raises(ValueError):
        nonmonotone_accept([], 0.0, 0.5, 1.0, 1.0)


def test_memory_len():
    assert [memory_len(k, 3) for k in range(6)] == [0, 1, 2, 3, 3, 3]
    assert [memory_len(k, 0) for k in range(4)] == [0, 0, 0, 0]
    with pytest.raises(ValueError):
        memory_len(-1, 2)


def test_ell_nu_examples():
    ell, nu = ell_nu_indices([5.0, 7.0, 6.0], 2)
    assert ell == [0, 1, 1]
    assert nu == [0]
    ell, nu = ell_nu_indices([5.0, 4.0, 3.0, 6.0], 0)
    assert ell == [0, 1, 2, 3] and nu == [0, 1, 2, 3]
    # ties go to the most recent index
    ell, _ = ell_nu_indices([1.0, 1.0, 1.0], 2)
    assert ell == [0, 1, 2]


def test_linesearch_disabled_never_evaluates_f():
    p = QuadraticL1Problem.random(20, seed=3, lam=0.2)
    calls = []

    def f(u):
        calls.append(1)
        return p.f(u)

    obj = CompositeObjective(f, p.grad, p.prox_op)
    cfg = SolverConfig(rule="bb1a", linesearch_enabled=False, tol=1e-8, max_iter=300)
    res = solve(obj, cfg, p.space.zero())
    assert res.status is Status.CONVERGED
    assert res.f_evals == 0
    assert all(r.backtracks == 0 for r in res.trace)


def test_backtrack_bound():
    # accepted alpha after at least one backtrack stays below max(eta L / (2 (1 - delta)), alpha_ub)
    p = QuadraticL1Problem.random(30, seed=5, d_min=1.0, d_max=50.0, lam=0.05)
    cfg = SolverConfig(rule="bb2a", delta=0.9, eta=8.0, m_max=0, alpha_lb=1e-4, alpha_ub=1e2, tol=1e-9)
    obj = p.objective()
    u = p.space.zero()
    g = p.grad(u)
    F = obj(u)
    for alpha_init in (1e-4, 1e-2, 0.5, 3.0):
        alpha, i, pg, F_new = backtrack(obj, u, g, alpha_init, cfg, [F])
        assert alpha == alpha_init * cfg.eta**i
        if i > 0:
            assert alpha <= max(cfg.eta * p.lipschitz / (2 * (1 - cfg.delta)), cfg.alpha_ub)
        assert F_new <= F - cfg.delta / alpha * norm(pg.g) ** 2


def test_backtrack_exhausted():
    s = InnerProductSpace.uniform(1)
    # f reported as +inf everywhere except the start: nothing is ever accepted
    obj = CompositeObjective(lambda u: 0.0 if u.coeffs[0] == 0 else math.inf,
                             lambda u: HilbertVec([1.0], s), ProxOperator(s))
    cfg = SolverConfig(max_backtracks=3, rule="fixed", alpha0=1.0)
    with pytest.raises(BacktrackExhausted) as info:
        backtrack(obj, s.zero(), HilbertVec([1.0], s), 1.0, cfg, [0.0])
    assert info.value.f_evals == 4
    res = solve(obj, cfg.replace(tol=1e-12), s.zero())
    assert res.status is Status.BACKTRACK_EXHAUSTED
    assert res.f_evals == 4


def test_nonfinite_gradient_status():
    s = InnerProductSpace.uniform(2)
    obj = CompositeObjective(lambda u: 0.0, lambda u: HilbertVec([math.inf, 0.0], s), ProxOperator(s))
    res = solve(obj, SolverConfig(), s.zero())
    assert res.status is Status.NUMERIC_ERROR
    assert "iteration 0" in res.message


@pytest.mark.parametrize("rule", list(StepRule))
@pytest.mark.parametrize("ls", [True, False])
def test_converges_to_closed_form(rule, ls):
    p = QuadraticL1Problem.random(40, seed=11, d_min=1.0, d_max=4.0, lam=0.1)
    cfg = SolverConfig(rule=rule, linesearch_enabled=ls, alpha0=4.0, tol=1e-10, max_iter=2000)
    res = solve(p.objective(), cfg, p.space.zero())
    assert res.status is Status.CONVERGED
    np.testing.assert_allclose(res.u_final.coeffs, p.minimizer().coeffs, atol=1e-9)
    t = prox_grad(p.objective(), res.u_final, cfg.alpha_ub).t
    np.testing.assert_allclose(t.coeffs, res.u_final.coeffs, atol=1e-9)


@given(seeds)
def test_counting_contract(seed):
    rng = np.random.default_rng(seed)
    p = QuadraticL1Problem.random(int(rng.integers(1, 30)), seed=seed, lam=float(rng.uniform(0, 1)))
    rule = list(StepRule)[int(rng.integers(0, 7))]
    cfg = SolverConfig(rule=rule, m_max=int(rng.integers(0, 9)), tol=1e-8, max_iter=400)
    res = solve(p.objective(), cfg, p.space.zero())
    tr = res.trace
    assert [r.k for r in tr] == list(range(len(tr)))
    assert [r.cum_grad_evals for r in tr] == list(range(1, len(tr) + 1))
    prev = 0
    for r in tr[:-1]:
        assert r.cum_f_evals - prev == (r.backtracks + 1 if cfg.linesearch_enabled else 0)
        prev = r.cum_f_evals
    # the terminal iteration only evaluates the stopping test
    assert tr[-1].cum_f_evals == prev
    assert all(r.alpha_k >= cfg.alpha_lb for r in tr)
    if res.status is Status.CONVERGED:
        assert res.f_evals >= res.grad_evals - 1
        assert tr[-1].gmap_norm <= cfg.tol
    # nonmonotone decrease holds along the trace
    F = [r.f_value for r in tr]
    for k in range(len(tr) - 1):
        win = F[k - memory_len(k, cfg.m_max): k + 1]
        assert F[k + 1] <= max(win) - cfg.delta / tr[k].alpha_k * tr[k].gmap_norm ** 2 + 1e-12 * (1 + abs(F[k]))


def test_infeasible_start_is_projected():
    p = QuadraticL1Problem.random(10, seed=2)
    u0 = p.space.element(np.full(10, 50.0))
    res = solve(p.objective(), SolverConfig(tol=1e-8), u0)
    assert res.status is Status.CONVERGED
    assert math.isfinite(res.trace[0].f_value)


def test_max_iter_status():
    p = QuadraticL1Problem.random(10, seed=2)
    res = solve(p.objective(), SolverConfig(tol=1e-14, max_iter=2, rule="fixed", alpha0=1e2), p.space.zero())
    assert res.status is Status.MAX_ITER
    assert res.iterations == 2 and len(res.trace) == 3


def test_determinism_and_csv_roundtrip(tmp_path):
    p = QuadraticL1Problem.random(15, seed=8, lam=0.3)
    cfg = SolverConfig(tol=1e-9)
    a = solve(p.objective(), cfg, p.space.zero())
    b = solve(p.objective(), cfg, p.space.zero())
    ta, tb = write_trace_csv(a.trace, timing=False), write_trace_csv(b.trace, timing=False)
    assert ta == tb
    path = tmp_path / "t.csv"
    write_trace_csv(a.trace, path)
    assert path.read_text().splitlines()[0] == ",".join(TRACE_HEADER)
    back = read_trace_csv(path)
    assert [r.f_value for r in back] == [r.f_value for r in a.trace]
    assert [r.alpha_k for r in back] == [r.alpha_k for r in a.trace]


def test_read_trace_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_trace_csv(path)


def test_store_iterates():
    p = QuadraticL1Problem.random(5, seed=1)
    res = solve(p.objective(), SolverConfig(tol=1e-8, store_iterates=True), p.space.zero())
    assert len(res.iterates) == len(res.grads) == len(res.trace)


@pytest.mark.parametrize("kw", [dict(delta=1.0), dict(delta=0.0), dict(m_max=-1), dict(eta=1.0),
                                dict(alpha_lb=1.0, alpha_ub=1.0), dict(alpha0=0.0), dict(tol=0.0),
                                dict(max_iter=0), dict(rule="bb9")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)
