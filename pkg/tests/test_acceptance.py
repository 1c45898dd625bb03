"""Acceptance criteria 1-11, each at its stated tolerance and time budget.

Every test records a ``PASS/FAIL criterion N: ...`` line through the
``acceptance`` fixture; the lines are repeated in the pytest terminal summary.
"""

import contextlib
import io
import json
import math
import time

import numpy as np
import pytest

from oracles import (integrate_with_fluxes, interior_point, newton_quadratic, random_spec,
                     relax_fast, two_protein_oracle)
from tqssa.cli import main
from tqssa.fullsim import IntegratorConfig, conserved_totals, integrate_full
from tqssa.matops import hadamard, hat, kron, unvec, vec
from tqssa.netmodel import NetworkSpec, bundled_path, load_network
from tqssa.reduction import complex_jacobian, project_initial, solve_complexes
from tqssa.validity import (epsilon_report, lemma_a1_bound, omega_invariance_check,
                            slow_manifold_jacobian)

Z1 = np.zeros((1, 1))
MM = NetworkSpec(1, Z1, Z1, Z1, [[1.0]], [[3.0]], [[1.0]], [1.0], [1.0], [1.0])

_OFF = np.array([[0.0, 1.0], [1.0, 0.0]])
_DIAG = np.eye(2)
G2M = NetworkSpec(2, 5 * _OFF, _OFF, _OFF, 5 * _DIAG, _DIAG, _DIAG,
                  [10.0, 10.1], [10.0, 2.0], [0.0, 9.0])


def best_time(fn, repeats):
    """Fastest of ``repeats`` wall-clock runs of ``fn()``."""
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def cold_projection(spec):
    # a fresh copy has no cached manifold system, so setup is included
    return project_initial(spec.replace()).p_hat0


def test_bundled_models_match_stated_parameters():
    assert load_network(bundled_path("isolated_mm")) == MM
    assert load_network(bundled_path("g2m_two_protein")) == G2M


def test_criterion_01_isolated_projection(acceptance):
    p_hat = cold_projection(MM)[0]
    runtime = best_time(lambda: cold_projection(MM), 50)
    ok = abs(p_hat - 0.8284) <= 5e-4 and runtime < 1e-3
    acceptance(1, ok, f"isolated projection {p_hat:.6f} (target 0.8284 +/- 0.0005), "
                      f"{runtime * 1e3:.3f} ms (< 1 ms)")
    assert ok


def test_criterion_02_two_protein_projection(acceptance):
    p_hat = cold_projection(G2M)
    runtime = best_time(lambda: cold_projection(G2M), 20)
    err = np.abs(p_hat - [0.12, 0.83]).max()
    ok = err <= 5e-3 and runtime < 1e-2
    acceptance(2, ok, f"two-protein projection ({p_hat[0]:.4f}, {p_hat[1]:.4f}) vs (0.12, 0.83), "
                      f"max deviation {err:.4f} (<= 0.005), {runtime * 1e3:.3f} ms (< 10 ms)")
    assert ok


def run_compare(model, *flags):
    out = io.StringIO()
    start = time.perf_counter()
    with contextlib.redirect_stdout(out):
        code = main(["compare", model, *flags])
    return code, json.loads(out.getvalue()), time.perf_counter() - start


def test_criterion_03_two_protein_trajectory(acceptance):
    code, summary, runtime = run_compare("g2m_two_protein", "--t-end", "10", "--transient", "0.5")
    eps = epsilon_report(G2M).eps
    err = summary["relative_sup_error"]
    ok = code == 0 and err <= 0.05 and err <= 10 * eps and runtime < 5.0
    acceptance(3, ok, f"two-protein relative sup error {err:.4g} (<= 0.05 and <= 10*eps = "
                      f"{10 * eps:.4g}), {runtime:.2f} s (< 5 s)")
    assert ok


def test_criterion_04_isolated_trajectory(acceptance):
    code, summary, runtime = run_compare("isolated_mm", "--t-end", "10", "--transient", "0.5")
    eps = epsilon_report(MM).eps
    err = summary["relative_sup_error"]
    ok = (code == 0 and err <= 0.05 and err <= 10 * eps and runtime < 1.0
          and math.isclose(eps, 1 / 36, rel_tol=1e-12))
    acceptance(4, ok, f"isolated relative sup error {err:.4g} (<= 0.05 and <= 10*eps = "
                      f"{10 * eps:.4g}, eps = {eps:.6f}), {runtime:.3f} s (< 1 s)")
    assert ok


def test_criterion_05_epsilon_bound(acceptance):
    rng = np.random.default_rng(5)
    start = time.perf_counter()
    tuples = 10.0 ** rng.uniform(-6, 6, (10_000, 5))
    results = [lemma_a1_bound(*t) for t in tuples]
    limit = [lemma_a1_bound(1.0, 1.0, s, 1.0, s)[0] for s in 10.0 ** -np.arange(1, 10)]
    runtime = time.perf_counter() - start
    worst = max(eps for eps, _ in results)
    all_ok = all(ok and eps <= 0.25 for eps, ok in results)
    ok = all_ok and limit[-1] > 0.249 and runtime < 1.0
    acceptance(5, ok, f"10^4 tuples max eps {worst:.6f} (<= 0.25), limit sequence reaches "
                      f"{limit[-1]:.6f} (> 0.249), {runtime:.3f} s (< 1 s)")
    assert ok


def class_conforming_instances(seed, count):
    """``count`` random (spec, interior p) pairs, n in 1..3, dense and sparse masks."""
    rng = np.random.default_rng(seed)
    out = []
    k = 0
    while len(out) < count:
        spec = random_spec(rng, 1 + k % 3, [1.0, 0.4][(k // 3) % 2])
        k += 1
        try:
            out.append((spec, interior_point(rng, spec, solve_complexes)))
        except RuntimeError:
            continue
    return out


def test_criterion_06_fast_subsystem_stability(acceptance):
    start = time.perf_counter()
    instances = class_conforming_instances(6, 100)
    worst = max(slow_manifold_jacobian(spec, p)[1].max_real_part for spec, p in instances)
    runtime = time.perf_counter() - start
    ok = worst < -1e-10 and runtime < 10.0
    acceptance(6, ok, f"100 specs max real eigenvalue {worst:.4g} (< -1e-10), "
                      f"{runtime:.2f} s (< 10 s)")
    assert ok


def test_criterion_07_oracle_equivalence(acceptance):
    start = time.perf_counter()
    res = newton = relax = 0.0
    for spec, p in class_conforming_instances(7, 100):
        sol = solve_complexes(spec, p)
        res = max(res, sol.residual)
        c_u, c_e = newton_quadratic(spec, sol.p_bar)
        newton = max(newton, np.abs(c_u - sol.c_u).max(), np.abs(c_e - sol.c_e).max())
        c_u, c_e = relax_fast(spec, sol.p_bar)
        relax = max(relax, np.abs(c_u - sol.c_u).max(), np.abs(c_e - sol.c_e).max())
    runtime = time.perf_counter() - start
    ok = res <= 1e-10 and newton <= 1e-8 and relax <= 1e-6 and runtime < 30.0
    acceptance(7, ok, f"100 instances residual {res:.2g} (<= 1e-10), Newton {newton:.2g} "
                      f"(<= 1e-8), relaxation {relax:.2g} (<= 1e-6), {runtime:.2f} s (< 30 s)")
    assert ok


def test_criterion_08_complex_jacobian(acceptance):
    rng = np.random.default_rng(8)
    start = time.perf_counter()
    worst = 0.0
    for k in range(100):
        spec = random_spec(rng, 1 + k % 3, [1.0, 0.5][(k // 3) % 2], autocatalysis=k % 2 == 1)
        p = rng.uniform(0.05, 0.95, spec.n) * spec.u_total
        sol = complex_jacobian(spec, p)
        for j in range(spec.n):
            h = 1e-6 * spec.u_total[j]
            step = np.zeros(spec.n)
            step[j] = h
            hi, lo = solve_complexes(spec, p + step), solve_complexes(spec, p - step)
            fd = np.concatenate([(hi.c_u - lo.c_u).ravel(), (hi.c_e - lo.c_e).ravel()]) / (2 * h)
            an = np.concatenate([sol.dcu_dp[:, :, j].ravel(), sol.dce_dp[:, :, j].ravel()])
            worst = max(worst, np.abs(an - fd).max() / max(np.abs(fd).max(), 1e-300))
    runtime = time.perf_counter() - start
    ok = worst <= 1e-6 and runtime < 10.0
    acceptance(8, ok, f"100 instances worst relative deviation {worst:.2g} (<= 1e-6), "
                      f"{runtime:.2f} s (< 10 s)")
    assert ok


def trajectory_specs():
    rng = np.random.default_rng(9)
    return [MM, G2M] + [random_spec(rng, 1 + k % 3, [1.0, 0.5][k % 2]) for k in range(10)]


def test_criterion_09_conservation_and_invariance(acceptance):
    drift = 0.0
    violations = []
    config = IntegratorConfig(t_end=10.0, dt_out=0.05)
    for spec in trajectory_specs():
        scale = max(spec.u_total.max(), spec.e_total.max())
        for state in integrate_with_fluxes(spec, 10.0, samples=51):
            prot, enz = conserved_totals(spec, state)
            drift = max(drift, np.abs(prot - spec.u_total).max() / scale,
                        np.abs(enz - spec.e_total).max() / scale)
        violations += omega_invariance_check(spec, integrate_full(spec, config))
    ok = drift <= 1e-8 and not violations
    acceptance(9, ok, f"12 trajectories conservation drift {drift:.2g} * scale (<= 1e-8), "
                      f"{len(violations)} invariant-region violations (slack 10*atol)")
    assert ok


def _linear_map(rng, rows, cols, m):
    g0 = rng.normal(size=(rows, cols))
    d = rng.normal(size=(rows * cols, m * m))
    return (lambda x: g0 + unvec(d @ vec(x), rows, cols)), d


def _exact_derivative(f, x):
    # f is quadratic in x, so a unit-step central difference is exact
    m = x.shape[0]
    return np.column_stack([(vec(f(x + e)) - vec(f(x - e))) / 2
                            for e in (unvec(v, m, m) for v in np.eye(m * m))])


def _rel(a, b):
    return np.abs(a - b).max() / (1 + np.abs(b).max())


def test_criterion_10_matrix_identities(acceptance):
    rng = np.random.default_rng(10)
    worst = {"vec(ABC)": 0.0, "vec(A*B)": 0.0, "d vec(GH)": 0.0, "d vec(G*H)": 0.0}
    for _ in range(300):
        p, q, r, s, m = rng.integers(1, 5, 5)
        a, b, c = rng.normal(size=(p, q)), rng.normal(size=(q, r)), rng.normal(size=(r, s))
        worst["vec(ABC)"] = max(worst["vec(ABC)"], _rel(kron(c.T, a) @ vec(b), vec(a @ b @ c)))
        a2, b2 = rng.normal(size=(p, q)), rng.normal(size=(p, q))
        worst["vec(A*B)"] = max(worst["vec(A*B)"], _rel(hat(a2) @ vec(b2), vec(hadamard(a2, b2))),
                                _rel(hat(b2) @ vec(a2), vec(hadamard(a2, b2))))
        x = rng.normal(size=(m, m))
        g, dg = _linear_map(rng, p, q, m)
        h, dh = _linear_map(rng, q, r, m)
        k, dk = _linear_map(rng, p, q, m)
        analytic = kron(h(x).T, np.eye(p)) @ dg + kron(np.eye(r), g(x)) @ dh
        worst["d vec(GH)"] = max(worst["d vec(GH)"],
                                 _rel(analytic, _exact_derivative(lambda y: g(y) @ h(y), x)))
        analytic = hat(k(x)) @ dg + hat(g(x)) @ dk
        worst["d vec(G*H)"] = max(worst["d vec(G*H)"],
                                  _rel(analytic, _exact_derivative(lambda y: g(y) * k(y), x)))
    ok = max(worst.values()) <= 1e-10
    detail = ", ".join(f"{name} {err:.1g}" for name, err in worst.items())
    acceptance(10, ok, f"300 random draws per identity, worst deviations {detail} (<= 1e-10)")
    assert ok


def test_criterion_11_two_protein_structure(acceptance):
    rng = np.random.default_rng(11)
    worst = 0.0
    for xp, yp in rng.uniform(0, 1, (50, 2)) * [10.0, 10.1]:
        sol = solve_complexes(G2M, [xp, yp])
        ours = np.array([sol.c_u[1, 0], sol.c_u[0, 1], sol.c_e[0, 0], sol.c_e[1, 1]])
        worst = max(worst, np.abs(ours - two_protein_oracle(xp, yp)).max())
    ok = worst <= 1e-12
    acceptance(11, ok, f"50 random points max deviation {worst:.2g} from the hand-built "
                       f"linear system (<= 1e-12)")
    assert ok


@pytest.mark.parametrize("model", [MM, G2M])
def test_fig_projections_are_exact_manifold_points(model):
    # the projection is correct for its defining equation even where criterion 2 fails
    p_hat = project_initial(model).p_hat0
    assert np.abs(solve_complexes(model, p_hat).p_bar - model.p0).max() <= 1e-10
