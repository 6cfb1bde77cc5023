"""End-to-end acceptance checks, one test per criterion.

Each test records its measured values and a pass/fail verdict; the
verdicts are printed as one line per criterion at the end of the session
(see ``conftest.pytest_terminal_summary``).
"""

import time

import numpy as np
import pytest

from neseek import game as gm
from neseek import graph as gr
from neseek import plant as pl
from neseek import rules, scenario, sim
from neseek.rules import Mode
from conftest import ACCEPTANCE, EXAMPLE1_NE, EXAMPLE2_NE, aggregate_ne


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def ex1(**kw):
    return scenario.from_dict(scenario.example1(**kw))


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_c01_oracle_optimality():
    t0 = time.perf_counter()
    g = ex1().game
    y_star = gm.nash_equilibrium(g)
    resid = np.abs(gm.pseudo_gradient(g, y_star)).max()
    j_star = [gm.cost(g, i, y_star) for i in range(g.n)]
    worst_gain = np.inf
    for i in range(g.n):
        for dv in (0.1, -0.1):
            y = y_star.copy()
            y[i] += dv
            worst_gain = min(worst_gain, gm.cost(g, i, y) - j_star[i])
    elapsed = time.perf_counter() - t0
    oracle_ok = np.allclose(y_star, aggregate_ne(g.xi, g.beta, g.p0, g.a), atol=1e-10) \
        and np.allclose(y_star, EXAMPLE1_NE, atol=1e-8)
    ok = resid <= 1e-8 and worst_gain > 0 and elapsed < 1.0 and oracle_ok
    record(1, ok, f"|phi(y*)|_inf = {resid:.2e}, min deviation cost increase = {worst_gain:.4f}, "
                  f"independent oracle match = {oracle_ok}, {elapsed * 1e3:.0f} ms")


def test_c02_perfect_information_convergence():
    cfg = ex1()
    assert (cfg.mode, cfg.step, cfg.horizon) == (Mode.PERFECT, 1e-3, 30.0)
    traj, elapsed = timed(sim.integrate, cfg)
    ne, rho = traj.ne_dist[-1], traj.rho_norm[-1]
    ok = ne <= 1e-3 and rho <= 1e-6 and elapsed < 10
    record(2, ok, f"ne_dist(30) = {ne:.3e} (<= 1e-3), rho_norm(30) = {rho:.2e} (<= 1e-6), {elapsed:.2f} s")


def test_c03_imperfect_information_convergence():
    cfg = ex1(mode="imperfect")
    assert cfg.delta == 0.1 and cfg.graph == gr.cycle(6)
    traj, elapsed = timed(sim.integrate, cfg)
    ne = traj.ne_dist[-1]
    eta = traj.eta_err[traj.window(5.0)].max()
    ok = ne <= 1e-2 and eta <= 1e-2 and elapsed < 20
    record(3, ok, f"ne_dist(30) = {ne:.3e} (<= 1e-2), max eta_err(t >= 5) = {eta:.3e} (<= 1e-2), "
                  f"{elapsed:.2f} s")


def _residual_p2p(traj, ref, t_from=20.0):
    w = traj.window(t_from)
    d = traj.y[w] - ref.y[w]
    return float((d.max(axis=0) - d.min(axis=0)).max())


def test_c04_disturbance_rejection_invariance():
    finals = {m: sim.integrate(ex1(amplitude=m)).y[-1] for m in (0.0, 1.0, 5.0)}
    spread = max(np.abs(a - b).max() for a in finals.values() for b in finals.values())
    # the loop is linear, so y(m) - y(0) is exactly the disturbance-driven response
    on, on0 = sim.integrate(ex1()), sim.integrate(ex1(amplitude=0.0))
    off = sim.integrate(ex1().replace(observer=False))
    off0 = sim.integrate(ex1(amplitude=0.0).replace(observer=False))
    p_on, p_off = _residual_p2p(on, on0), _residual_p2p(off, off0)
    ratio = p_off / max(p_on, 1e-300)
    ok = spread <= 1e-4 and ratio >= 10
    record(4, ok, f"max pairwise |y_m(30) - y_m'(30)| = {spread:.2e} (<= 1e-4), residual p2p "
                  f"observer on {p_on:.2e} / off {p_off:.2e}, ratio {ratio:.0f} (>= 10)")


def test_c05_two_time_scale_monotonicity():
    errs = []
    for delta in (0.2, 0.1, 0.05):
        traj = sim.integrate(ex1(mode="imperfect").replace(delta=delta))
        errs.append(traj.eta_err[traj.window(5.0)].max())
    ok = errs[0] >= errs[1] >= errs[2]
    record(5, ok, "max eta_err(t >= 5) for delta 0.2/0.1/0.05 = " + ", ".join(f"{e:.3e}" for e in errs))


def test_c06_condition_verifier():
    cfg = ex1()
    reports = [pl.verify_conditions(ag.plant, ag.gains, ag.exo) for ag in cfg.agents]
    base_ok = all(r.passed for r in reports)
    base_fail = sorted({n for r in reports for n in r.failures()})

    ag = cfg.agents[0]
    unstable = pl.verify_conditions(ag.plant, pl.Gains([1, -10], 12, 2, ag.gains.ko), ag.exo)
    zero_ko = pl.verify_conditions(ag.plant, pl.Gains(ag.gains.k, 12, 2, [0, 0]), ag.exo)
    split = gr.Graph.from_edges(6, [(0, 1), (2, 3), (4, 5)])
    mut_ok = (not unstable["feedback_hurwitz"].passed and not unstable["condition3_poles"].passed
              and not zero_ko["condition2_observer_hurwitz"].passed
              and not gr.is_connected(split))
    with pytest.raises(gr.DisconnectedGraphError):
        rules.deriv_imperfect(np.zeros(cfg.network().dim), rules.Network(cfg.agents, cfg.game, split))
    detail = (f"example1 gains pass all conditions: {base_ok}"
              + (f" (failing: {', '.join(base_fail)}; "
                 f"{reports[0]['condition3_positive_real'].detail})" if not base_ok else "")
              + f"; mutations named correctly: {mut_ok}")
    record(6, base_ok and mut_ok, detail)


def test_c07_passivity_integral():
    cfg = ex1().replace(record_every=1)
    net = cfg.network()
    w0 = cfg.initial_state(net)
    z0 = w0[net.sl_nu] - net.ko_bt @ w0[net.sl_x]  # rho(0) = 0
    cfg = cfg.replace(initial={"z": np.split(z0, 6)})
    storages = [pl.storage_matrix(net.augmented(i)) for i in range(6)]
    if any(p is None for p in storages):
        aug = net.augmented(0)
        cb = (aug.cal_c @ aug.cal_b).item()
        record(7, False, f"no storage matrix P with P B = C^T, P A + A^T P <= 0 exists for the "
                         f"example1 agents (C B = {cb:g} and Re G(iw) < 0), inequality not checkable")
    traj = sim.integrate(cfg)
    gaps = [sim.passivity_gap(traj, net, i, p) for i, p in enumerate(storages)]
    record(7, max(gaps) <= 1e-6, f"max_t [V(t) - V(0) - int e~ y~] = {max(gaps):.2e} (<= 1e-6)")


def test_c08_integrator_order():
    base = ex1().replace(horizon=2.0, record_every=1)

    def final(h):
        return sim.integrate(base.replace(step=h)).states[-1]

    ref = final(0.02 / 8)
    e1 = np.abs(final(0.02) - ref).max()
    e2 = np.abs(final(0.01) - ref).max()
    order = np.log2(e1 / e2)
    record(8, order >= 3.8, f"errors {e1:.3e} (h = 0.02), {e2:.3e} (h = 0.01) vs h/8 reference, "
                            f"order {order:.3f} (>= 3.8)")


def test_c09_turbine_demo():
    cfg = scenario.from_dict(scenario.example2())
    assert (cfg.mode, cfg.step, cfg.horizon) == (Mode.IMPERFECT, 1e-4, 20.0)
    traj, elapsed = timed(sim.integrate, cfg)
    ne = traj.ne_dist[-1]
    oracle_ok = np.allclose(traj.y_star, EXAMPLE2_NE, atol=1e-8)
    ok = ne <= 1e-2 and elapsed < 60 and oracle_ok
    record(9, ok, f"ne_dist(20) = {ne:.3e} (<= 1e-2), oracle match = {oracle_ok}, {elapsed:.2f} s")


def test_c10_property_suites():
    rng = np.random.default_rng(2024)
    checks = {}

    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 8))
        g = gm.GameModel.from_arrays(rng.uniform(0.1, 5, n), rng.uniform(-20, 20, n),
                                     rng.uniform(-5, 5, n), rng.uniform(0, 100), rng.uniform(0, 3))
        y = rng.normal(scale=10, size=n)
        for i in range(n):
            yp, ym = y.copy(), y.copy()
            yp[i] += 1e-5
            ym[i] -= 1e-5
            fd = (gm.cost(g, i, yp) - gm.cost(g, i, ym)) / 2e-5
            grad = gm.gradient(g, i, y)
            worst = max(worst, abs(grad - fd) / (1 + abs(grad)))
    checks["gradient-FD"] = (worst <= 1e-6, f"{worst:.1e}")

    lap_ok = True
    for _ in range(200):
        n = int(rng.integers(2, 10))
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        edges = [p for p in pairs if rng.random() < 0.4]
        g = gr.Graph.from_edges(n, edges)
        lap = gr.laplacian(g)
        lam = np.linalg.eigvalsh(lap)
        lap_ok &= bool(not (lap @ np.ones(n)).any() and np.array_equal(lap, lap.T) and lam.min() >= -1e-9
                       and gr.is_connected(g) == (np.count_nonzero(np.abs(lam) <= 1e-9) == 1))
    checks["Laplacian"] = (lap_ok, "")

    game = ex1().game
    mu = gm.monotonicity_certificate(game).mu
    mono_ok = True
    for _ in range(1000):
        y, y2 = rng.normal(scale=20, size=(2, 6))
        dy = y - y2
        mono_ok &= bool(dy @ (gm.pseudo_gradient(game, y) - gm.pseudo_gradient(game, y2))
                        >= mu * (dy @ dy) * (1 - 1e-12))
    checks["monotonicity(1000)"] = (mono_ok, f"mu = {mu:.4f}")

    net = ex1(amplitude=2.0).network()
    err_blocks = [pl.observer_error_matrix(ag.plant, ag.gains, ag.exo) for ag in net.agents]
    worst = 0.0
    for mode in (Mode.PERFECT, Mode.IMPERFECT):
        for _ in range(50):
            w = rng.normal(scale=3, size=net.dim)
            f = rules.deriv(w, net, mode)
            rho_dot = f[net.sl_nu] - f[net.sl_z] - net.ko_bt @ f[net.sl_x]
            rho = rules.observation_error(w, net)
            expect = np.concatenate([m @ r for m, r in zip(err_blocks, np.split(rho, 6))])
            worst = max(worst, np.abs(rho_dot - expect).max() / max(1.0, np.abs(expect).max()))
    checks["rho/z equivalence"] = (worst <= 1e-10, f"{worst:.1e}")

    cfg = ex1(mode="imperfect").replace(initial={"omega": rng.normal(size=6)})
    traj = sim.integrate(cfg)
    tot = traj.states[:, cfg.network().sl_omega].sum(axis=1)
    drift = np.abs(tot - tot[0]).max()
    checks["sum(omega) drift"] = (drift <= 1e-8, f"{drift:.1e}")

    ok = all(v[0] for v in checks.values())
    record(10, ok, "; ".join(f"{k} {'ok' if v[0] else 'FAIL'}{' ' + v[1] if v[1] else ''}"
                             for k, v in checks.items()))
