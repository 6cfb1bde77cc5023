"""Fixed-step integration of the network and the metrics recorded along the way."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import expm

from . import game as gm
from . import graph as gr
from . import rules
from .linalg import HURWITZ_MARGIN
from .plant import ConditionReport, verify_conditions
from .rules import Agent, Mode, Network

log = logging.getLogger(__name__)

# RK4 loses stability on the imaginary axis at h*|lambda| = 2*sqrt(2)
RK4_AXIS_LIMIT = 2.0 * np.sqrt(2.0)


class PreconditionError(ValueError):
    """Scenario violates an integration precondition."""


class DivergenceError(ArithmeticError):
    def __init__(self, t: float):
        super().__init__(f"state became non-finite at t = {t:.6g} s")
        self.t = t


@dataclass(eq=False)
class ScenarioConfig:
    agents: list[Agent]
    game: gm.GameModel
    graph: gr.Graph
    mode: Mode = Mode.PERFECT
    delta: float = 0.1
    horizon: float = 30.0
    step: float = 1e-3
    record_every: int = 10
    observer: bool = True
    initial: dict = field(default_factory=dict)
    name: str = "scenario"
    assumptions: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.agents = list(self.agents)

    def check(self) -> None:
        """Raise :class:`PreconditionError` if the scenario cannot be integrated."""
        n = len(self.agents)
        if self.game.n != n or self.graph.n != n:
            raise PreconditionError(
                f"{n} agents but game has {self.game.n} players and graph {self.graph.n} nodes")
        if not self.step > 0:
            raise PreconditionError(f"step must be positive, got {self.step}")
        if self.horizon < self.step:
            raise PreconditionError(f"horizon {self.horizon} shorter than step {self.step}")
        if self.record_every < 1:
            raise PreconditionError("record_every must be at least 1")
        if self.mode is Mode.IMPERFECT:
            if not self.delta > 0:
                raise PreconditionError(f"delta must be positive, got {self.delta}")
            if self.step > self.delta / 20:
                raise PreconditionError(
                    f"step {self.step:g} exceeds delta/20 = {self.delta / 20:g}")
            if not gr.is_connected(self.graph):
                raise PreconditionError("imperfect-information rule needs a connected graph")
        coarse = []
        for i, ag in enumerate(self.agents):
            w_max = float(np.abs(np.linalg.eigvals(ag.exo.s)).max(initial=0.0))
            if w_max * self.step >= RK4_AXIS_LIMIT:
                raise PreconditionError(
                    f"agent {i}: step {self.step:g} cannot resolve exosystem frequency "
                    f"{w_max / (2 * np.pi):g} Hz")
            if w_max > 0 and self.step > 2 * np.pi / (50 * w_max):
                coarse.append((i, 2 * np.pi / (50 * w_max)))
        if coarse:
            log.warning("step %.3g is coarser than 1/(50 f) = %.3g for agents %s; the "
                        "observer is resolved coarsely and keeps a small residual error", self.step,
                        min(lim for _, lim in coarse), [i for i, _ in coarse])

    def network(self) -> Network:
        return Network(self.agents, self.game, self.graph, delta=self.delta, observer=self.observer)

    def replace(self, **changes) -> "ScenarioConfig":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return ScenarioConfig(**kw)

    def initial_state(self, net: Network | None = None) -> np.ndarray:
        """Default initial state with per-agent overrides applied.

        ``initial`` may hold lists ``x`` (one vector per agent), ``gamma``,
        ``z`` (one vector per agent), ``eta`` and ``omega``.
        """
        net = net or self.network()
        w = rules.initial_state(net)
        ov = self.initial
        if "x" in ov:
            w[net.sl_x] = np.concatenate([np.asarray(v, dtype=float).reshape(-1) for v in ov["x"]])
        if "z" in ov:
            w[net.sl_z] = np.concatenate([np.asarray(v, dtype=float).reshape(-1) for v in ov["z"]])
        for key, sl in (("gamma", net.sl_gamma), ("eta", net.sl_eta), ("omega", net.sl_omega)):
            if key in ov:
                w[sl] = np.asarray(ov[key], dtype=float)
        return w


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    rho_norm: np.ndarray
    eta_err: np.ndarray
    ne_dist: np.ndarray
    grad_norm: np.ndarray
    mode: Mode
    y_star: np.ndarray

    def __len__(self) -> int:
        return self.times.size

    def window(self, t_from: float) -> np.ndarray:
        return self.times >= t_from - 1e-12

    def to_csv(self, path) -> Path:
        path = Path(path)
        n = self.y.shape[1]
        header = ["time"] + [f"y_{i + 1}" for i in range(n)]
        if self.mode is Mode.IMPERFECT:
            header += [f"eta_{i + 1}" for i in range(n)]
        header += ["rho_norm", "eta_err", "ne_dist", "grad_norm"]
        cols = [self.times[:, None], self.y]
        if self.mode is Mode.IMPERFECT:
            cols.append(self.eta)
        cols += [m[:, None] for m in (self.rho_norm, self.eta_err, self.ne_dist, self.grad_norm)]
        table = np.hstack(cols)
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for row in table:
                wr.writerow([format(v, ".9g") for v in row])
        return path


def rk4_step(f: Callable, t: float, w: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, w)
    k2 = f(t + 0.5 * h, w + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, w + 0.5 * h * k2)
    k4 = f(t + h, w + h * k3)
    return w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class ExactExoStepper:
    """RK4 step in which the exosystem block follows its exact flow.

    ``nu' = S nu`` is autonomous, so ``nu`` is advanced by ``expm(S h/2)``
    twice per step and every RK4 stage sees the exact ``nu`` at its stage
    time. All other states (plant, integrator, observer, estimator) are
    integrated by classical RK4. The generated disturbance therefore has no
    phase or amplitude error at any frequency the step can resolve.
    """

    def __init__(self, f: Callable, sl_nu: slice, s: np.ndarray, h: float):
        self.f, self.sl, self.h = f, sl_nu, h
        self.half = expm(np.asarray(s, dtype=float) * (0.5 * h))

    def _f(self, t, w, nu):
        w = w.copy()
        w[self.sl] = nu
        return self.f(t, w)

    def __call__(self, k: int, w: np.ndarray) -> np.ndarray:
        h, t = self.h, k * self.h
        nu0 = w[self.sl]
        nu_mid = self.half @ nu0
        nu1 = self.half @ nu_mid
        k1 = self._f(t, w, nu0)
        k2 = self._f(t + 0.5 * h, w + 0.5 * h * k1, nu_mid)
        k3 = self._f(t + 0.5 * h, w + 0.5 * h * k2, nu_mid)
        k4 = self._f(t + h, w + h * k3, nu1)
        out = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[self.sl] = nu1
        return out


def admissibility(cfg: ScenarioConfig, net: Network | None = None):
    """Per-agent condition reports and the closed-loop spectral abscissa."""
    net = net or cfg.network()
    reports = [verify_conditions(ag.plant, ag.gains, ag.exo) for ag in cfg.agents]
    return reports, rules.closed_loop_certificate(net, cfg.mode)


def _require_admissible(cfg: ScenarioConfig, net: Network) -> list[ConditionReport]:
    reports, abscissa = admissibility(cfg, net)
    if all(r.passed for r in reports):
        return reports
    if abscissa < -HURWITZ_MARGIN:
        failed = sorted({name for r in reports for name in r.failures()})
        log.info("sufficient conditions not met (%s) but the closed loop is Hurwitz "
                 "(abscissa %.3g); integrating", ", ".join(failed), abscissa)
        return reports
    raise PreconditionError(
        "scenario fails the convergence conditions and its closed loop is not Hurwitz "
        f"(abscissa {abscissa:.3g}); pass force=True to integrate anyway")


def integrate(cfg: ScenarioConfig, force: bool = False, affine: bool = True) -> Trajectory:
    """Classical fixed-step RK4 over ``[0, horizon]``.

    The exosystem states are advanced exactly (see :class:`ExactExoStepper`);
    everything else uses the plain RK4 update.

    Args:
        cfg: scenario to run.
        force: skip the convergence-condition gate.
        affine: integrate the assembled affine field ``A w + b`` (same
            values as the structured field, evaluated faster).

    Raises:
        PreconditionError: invalid step sizes, graph, or (unless ``force``)
            a scenario with neither the sufficient conditions nor a Hurwitz
            closed loop.
        DivergenceError: the state stopped being finite.
    """
    cfg.check()
    net = cfg.network()
    if not force:
        _require_admissible(cfg, net)
    y_star = gm.nash_equilibrium(cfg.game)

    if affine:
        amat, bvec = rules.affine_field(net, cfg.mode)

        def f(t, w):
            return amat @ w + bvec
    else:
        def f(t, w):
            return rules.deriv(w, net, cfg.mode, t)

    h = cfg.step
    n_steps = int(round(cfg.horizon / h))
    rec_idx = list(range(0, n_steps + 1, cfg.record_every))
    if rec_idx[-1] != n_steps:
        rec_idx.append(n_steps)
    states = np.empty((len(rec_idx), net.dim))
    w = cfg.initial_state(net)
    states[0] = w
    stepper = ExactExoStepper(f, net.sl_nu, net.s, h)
    slot = 1
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is detected below
        for k in range(1, n_steps + 1):
            w = stepper(k - 1, w)
            if not np.isfinite(w).all():
                raise DivergenceError(k * h)
            if slot < len(rec_idx) and rec_idx[slot] == k:
                states[slot] = w
                slot += 1
    times = np.array(rec_idx, dtype=float) * h
    return _metrics(times, states, net, cfg.mode, y_star)


def _metrics(times, states, net: Network, mode: Mode, y_star) -> Trajectory:
    y = states[:, net.sl_x] @ net.c.T
    eta = states[:, net.sl_eta]
    rho = states[:, net.sl_nu] - states[:, net.sl_z] - states[:, net.sl_x] @ net.ko_bt.T
    sigma = y.sum(axis=1, keepdims=True)
    if mode is Mode.IMPERFECT:
        eta_err = np.abs(eta - sigma).max(axis=1)
    else:
        eta_err = np.zeros(times.size)
    g = net.game
    grad = (2 * g.xi + g.a) * y + g.beta - g.p0 + g.a * sigma
    return Trajectory(
        times=times,
        states=states,
        y=y,
        eta=eta,
        rho_norm=np.linalg.norm(rho, axis=1),
        eta_err=eta_err,
        ne_dist=np.abs(y - y_star).max(axis=1),
        grad_norm=np.abs(grad).max(axis=1),
        mode=mode,
        y_star=np.asarray(y_star),
    )


def settling_time(traj: Trajectory, tol: float):
    """First recorded time after which ``ne_dist`` stays within ``tol``; ``None`` if never."""
    above = np.flatnonzero(traj.ne_dist > tol)
    if above.size == 0:
        return float(traj.times[0])
    last = above[-1]
    if last == traj.times.size - 1:
        return None
    return float(traj.times[last + 1])


def passivity_gap(traj: Trajectory, net: Network, i: int, p: np.ndarray) -> float:
    """Worst violation of the storage inequality for agent ``i`` along ``traj``.

    With storage ``V = chi~' P chi~ / 2`` about the rest point and supply
    ``e~ y~`` (``e`` is the gradient signal, zero at the equilibrium), returns
    ``max_t [V(t) - V(0) - int_0^t e~ y~ ds]``. Non-positive means the
    inequality holds. The supply integral uses cumulative Simpson on the
    recorded samples, so record every step for tight tolerances.
    """
    from scipy.integrate import cumulative_simpson

    if traj.mode is not Mode.PERFECT:
        raise ValueError("passivity gap is defined for the perfect-information rule")
    w_star = rules.equilibrium_state(net, traj.y_star)
    x0 = net.sl_x.start + sum(net.ns[:i])
    cols = list(range(x0, x0 + net.ns[i])) + [net.sl_gamma.start + i]
    chi, chi_star = traj.states[:, cols], w_star[cols]
    dev = chi - chi_star
    g = net.game
    sigma = traj.y.sum(axis=1)
    e = -((2 * g.xi[i] + g.a) * traj.y[:, i] + g.beta[i] - g.p0 + g.a * sigma)
    supply = e * (traj.y[:, i] - traj.y_star[i])
    storage = 0.5 * np.einsum("ti,ij,tj->t", dev, p, dev)
    work = cumulative_simpson(supply, x=traj.times, initial=0.0)
    return float(np.max(storage - storage[0] - work))

