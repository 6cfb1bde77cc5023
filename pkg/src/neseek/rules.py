"""Strategy-updating vector fields over the whole network.

The network state is one flat vector laid out as

    [x_1 .. x_N | gamma | z_1 .. z_N | nu_1 .. nu_N | eta | omega]

``eta``/``omega`` (aggregate estimate and consensus auxiliary) are carried
in both modes and stay frozen under the perfect-information rule. The
disturbance observer is simulated in its realizable form (internal state
``z``); the observation error ``rho = nu - z - ko B^T x`` is derived.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as sla

from . import game as gm
from . import graph as gr
from . import linalg
from .plant import AgentPlant, Exosystem, Gains, augment, observer_error_matrix


class Mode(str, Enum):
    PERFECT = "perfect"
    IMPERFECT = "imperfect"


@dataclass(frozen=True, eq=False)
class Agent:
    plant: AgentPlant
    gains: Gains
    exo: Exosystem


def _blocks(mats):
    return sla.block_diag(*mats) if mats else np.zeros((0, 0))


class Network:
    """Agents, game and graph compiled into stacked block matrices."""

    def __init__(self, agents, game: gm.GameModel, graph: gr.Graph | None = None,
                 delta: float = 0.1, observer: bool = True):
        self.agents = tuple(agents)
        self.game = game
        self.n_agents = len(self.agents)
        if game.n != self.n_agents:
            raise ValueError(f"game has {game.n} players but there are {self.n_agents} agents")
        self.graph = graph if graph is not None else gr.complete(self.n_agents)
        if self.graph.n != self.n_agents:
            raise ValueError(f"graph has {self.graph.n} nodes, expected {self.n_agents}")
        self.delta = float(delta)
        self.observer = bool(observer)

        plants = [ag.plant for ag in self.agents]
        gains = [ag.gains for ag in self.agents]
        exos = [ag.exo for ag in self.agents]
        for i, ag in enumerate(self.agents):
            if ag.gains.k.shape != (1, ag.plant.n):
                raise linalg.DimensionError(f"agent {i}: K must be 1x{ag.plant.n}")
            if ag.gains.ko.size != ag.exo.q:
                raise linalg.DimensionError(f"agent {i}: ko must have {ag.exo.q} entries")

        self.ns = [p.n for p in plants]
        self.qs = [e.q for e in exos]
        self.h = _blocks([p.a - p.b @ g.k for p, g in zip(plants, gains)])
        self.b = _blocks([p.b for p in plants])
        self.c = _blocks([p.c for p in plants])
        self.kp = np.array([g.kp for g in gains])
        self.ki = np.array([g.ki for g in gains])
        self.s = _blocks([e.s for e in exos])
        self.u = _blocks([e.u for e in exos])
        self.ko_bt = _blocks([np.outer(g.ko, p.b[:, 0]) for p, g in zip(plants, gains)])
        self.ko_btb = _blocks([g.ko.reshape(-1, 1) * float((p.b.T @ p.b).item()) for p, g in zip(plants, gains)])
        self.z_x = _blocks([
            e.s @ np.outer(g.ko, p.b[:, 0]) - np.outer(g.ko, p.b[:, 0]) @ p.a
            + float((p.b.T @ p.b).item()) * np.outer(g.ko, g.k[0])
            for p, g, e in zip(plants, gains, exos)
        ])
        self.lap = gr.laplacian(self.graph)
        self.connected = gr.is_connected(self.graph)

        nx, nq, na = sum(self.ns), sum(self.qs), self.n_agents
        edges = np.cumsum([0, nx, na, nq, nq, na, na])
        self.sl_x, self.sl_gamma, self.sl_z, self.sl_nu, self.sl_eta, self.sl_omega = (
            slice(int(lo), int(hi)) for lo, hi in zip(edges[:-1], edges[1:]))
        self.dim = int(edges[-1])

    def augmented(self, i: int):
        ag = self.agents[i]
        return augment(ag.plant, ag.gains, ag.exo)

    def split_x(self, w) -> list[np.ndarray]:
        x = np.asarray(w)[self.sl_x]
        return np.split(x, np.cumsum(self.ns)[:-1])


class NetworkState:
    """Structured view of a flat state vector."""

    def __init__(self, net: Network, w=None):
        self.net = net
        self.w = np.zeros(net.dim) if w is None else np.asarray(w, dtype=float)
        if self.w.shape != (net.dim,):
            raise linalg.DimensionError(f"state must have {net.dim} entries, got {self.w.shape}")

    def _per_agent(self, sl, sizes):
        return np.split(self.w[sl], np.cumsum(sizes)[:-1])

    @property
    def x(self) -> list[np.ndarray]:
        return self._per_agent(self.net.sl_x, self.net.ns)

    @property
    def z(self) -> list[np.ndarray]:
        return self._per_agent(self.net.sl_z, self.net.qs)

    @property
    def nu(self) -> list[np.ndarray]:
        return self._per_agent(self.net.sl_nu, self.net.qs)

    @property
    def gamma(self) -> np.ndarray:
        return self.w[self.net.sl_gamma]

    @property
    def eta(self) -> np.ndarray:
        return self.w[self.net.sl_eta]

    @property
    def omega(self) -> np.ndarray:
        return self.w[self.net.sl_omega]

    @classmethod
    def from_parts(cls, net: Network, x=None, gamma=None, z=None, nu=None, eta=None, omega=None):
        w = np.zeros(net.dim)
        for sl, part in ((net.sl_x, x), (net.sl_gamma, gamma), (net.sl_z, z),
                         (net.sl_nu, nu), (net.sl_eta, eta), (net.sl_omega, omega)):
            if part is not None:
                flat = np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in part]) \
                    if isinstance(part, (list, tuple)) else np.asarray(part, dtype=float)
                w[sl] = flat
        return cls(net, w)


def initial_state(net: Network) -> np.ndarray:
    """All-zero controller states with each exosystem at its own ``nu0``."""
    w = np.zeros(net.dim)
    w[net.sl_nu] = np.concatenate([ag.exo.nu0 for ag in net.agents])
    return w


def output(w, net: Network) -> np.ndarray:
    return net.c @ np.asarray(w)[net.sl_x]


def observation_error(w, net: Network) -> np.ndarray:
    w = np.asarray(w)
    return w[net.sl_nu] - w[net.sl_z] - net.ko_bt @ w[net.sl_x]


def _plant_observer(w, net: Network, e) -> np.ndarray:
    x, gamma, z, nu = w[net.sl_x], w[net.sl_gamma], w[net.sl_z], w[net.sl_nu]
    v = net.kp * e + net.ki * gamma
    d = net.u @ nu
    dhat = net.u @ (z + net.ko_bt @ x) if net.observer else 0.0
    out = np.zeros_like(w)
    out[net.sl_x] = net.h @ x + net.b @ (v - dhat + d)
    out[net.sl_gamma] = e
    out[net.sl_z] = net.s @ z - net.ko_btb @ v + net.z_x @ x
    out[net.sl_nu] = net.s @ nu
    return out


def deriv_perfect(w, net: Network, t: float = 0.0) -> np.ndarray:
    """Time derivative when every player sees the exact aggregate."""
    w = np.asarray(w, dtype=float)
    y = output(w, net)
    e = -gm.partial_map_vec(net.game, y, np.full(net.n_agents, y.sum()))
    return _plant_observer(w, net, e)


def deriv_imperfect(w, net: Network, t: float = 0.0) -> np.ndarray:
    """Time derivative with each player using its consensus estimate ``eta_i``.

    The estimator runs ``delta*eta' = -eta - L eta - L omega + N y`` and
    ``delta*omega' = L eta``.
    """
    if not net.delta > 0:
        raise ValueError(f"delta must be positive, got {net.delta}")
    if not net.connected:
        raise gr.DisconnectedGraphError("imperfect-information rule needs a connected graph")
    w = np.asarray(w, dtype=float)
    y = output(w, net)
    eta, omega = w[net.sl_eta], w[net.sl_omega]
    e = -gm.partial_map_vec(net.game, y, eta)
    out = _plant_observer(w, net, e)
    lap = net.lap
    out[net.sl_eta] = (-eta - lap @ eta - lap @ omega + net.n_agents * y) / net.delta
    out[net.sl_omega] = (lap @ eta) / net.delta
    return out


def deriv(w, net: Network, mode: Mode | str, t: float = 0.0) -> np.ndarray:
    return deriv_perfect(w, net, t) if Mode(mode) is Mode.PERFECT else deriv_imperfect(w, net, t)


def affine_field(net: Network, mode: Mode | str) -> tuple[np.ndarray, np.ndarray]:
    """``(A, b)`` with ``deriv(w) == A @ w + b`` for every state ``w``.

    The game is quadratic, so both rules are affine in the state; the columns
    are recovered by probing the field on the unit vectors.
    """
    f0 = deriv(np.zeros(net.dim), net, mode)
    cols = np.empty((net.dim, net.dim))
    unit = np.zeros(net.dim)
    for k in range(net.dim):
        unit[k] = 1.0
        cols[:, k] = deriv(unit, net, mode) - f0
        unit[k] = 0.0
    return cols, f0


def equilibrium_state(net: Network, y_star=None, nu=None) -> np.ndarray:
    """State whose plant/integrator part is at rest with outputs ``y_star``.

    ``x*`` and ``gamma*`` solve ``H x + B kI gamma = 0`` with ``C x = y*``;
    ``z`` is chosen so the observation error vanishes; ``eta`` sits at the
    true aggregate and ``omega`` at a minimum-norm solution of
    ``L omega = N y* - sigma* 1``.
    """
    y_star = gm.nash_equilibrium(net.game) if y_star is None else np.asarray(y_star, dtype=float)
    w = initial_state(net)
    if nu is not None:
        w[net.sl_nu] = np.asarray(nu, dtype=float)
    xs, gammas = [], []
    for i, ag in enumerate(net.agents):
        h = ag.plant.a - ag.plant.b @ ag.gains.k
        x_per_gamma = -linalg.solve(h, ag.plant.b[:, 0] * ag.gains.ki)
        dc = float((ag.plant.c @ x_per_gamma).item())
        if abs(dc) < 1e-12:
            raise ValueError(f"agent {i}: zero DC gain, output cannot be held at a set point")
        gamma = y_star[i] / dc
        xs.append(x_per_gamma * gamma)
        gammas.append(gamma)
    w[net.sl_x] = np.concatenate(xs)
    w[net.sl_gamma] = gammas
    w[net.sl_z] = w[net.sl_nu] - net.ko_bt @ w[net.sl_x]
    sigma = y_star.sum()
    w[net.sl_eta] = sigma
    w[net.sl_omega] = np.linalg.lstsq(net.lap, net.n_agents * y_star - sigma, rcond=None)[0]
    return w


def _stacked_augmented(net: Network):
    augs = [net.augmented(i) for i in range(net.n_agents)]
    return (_blocks([a.cal_a for a in augs]), _blocks([a.cal_b for a in augs]),
            _blocks([a.cal_c for a in augs]))


def closed_loop_matrix(net: Network, mode: Mode | str) -> np.ndarray:
    """Disturbance-free closed loop in ``chi`` (and ``eta``, reduced ``omega``).

    The observer error and exosystem are excluded: the former is checked on
    its own, the latter is marginally stable by design. In imperfect mode
    the conserved direction ``sum(omega)`` is projected out.
    """
    cal_a, cal_b, cal_c = _stacked_augmented(net)
    g = net.game
    if Mode(mode) is Mode.PERFECT:
        return cal_a - cal_b @ g.jacobian @ cal_c
    n = net.n_agents
    dg = np.diag(2 * g.xi + g.a)
    r = gr.orthonormal_completion(n)
    lap, dl = net.lap, net.delta
    m = cal_a.shape[0]
    top = np.hstack([cal_a - cal_b @ dg @ cal_c, -g.a * cal_b, np.zeros((m, r.shape[1]))])
    mid = np.hstack([n * cal_c / dl, (-np.eye(n) - lap) / dl, -lap @ r / dl])
    bot = np.hstack([np.zeros((r.shape[1], m)), r.T @ lap / dl, np.zeros((r.shape[1], r.shape[1]))])
    return np.vstack([top, mid, bot])


def closed_loop_certificate(net: Network, mode: Mode | str) -> float:
    """Spectral abscissa of the slow/fast closed loop and of every observer error.

    Negative means the affine network converges from any initial state.
    """
    worst = linalg.spectral_abscissa(closed_loop_matrix(net, mode))
    if net.observer:
        for ag in net.agents:
            if not np.any(ag.exo.u):
                continue  # no disturbance channel, the observer error never reaches the plant
            worst = max(worst, linalg.spectral_abscissa(observer_error_matrix(ag.plant, ag.gains, ag.exo)))
    return worst


def rest_point_outputs(net: Network) -> np.ndarray:
    """Outputs at the rest point of the perfect-information closed loop.

    Solved directly from the stacked augmented dynamics, independently of
    :func:`neseek.game.nash_equilibrium`.
    """
    cal_a, cal_b, cal_c = _stacked_augmented(net)
    g = net.game
    a_cl = cal_a - cal_b @ g.jacobian @ cal_c
    chi = linalg.solve(a_cl, cal_b @ (g.beta - g.p0))
    return cal_c @ chi
