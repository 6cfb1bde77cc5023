"""Agent plants, disturbance exosystems, controller gains and their checks.

Each agent is a SISO system ``x' = A x + B (u + d)``, ``y = C x`` with the
disturbance ``d = U nu`` produced by ``nu' = S nu``. The controller closes a
state feedback ``K``, a PI action on the negative cost gradient and an
internal-model disturbance observer with gain ``ko``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import linalg
from .linalg import HURWITZ_MARGIN, as_matrix

log = logging.getLogger(__name__)

AXIS_TOL = 1e-9
POLE_TOL = 1e-9
PR_TOL = 1e-7
PR_GRID = np.logspace(-3, 4, 1000)
# stands in for the omega -> 0 limit when A has an integrator pole
PR_ZERO_PROXY = 1e-6


@dataclass(frozen=True, eq=False)
class AgentPlant:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.a, "a")
        n = a.shape[0]
        if a.shape != (n, n):
            raise linalg.DimensionError(f"state matrix must be square, got {a.shape}")
        b = as_matrix(self.b, "b").reshape(n, 1) if np.size(self.b) == n else None
        c = as_matrix(self.c, "c").reshape(1, n) if np.size(self.c) == n else None
        if b is None or c is None:
            raise linalg.DimensionError(f"b and c must have {n} entries for a {n}-state plant")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True, eq=False)
class Exosystem:
    s: np.ndarray
    u: np.ndarray
    nu0: np.ndarray

    def __post_init__(self):
        s = as_matrix(self.s, "s")
        q = s.shape[0]
        if s.shape != (q, q):
            raise linalg.DimensionError(f"exosystem matrix must be square, got {s.shape}")
        if np.size(self.u) != q or np.size(self.nu0) != q:
            raise linalg.DimensionError(f"u and nu0 must have {q} entries")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "u", as_matrix(self.u, "u").reshape(1, q))
        object.__setattr__(self, "nu0", np.asarray(self.nu0, dtype=float).reshape(q))

    @property
    def q(self) -> int:
        return self.s.shape[0]

    def disturbance(self, t) -> np.ndarray:
        """Exact ``d(t) = U expm(S t) nu0`` (vectorised over ``t``)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.array([(self.u @ sla.expm(self.s * tk) @ self.nu0)[0] for tk in t])


@dataclass(frozen=True, eq=False)
class Gains:
    k: np.ndarray
    kp: float
    ki: float
    ko: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "k", as_matrix(self.k, "k").reshape(1, -1))
        object.__setattr__(self, "ko", np.asarray(self.ko, dtype=float).reshape(-1))
        object.__setattr__(self, "kp", float(self.kp))
        object.__setattr__(self, "ki", float(self.ki))


@dataclass(frozen=True, eq=False)
class AugmentedAgent:
    """Closed-loop agent in the coordinates ``chi = [x; gamma]``."""

    cal_a: np.ndarray
    cal_b: np.ndarray
    cal_c: np.ndarray
    cal_d: np.ndarray
    h: np.ndarray


def sinusoid_exosystem(freq_hz: float, amplitude: float, phase: float = 0.0) -> Exosystem:
    """Harmonic oscillator producing ``amplitude * sin(2 pi f t + phase)``."""
    if not freq_hz > 0:
        raise ValueError(f"frequency must be positive, got {freq_hz}")
    w = 2 * np.pi * freq_hz
    return Exosystem(
        s=np.array([[0.0, w], [-w, 0.0]]),
        u=np.array([[float(amplitude), 0.0]]),
        nu0=np.array([np.sin(phase), np.cos(phase)]),
    )


def double_integrator() -> AgentPlant:
    return AgentPlant(a=[[0.0, 1.0], [0.0, 0.0]], b=[[0.0], [1.0]], c=[[1.0, 0.0]])


def turbine_generator(t_m, t_e, k_m, k_e, d, h, r, w0=100 * np.pi) -> AgentPlant:
    """Linearised turbine-governor-generator, states (power, valve opening, speed)."""
    a = [
        [-1.0 / t_m, k_m / t_m, 0.0],
        [0.0, -1.0 / t_e, -k_e / (t_e * r * w0)],
        [0.0, 0.0, -d / (2.0 * h)],
    ]
    return AgentPlant(a=a, b=[[0.0], [1.0 / t_e], [0.0]], c=[[1.0, 0.0, 0.0]])


def augment(plant: AgentPlant, gains: Gains, exo: Exosystem | None = None) -> AugmentedAgent:
    """Assemble the PI-augmented realization driven by the gradient signal."""
    n = plant.n
    if gains.k.shape != (1, n):
        raise linalg.DimensionError(f"K must be 1x{n}, got {gains.k.shape}")
    h = plant.a - plant.b @ gains.k
    cal_a = np.block([[h, plant.b * gains.ki], [np.zeros((1, n)), np.zeros((1, 1))]])
    cal_b = np.vstack([plant.b * gains.kp, [[1.0]]])
    cal_c = np.hstack([plant.c, [[0.0]]])
    if exo is None:
        cal_d = np.zeros((n + 1, 0))
    else:
        cal_d = np.vstack([plant.b @ exo.u, np.zeros((1, exo.q))])
    return AugmentedAgent(cal_a, cal_b, cal_c, cal_d, h)


def observer_error_matrix(plant: AgentPlant, gains: Gains, exo: Exosystem) -> np.ndarray:
    """``S - ko B^T B U``, the dynamics of the disturbance observation error."""
    if gains.ko.size != exo.q:
        raise linalg.DimensionError(f"ko must have {exo.q} entries, got {gains.ko.size}")
    btb = float((plant.b.T @ plant.b).item())
    return exo.s - btb * np.outer(gains.ko, exo.u[0])


def transfer(aug: AugmentedAgent, s: complex) -> complex:
    m = aug.cal_a.shape[0]
    return complex((aug.cal_c @ np.linalg.solve(s * np.eye(m) - aug.cal_a, aug.cal_b))[0, 0])


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ConditionReport:
    checks: list[Check] = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def condition(self, k: int) -> bool:
        prefix = f"condition{k}"
        return all(c.passed for c in self.checks if c.name.startswith(prefix))

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def positive_real_sweep(aug: AugmentedAgent, grid=PR_GRID) -> tuple[float, float]:
    """Worst ``Re G(i w)`` over the grid plus the w -> 0 limit, and where it occurs."""
    omegas = np.concatenate([[PR_ZERO_PROXY], np.asarray(grid, dtype=float)])
    re = np.array([transfer(aug, 1j * w).real for w in omegas])
    k = int(np.argmin(re))
    return float(re[k]), float(omegas[k])


def verify_conditions(plant: AgentPlant, gains: Gains, exo: Exosystem,
                    grid=PR_GRID, pr_tol: float = PR_TOL) -> ConditionReport:
    """Check one agent against the sufficient conditions for convergence.

    Beyond the three numbered conditions the report also records the
    standing assumptions on the plant, the exosystem and the feedback gain,
    so a failing scenario shows exactly which hypothesis broke.
    """
    rep = ConditionReport()
    rep.add("plant_controllable", linalg.controllable(plant.a, plant.b))
    rep.add("plant_observable", linalg.observable(plant.a, plant.c))

    lam_s = linalg.eigenvalues(exo.s)
    on_axis = bool(np.all(np.abs(lam_s.real) <= AXIS_TOL))
    gaps = [abs(x - y) for i, x in enumerate(lam_s) for y in lam_s[i + 1:]]
    distinct = bool(not gaps or min(gaps) > AXIS_TOL)
    rep.add("exosystem_imaginary_axis", on_axis and distinct,
            f"eig(S) = {np.array2string(lam_s, precision=4)}")
    rep.add("exosystem_observable", linalg.observable(exo.s, exo.u))

    aug = augment(plant, gains, exo)
    abscissa = linalg.spectral_abscissa(aug.h)
    rep.add("feedback_hurwitz", abscissa < -HURWITZ_MARGIN,
            f"max Re eig(A - BK) = {abscissa:.4g}")

    rep.add("condition1_gains_positive", gains.kp > 0 and gains.ki > 0,
            f"kP = {gains.kp:g}, kI = {gains.ki:g}")
    rep.add("condition1_controllable", linalg.controllable(aug.cal_a, aug.cal_b))
    rep.add("condition1_observable", linalg.observable(aug.cal_a, aug.cal_c))

    err = observer_error_matrix(plant, gains, exo)
    err_abscissa = linalg.spectral_abscissa(err)
    rep.add("condition2_observer_hurwitz", err_abscissa < -HURWITZ_MARGIN,
            f"max Re eig(S - ko B'B U) = {err_abscissa:.4g}")

    pole_abscissa = linalg.spectral_abscissa(aug.cal_a)
    rep.add("condition3_poles", pole_abscissa <= POLE_TOL,
            f"max Re pole = {pole_abscissa:.4g}")
    if pole_abscissa <= POLE_TOL:
        worst, at = positive_real_sweep(aug, grid)
        rep.add("condition3_positive_real", worst >= -pr_tol,
                f"min Re G(iw) = {worst:.4g} at w = {at:.4g} rad/s")
    else:
        rep.add("condition3_positive_real", False, "unstable poles, sweep skipped")
    return rep


def storage_matrix(aug: AugmentedAgent, tol: float = 1e-7):
    """Symmetric ``P`` with ``P B = C^T`` and ``P A + A^T P <= 0``, or ``None``.

    Minimises the largest eigenvalue of ``P A + A^T P`` over the affine set
    ``P B = C^T`` (``P >= 0``), re-projects the minimiser onto the equality
    constraint by least squares and accepts it only if the inequality then
    holds to ``tol`` relative to ``||P||``.
    """
    import cvxpy as cp

    a, b, c = aug.cal_a, aug.cal_b, aug.cal_c
    m = a.shape[0]
    p = cp.Variable((m, m), symmetric=True)
    t = cp.Variable()
    lyap = p @ a + a.T @ p
    prob = cp.Problem(cp.Minimize(t), [
        p @ b == c.T,
        0.5 * (lyap + lyap.T) << t * np.eye(m),
        p >> 0,
    ])
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.SolverError as exc:
        log.info("storage-matrix SDP gave no solution: %s", exc)
        return None
    if p.value is None or prob.status not in ("optimal", "optimal_inaccurate"):
        return None
    pm = _project_equality(0.5 * (p.value + p.value.T), b, c)
    worst = float(np.linalg.eigvalsh(pm @ a + a.T @ pm).max())
    scale = max(1.0, float(np.linalg.norm(pm, 2)))
    if worst > tol * scale:
        log.info("no passivity certificate: max eig(PA + A'P) = %.3e", worst)
        return None
    return pm


def _project_equality(p: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Minimal correction of ``p`` (in upper-triangle coordinates) so that ``P b = c^T``."""
    m = p.shape[0]
    iu = np.triu_indices(m)
    # vec of the upper triangle -> rows of P b
    rows = np.zeros((m, iu[0].size))
    for k, (i, j) in enumerate(zip(*iu)):
        rows[i, k] += b[j, 0]
        if i != j:
            rows[j, k] += b[i, 0]
    v = p[iu]
    resid = c.reshape(m) - rows @ v
    v = v + np.linalg.lstsq(rows, resid, rcond=None)[0]
    out = np.zeros((m, m))
    out[iu] = v
    return out + np.triu(out, 1).T
