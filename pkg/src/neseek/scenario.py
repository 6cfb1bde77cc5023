"""Scenario documents (JSON) and the two bundled demo scenarios.

A document has the sections ``agents``, ``game``, ``graph``, ``rule``,
``integrator`` and ``assumptions``. Graph node labels are 1-based in the
document and 0-based once loaded.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import game as gm
from . import graph as gr
from . import linalg
from .plant import AgentPlant, Exosystem, Gains, double_integrator, sinusoid_exosystem, turbine_generator
from .rules import Agent, Mode
from .sim import ScenarioConfig

TURBINE_KEYS = ("T_m", "T_e", "K_m", "K_e", "D", "H", "R")
DEFAULT_W0 = 100 * math.pi


class ConfigError(ValueError):
    """Malformed scenario document; ``where`` names the offending field."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


# --- parsing helpers -------------------------------------------------------

def _get(d, key, where, default=...):
    if not isinstance(d, dict):
        raise ConfigError(where, "expected an object")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{where}.{key}", "missing required field")
        return default
    return d[key]


def _num(v, where) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(where, f"expected a number, got {type(v).__name__}")
    if not math.isfinite(v):
        raise ConfigError(where, "number must be finite")
    return float(v)


def _vec(v, where) -> np.ndarray:
    if not isinstance(v, list):
        raise ConfigError(where, "expected an array of numbers")
    return np.array([_num(x, f"{where}[{i}]") for i, x in enumerate(v)])


def _mat(v, where) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ConfigError(where, "expected a non-empty array of rows")
    rows = [_vec(r, f"{where}[{i}]") for i, r in enumerate(v)]
    if len({r.size for r in rows}) != 1:
        raise ConfigError(where, "rows have different lengths")
    return np.vstack(rows)


def _plant(d, where) -> tuple[AgentPlant, dict]:
    preset = _get(d, "preset", where, None)
    if preset is None:
        try:
            return AgentPlant(_mat(_get(d, "a", where), f"{where}.a"),
                              _mat(_get(d, "b", where), f"{where}.b"),
                              _mat(_get(d, "c", where), f"{where}.c")), {}
        except linalg.DimensionError as exc:
            raise ConfigError(where, str(exc)) from exc
    if preset == "double_integrator":
        return double_integrator(), {"preset": preset}
    if preset == "turbine_generator":
        params = {k: _num(_get(d, k, where), f"{where}.{k}") for k in TURBINE_KEYS}
        params["w0"] = _num(_get(d, "w0", where, DEFAULT_W0), f"{where}.w0")
        return turbine_generator(*(params[k] for k in TURBINE_KEYS), w0=params["w0"]), \
            {"preset": preset, **params}
    raise ConfigError(f"{where}.preset", f"unknown preset {preset!r}")


def _exo(d, where) -> Exosystem:
    if "freq_hz" in d:
        try:
            return sinusoid_exosystem(_num(d["freq_hz"], f"{where}.freq_hz"),
                                      _num(_get(d, "amplitude", where), f"{where}.amplitude"),
                                      _num(_get(d, "phase", where, 0.0), f"{where}.phase"))
        except ValueError as exc:
            raise ConfigError(where, str(exc)) from exc
    try:
        return Exosystem(_mat(_get(d, "s", where), f"{where}.s"),
                         _vec(_get(d, "u", where), f"{where}.u"),
                         _vec(_get(d, "nu0", where), f"{where}.nu0"))
    except linalg.DimensionError as exc:
        raise ConfigError(where, str(exc)) from exc


def _gains(d, where) -> Gains:
    return Gains(_vec(_get(d, "k", where), f"{where}.k"),
                 _num(_get(d, "kp", where), f"{where}.kp"),
                 _num(_get(d, "ki", where), f"{where}.ki"),
                 _vec(_get(d, "ko", where), f"{where}.ko"))


def _game(d, where, n) -> gm.GameModel:
    form = _get(d, "form", where, "canonical")
    try:
        if form == "price":
            a = _vec(_get(d, "a", where), f"{where}.a")
            b = _vec(_get(d, "b", where), f"{where}.b")
            if a.size != n or b.size != n:
                raise ConfigError(where, f"a and b need {n} entries")
            return gm.price_form(a, b, _num(_get(d, "c0", where), f"{where}.c0"),
                                 _num(_get(d, "C", where), f"{where}.C"))
        if form != "canonical":
            raise ConfigError(f"{where}.form", f"unknown game form {form!r}")
        players = _get(d, "players", where)
        if not isinstance(players, list) or len(players) != n:
            raise ConfigError(f"{where}.players", f"expected {n} players")
        p0 = _num(_get(d, "p0", where), f"{where}.p0")
        a = _num(_get(d, "a", where), f"{where}.a")
        costs = []
        for i, p in enumerate(players):
            w = f"{where}.players[{i}]"
            costs.append(gm.AggregativeCost(_num(_get(p, "xi", w), f"{w}.xi"),
                                            _num(_get(p, "beta", w), f"{w}.beta"),
                                            _num(_get(p, "alpha", w, 0.0), f"{w}.alpha"), p0, a))
        return gm.GameModel(tuple(costs))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(where, str(exc)) from exc


def _graph(d, where, n) -> gr.Graph:
    nodes = int(_num(_get(d, "nodes", where, n), f"{where}.nodes"))
    if nodes != n:
        raise ConfigError(f"{where}.nodes", f"graph has {nodes} nodes but there are {n} agents")
    edges = _get(d, "edges", where)
    if not isinstance(edges, list):
        raise ConfigError(f"{where}.edges", "expected an array of [i, j] pairs")
    pairs = []
    for k, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) for v in e)):
            raise ConfigError(f"{where}.edges[{k}]", "expected a pair of node labels")
        pairs.append((e[0] - 1, e[1] - 1))
    try:
        return gr.Graph.from_edges(n, pairs)
    except ValueError as exc:
        raise ConfigError(f"{where}.edges", f"{exc} (labels are 1-based)") from exc


def from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("$", "scenario must be an object")
    raw_agents = _get(doc, "agents", "$")
    if not isinstance(raw_agents, list) or not raw_agents:
        raise ConfigError("$.agents", "expected a non-empty array")
    agents, initial = [], {}
    for i, ad in enumerate(raw_agents):
        w = f"$.agents[{i}]"
        plant, _ = _plant(_get(ad, "plant", w), f"{w}.plant")
        gains = _gains(_get(ad, "gains", w), f"{w}.gains")
        exo = _exo(_get(ad, "disturbance", w), f"{w}.disturbance")
        if gains.k.size != plant.n:
            raise ConfigError(f"{w}.gains.k", f"expected {plant.n} entries")
        if gains.ko.size != exo.q:
            raise ConfigError(f"{w}.gains.ko", f"expected {exo.q} entries")
        agents.append(Agent(plant, gains, exo))
        init = _get(ad, "initial", w, {})
        for key in init:
            if key not in ("x", "gamma", "z", "eta", "omega"):
                raise ConfigError(f"{w}.initial.{key}", "unknown initial-state field")
        initial.setdefault("_per_agent", []).append(init)
    n = len(agents)
    initial = _collect_initial(initial.pop("_per_agent"), agents)

    game = _game(_get(doc, "game", "$"), "$.game", n)
    graph = _graph(_get(doc, "graph", "$"), "$.graph", n)
    rule = _get(doc, "rule", "$", {})
    integ = _get(doc, "integrator", "$", {})
    mode = _get(rule, "mode", "$.rule", "perfect")
    if mode not in ("perfect", "imperfect"):
        raise ConfigError("$.rule.mode", f"expected 'perfect' or 'imperfect', got {mode!r}")
    observer = _get(rule, "observer", "$.rule", True)
    if not isinstance(observer, bool):
        raise ConfigError("$.rule.observer", "expected true or false")
    record_every = _get(integ, "record_every", "$.integrator", 10)
    if isinstance(record_every, bool) or not isinstance(record_every, int) or record_every < 1:
        raise ConfigError("$.integrator.record_every", "expected a positive integer")
    assumptions = _get(doc, "assumptions", "$", {})
    if not isinstance(assumptions, dict):
        raise ConfigError("$.assumptions", "expected an object")
    return ScenarioConfig(
        agents=agents, game=game, graph=graph, mode=Mode(mode),
        delta=_num(_get(rule, "delta", "$.rule", 0.1), "$.rule.delta"),
        horizon=_num(_get(integ, "horizon", "$.integrator", 30.0), "$.integrator.horizon"),
        step=_num(_get(integ, "step", "$.integrator", 1e-3), "$.integrator.step"),
        record_every=record_every, observer=observer, initial=initial,
        name=str(_get(doc, "name", "$", "scenario")), assumptions=assumptions,
    )


def _collect_initial(per_agent: list[dict], agents: list[Agent]) -> dict:
    out: dict = {}
    for key, size_of in (("x", lambda ag: ag.plant.n), ("z", lambda ag: ag.exo.q)):
        if any(key in d for d in per_agent):
            vals = []
            for i, (d, ag) in enumerate(zip(per_agent, agents)):
                v = _vec(d[key], f"$.agents[{i}].initial.{key}") if key in d else np.zeros(size_of(ag))
                if v.size != size_of(ag):
                    raise ConfigError(f"$.agents[{i}].initial.{key}", f"expected {size_of(ag)} entries")
                vals.append(v)
            out[key] = vals
    for key in ("gamma", "eta", "omega"):
        if any(key in d for d in per_agent):
            out[key] = np.array([_num(d.get(key, 0.0), f"$.agents[{i}].initial.{key}")
                                 for i, d in enumerate(per_agent)])
    return out


def loads(text: str) -> ScenarioConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}", exc.msg) from exc
    return from_dict(doc)


def load(path) -> ScenarioConfig:
    return loads(Path(path).read_text())


# --- serialisation ---------------------------------------------------------

def _lst(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def to_dict(cfg: ScenarioConfig) -> dict:
    """Explicit-matrix document that loads back to an identical scenario."""
    agents = []
    for i, ag in enumerate(cfg.agents):
        d = {
            "plant": {"a": _lst(ag.plant.a), "b": _lst(ag.plant.b), "c": _lst(ag.plant.c)},
            "gains": {"k": _lst(ag.gains.k[0]), "kp": ag.gains.kp, "ki": ag.gains.ki,
                      "ko": _lst(ag.gains.ko)},
            "disturbance": {"s": _lst(ag.exo.s), "u": _lst(ag.exo.u[0]), "nu0": _lst(ag.exo.nu0)},
        }
        init = {}
        for key in ("x", "z"):
            if key in cfg.initial:
                init[key] = _lst(cfg.initial[key][i])
        for key in ("gamma", "eta", "omega"):
            if key in cfg.initial:
                init[key] = float(cfg.initial[key][i])
        if init:
            d["initial"] = init
        agents.append(d)
    g = cfg.game
    return {
        "name": cfg.name,
        "agents": agents,
        "game": {"form": "canonical", "p0": g.p0, "a": g.a,
                 "players": [{"xi": c.xi, "beta": c.beta, "alpha": c.alpha} for c in g.costs]},
        "graph": {"nodes": cfg.graph.n, "edges": [[i + 1, j + 1] for i, j in cfg.graph.sorted_edges()]},
        "rule": {"mode": cfg.mode.value, "delta": cfg.delta, "observer": cfg.observer},
        "integrator": {"step": cfg.step, "horizon": cfg.horizon, "record_every": cfg.record_every},
        "assumptions": cfg.assumptions,
    }


def dumps(doc_or_cfg) -> str:
    doc = to_dict(doc_or_cfg) if isinstance(doc_or_cfg, ScenarioConfig) else doc_or_cfg
    return json.dumps(doc, indent=2)


# --- bundled demos ---------------------------------------------------------

def _cycle_edges(n: int) -> list[list[int]]:
    return [[i + 1, (i + 1) % n + 1] for i in range(n)]


EXAMPLE1_A = [1.0, 0.5, 0.8, 0.7, 1.1, 0.6]
EXAMPLE1_B = [6, 10, 7, 8, 6, 12]

# one row per generator: T_m, T_e, K_m, K_e, D, H, R, alpha, beta, xi, P(0), X_e(0), w(0)
TURBINE_TABLE = [
    [0.35, 0.10, 1.0, 1.0, 5.0, 4.0, 0.05, 5, 12, 1.0, 30, 6, 4.3],
    [0.30, 0.12, 1.1, 1.1, 4.0, 3.5, 0.04, 8, 10, 0.5, 25, 5, 3.5],
    [0.28, 0.08, 0.9, 0.9, 3.0, 2.8, 0.03, 6, 11, 0.8, 20, 4, 3.0],
    [0.40, 0.11, 1.2, 1.2, 4.5, 4.2, 0.06, 9, 11, 0.7, 35, 7, 4.8],
    [0.43, 0.90, 0.8, 0.8, 3.5, 3.0, 0.04, 7, 13, 1.1, 28, 5, 4.0],
    [0.35, 0.10, 1.0, 1.0, 5.0, 4.0, 0.05, 8, 14, 0.6, 37, 8, 5.0],
]
TURBINE_POLES = [-2.0, -3.0]


def example1(mode: str = "perfect", amplitude: float = 1.0, freq_hz: float = 1.0) -> dict:
    """Six double integrators playing a Cournot-style game."""
    n = len(EXAMPLE1_A)
    agent = {
        "plant": {"preset": "double_integrator"},
        "gains": {"k": [1, 10], "kp": 12, "ki": 2, "ko": [12, 15]},
        "disturbance": {"freq_hz": freq_hz, "amplitude": amplitude, "phase": 0.0},
    }
    return {
        "name": "example1",
        "agents": [json.loads(json.dumps(agent)) for _ in range(n)],
        "game": {"form": "price", "a": EXAMPLE1_A, "b": EXAMPLE1_B, "c0": 50, "C": 0.5},
        "graph": {"nodes": n, "edges": _cycle_edges(n)},
        "rule": {"mode": mode, "delta": 0.1, "observer": True},
        "integrator": {"step": 1e-3, "horizon": 30.0, "record_every": 10},
        "assumptions": {
            "graph": "6-node cycle; any connected undirected graph satisfies the requirements",
            "observer_gain": "the printed 6-entry gain list is read as ko_i = [12, 15] for every agent",
            "disturbance": f"d_i(t) = {amplitude:g} sin(2 pi {freq_hz:g} t) on every agent",
            "initial_state": "x_i(0) = 0, gamma_i(0) = 0, z_i(0) = 0, eta_i(0) = omega_i(0) = 0",
        },
    }


def turbine_gain(row, w0: float = DEFAULT_W0, poles=TURBINE_POLES) -> list[float]:
    plant = turbine_generator(*row[:7], w0=w0)
    k = linalg.place_poles_controllable(plant.a, plant.b, poles)
    return [float(v) for v in np.round(k[0], 12)]


def example2(mode: str = "imperfect", amplitude: float = 1.0, p0: float = 50.0,
             slope: float = 0.5, w0: float = DEFAULT_W0) -> dict:
    """Six turbine-generator units competing in an electricity market."""
    agents = []
    for i, row in enumerate(TURBINE_TABLE):
        ko = 8 if i == 5 else 4
        agents.append({
            "plant": {"preset": "turbine_generator", **dict(zip(TURBINE_KEYS, row[:7])), "w0": w0},
            "gains": {"k": turbine_gain(row, w0), "kp": 1, "ki": 1, "ko": [ko, ko]},
            "disturbance": {"freq_hz": 500.0, "amplitude": amplitude, "phase": 0.0},
            "initial": {"x": list(row[10:13])},
        })
    n = len(agents)
    return {
        "name": "example2",
        "agents": agents,
        "game": {"form": "canonical", "p0": p0, "a": slope,
                 "players": [{"alpha": r[7], "beta": r[8], "xi": r[9]} for r in TURBINE_TABLE]},
        "graph": {"nodes": n, "edges": _cycle_edges(n)},
        "rule": {"mode": mode, "delta": 0.1, "observer": True},
        "integrator": {"step": 1e-4, "horizon": 20.0, "record_every": 100},
        "assumptions": {
            "graph": "6-node cycle; any connected undirected graph satisfies the requirements",
            "price": f"p0 = {p0:g}, a = {slope:g} (price parameters not given with the unit data)",
            "synchronous_speed": f"w0 = {w0:.10g} rad/s (50 Hz grid)",
            "feedback_gain": (
                "K_i synthesised per unit by pole placement of the controllable (power, valve) "
                f"pair at {TURBINE_POLES}; the speed state is not reachable from u and keeps "
                "its open-loop pole -D_i/(2 H_i)"),
            "observer_gain": "ko_i = [4, 4] for units 1-5 and [8, 8] for unit 6",
            "disturbance": f"d_i(t) = {amplitude:g} sin(2 pi 500 t) on every unit",
            "initial_state": "x_i(0) from the unit data; gamma, z, eta, omega start at 0",
        },
    }


DEMOS = {"example1": example1, "example2": example2}
