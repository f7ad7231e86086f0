"""Sample-based checks of the rigidity bounds every isotropic log-concave law obeys.

For one body: whiten, draw a batch, and test along a few directions the
density bounds ``1/10 <= g(0) <= sup g <= 1``, the tail envelope
``2 e^{-t/10}`` for two seminorms, the mass bound ``P(<X, θ> < 0) <= 1 - 1/e``
and the shape of ``t ↦ M̂(θ, t)``.
"""
from __future__ import annotations

import math

import numpy as np

from ..logconcave1d import borell_tail_check, grunbaum_check, hensley_check
from ..marginals import MarginalCurve, curve_properties
from ..metrics import T_GRID
from ..model import RandomSeed, density_from_dict
from ..samplers import sample_directions
from .runners import DIRECTIONS, GATE_ROWS, standardize

BODY_ZOO = {
    "cube": {"type": "cube"},
    "ball": {"type": "ball"},
    "standardized_simplex": {"type": "simplex", "standardize": True},
    "ellipsoid": {"type": "ellipsoid", "axes": [1.0, 2.0, 3.0, 0.5]},
    "product": {"type": "product", "parts": [{"type": "cube"}, {"type": "ball"}]},
}


def rigidity_suite(spec: dict, n: int, m: int, seed, direction_count: int = 10,
                   workers: int | None = None) -> dict:
    """Run every check on ``direction_count`` random directions plus e₁.

    Returns ``{"passed": bool, "checks": {name: bool}, "values": {...}}``.
    """
    seed = RandomSeed.coerce(seed)
    density = density_from_dict(spec, n)
    prep = standardize(density, n, min(m, GATE_ROWS), seed, "auto", workers)
    x = prep.sample(m, workers)
    dirs = np.vstack([np.eye(n)[:1], sample_directions(n, direction_count, seed.substream(DIRECTIONS))])
    checks = {}
    values = {"g0": [], "sup_g": [], "grunbaum": [], "gate": prep.gate}
    for i, theta in enumerate(dirs):
        p = x @ theta
        h = hensley_check(p)
        g, g_ok = grunbaum_check(p)
        values["g0"].append(h.g0)
        values["sup_g"].append(h.sup_g)
        values["grunbaum"].append(g)
        checks[f"hensley_{i}"] = h.passed
        checks[f"grunbaum_{i}"] = g_ok
        checks[f"borell_projection_{i}"] = borell_tail_check(np.abs(p)).passed
        sorted_p = np.sort(p)
        curve = MarginalCurve(theta, T_GRID, np.searchsorted(sorted_p, T_GRID, side="right") / m, m)
        for name, ok in curve_properties(curve).items():
            checks[f"mf_{name}_{i}"] = ok
    checks["borell_norm"] = borell_tail_check(np.linalg.norm(x, axis=1)).passed
    values["min_g0"] = float(min(values["g0"]))
    values["max_sup_g"] = float(max(values["sup_g"]))
    values["max_grunbaum"] = float(max(values["grunbaum"]))
    values["noise"] = 1.0 / math.sqrt(m)
    return {"passed": all(checks.values()), "checks": checks, "values": values}
