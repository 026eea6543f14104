"""Experiment config files: JSON with complex entries as ``[re, im]`` pairs.

Exact scalars (state weights, tolerances, schedule ratio) may be given as
integer rationals ``[num, den]``.  Block indices are 0-based.  Every parse
error carries the path of the offending field, e.g. ``theta_unitaries[1][0]``.

Layout::

    {
      "name": "alternating",
      "seed": 0,
      "group": {"kind": "zd", "dim": 1, "generators": [[1]]},
      "algebra": {"blocks": [2]},
      "kernel_blocks": [],
      "theta_unitaries": [[<matrix per block>] per generator],
      "xi_unitaries": null,                  # defaults to theta on surviving blocks
      "rho": {"weights": [[1, 1]], "densities": [<matrix per surviving block>]},
      "element": [<matrix per block>],
      "schedule": {"kind": "list", "ks": [1, 2, 3]}
                | {"kind": "geometric", "kmax": 100, "ratio": [3, 2]},
      "tolerances": {"theorem": 0.001}
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from folnerlab.cstar import CStarModel
from folnerlab.dynamics import Action, WStarSystem
from folnerlab.groups import (
    FiniteGroup,
    GroupError,
    GroupModel,
    HeisenbergGroup,
    ZdGroup,
    folner_family,
    symmetric_group,
)
from folnerlab.matrix import BlockElement, BlockState, SignatureError

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "DEFAULT_TOLERANCES",
    "parse_config",
    "load_config",
    "dump_config",
    "matrix_to_json",
    "geometric_schedule",
]

DEFAULT_TOLERANCES = {
    "theorem": 1e-3,
    "oracle": 1e-6,
    "lipschitz": 1e-9,
    "sandwich_low": 1e-9,
    "sandwich_high": 1e-10,
    "norming": 1e-10,
    "round_trip": 1e-12,
    "faithful_m": 1e-8,
    "witness": 1e-8,
    "rho_compat": 1e-9,
    "idempotence": 1e-10,
    "commutation": 1e-8,
}
TAIL_WINDOW = 5


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path or '<root>'}: {msg}")
        self.path = path


def _exact(v: Any, path: str) -> float:
    if isinstance(v, bool):
        raise ConfigError(path, "expected a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(t, int) for t in v):
        if v[1] == 0:
            raise ConfigError(path, "zero denominator")
        return float(Fraction(v[0], v[1]))
    raise ConfigError(path, "expected a number or an integer rational [num, den]")


def _matrix(v: Any, path: str, n: int | None = None) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ConfigError(path, "expected a matrix as a list of rows of [re, im] pairs")
    rows = len(v)
    out = np.empty((rows, rows), dtype=np.complex128)
    for i, row in enumerate(v):
        if len(row) != rows:
            raise ConfigError(f"{path}[{i}]", f"row has {len(row)} entries, matrix needs {rows}")
        for j, z in enumerate(row):
            if isinstance(z, (int, float)) and not isinstance(z, bool):
                out[i, j] = z
            elif isinstance(z, list) and len(z) == 2 and all(isinstance(t, (int, float)) for t in z):
                out[i, j] = complex(z[0], z[1])
            else:
                raise ConfigError(f"{path}[{i}][{j}]", "entry must be [re, im]")
    if n is not None and rows != n:
        raise ConfigError(path, f"matrix is {rows}x{rows}, block needs {n}x{n}")
    if not np.all(np.isfinite(out)):
        raise ConfigError(path, "non-finite entry")
    return out


def matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=np.complex128)]


def _get(d: dict, key: str, path: str, default: Any = ...) -> Any:
    if key in d:
        return d[key]
    if default is ...:
        raise ConfigError(f"{path}.{key}" if path else key, "missing field")
    return default


def _group(spec: Any) -> GroupModel:
    path = "group"
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object")
    kind = _get(spec, "kind", path)
    try:
        if kind == "zd":
            model: GroupModel = ZdGroup(int(_get(spec, "dim", path)))
        elif kind == "heisenberg":
            model = HeisenbergGroup()
        elif kind == "finite":
            if "preset" in spec:
                preset = spec["preset"]
                if not (isinstance(preset, str) and preset.startswith("S") and preset[1:].isdigit()):
                    raise ConfigError(f"{path}.preset", "only symmetric-group presets 'S<n>' are known")
                model = symmetric_group(int(preset[1:]))[0]
            else:
                gens = [g[0] if isinstance(g, list) else g for g in _get(spec, "generators", path)]
                model = FiniteGroup(_get(spec, "table", path), gens, name=spec.get("name"))
        else:
            raise ConfigError(f"{path}.kind", f"unknown group kind {kind!r}")
    except GroupError as exc:
        raise ConfigError(path, str(exc)) from None
    if "generators" in spec and kind != "finite":
        given = [tuple(g) for g in spec["generators"]]
        expected = [g.coords for g in model.generators]
        if given != expected:
            raise ConfigError(f"{path}.generators", f"expected the standard generators {expected}, got {given}")
    return model


def geometric_schedule(kmax: int, ratio: float = 1.5) -> list[int]:
    """``ceil(ratio^j)`` for ``j = 0, 1, ...`` up to ``kmax``, deduplicated, with ``kmax`` appended."""
    ks, j = [], 0
    while True:
        k = math.ceil(ratio**j - 1e-12)
        if k > kmax:
            break
        if not ks or k != ks[-1]:
            ks.append(k)
        j += 1
    if ks[-1] != kmax:
        ks.append(kmax)
    return ks


def _schedule(spec: Any) -> list[int]:
    path = "schedule"
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object")
    kind = _get(spec, "kind", path)
    if kind == "list":
        ks = _get(spec, "ks", path)
        if not isinstance(ks, list) or not ks or not all(isinstance(k, int) and k >= 1 for k in ks):
            raise ConfigError(f"{path}.ks", "expected a nonempty list of integers >= 1")
        return sorted(set(ks))
    if kind == "geometric":
        kmax = _get(spec, "kmax", path)
        if not isinstance(kmax, int) or kmax < 1:
            raise ConfigError(f"{path}.kmax", "expected an integer >= 1")
        ratio = _exact(spec.get("ratio", [3, 2]), f"{path}.ratio")
        if ratio <= 1:
            raise ConfigError(f"{path}.ratio", "ratio must exceed 1")
        return geometric_schedule(kmax, ratio)
    raise ConfigError(f"{path}.kind", f"unknown schedule kind {kind!r}")


@dataclass
class ExperimentConfig:
    name: str
    model: CStarModel
    element: BlockElement
    schedule: list[int]
    tolerances: dict[str, float]
    seed: int
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def system(self) -> WStarSystem:
        return self.model.target

    def with_schedule(self, ks: list[int]) -> ExperimentConfig:
        return ExperimentConfig(self.name, self.model, self.element, sorted(set(ks)), self.tolerances, self.seed, self.raw)


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a JSON object")
    group = _group(_get(raw, "group", ""))
    folner = folner_family(group)
    rule = raw.get("folner", {}).get("rule") if isinstance(raw.get("folner"), dict) else None
    if rule is not None and rule != folner.rule:
        raise ConfigError("folner.rule", f"group kind {group.kind} ships the {folner.rule!r} rule, got {rule!r}")

    alg = _get(raw, "algebra", "")
    dims = _get(alg, "blocks", "algebra") if isinstance(alg, dict) else None
    if not isinstance(dims, list) or not dims or not all(isinstance(n, int) and n >= 1 for n in dims):
        raise ConfigError("algebra.blocks", "expected a nonempty list of block sizes >= 1")

    kernel = raw.get("kernel_blocks", [])
    if not isinstance(kernel, list) or not all(isinstance(b, int) and 0 <= b < len(dims) for b in kernel):
        raise ConfigError("kernel_blocks", f"expected block indices in [0, {len(dims)})")
    if len(set(kernel)) == len(dims):
        raise ConfigError("kernel_blocks", "iota must keep at least one block")
    surviving = [b for b in range(len(dims)) if b not in set(kernel)]

    ngen = len(group.generators)

    def unitaries(key: str, blocks: list[int]) -> list[list[np.ndarray]]:
        val = _get(raw, key, "")
        if not isinstance(val, list) or len(val) != ngen:
            raise ConfigError(key, f"expected {ngen} generator entries")
        out = []
        for i, per_block in enumerate(val):
            if not isinstance(per_block, list) or len(per_block) != len(blocks):
                raise ConfigError(f"{key}[{i}]", f"expected {len(blocks)} block matrices")
            out.append([_matrix(m, f"{key}[{i}][{j}]", dims[b]) for j, (m, b) in enumerate(zip(per_block, blocks))])
        return out

    theta_u = unitaries("theta_unitaries", list(range(len(dims))))
    if raw.get("xi_unitaries") is not None:
        xi_u = unitaries("xi_unitaries", surviving)
    else:
        xi_u = [[g[b] for b in surviving] for g in theta_u]

    rho_spec = _get(raw, "rho", "")
    if not isinstance(rho_spec, dict):
        raise ConfigError("rho", "expected an object")
    dens = _get(rho_spec, "densities", "rho")
    if not isinstance(dens, list) or len(dens) != len(surviving):
        raise ConfigError("rho.densities", f"expected {len(surviving)} density matrices (surviving blocks)")
    dens_m = [_matrix(m, f"rho.densities[{j}]", dims[b]) for j, (m, b) in enumerate(zip(dens, surviving))]
    if "weights" in rho_spec:
        w = rho_spec["weights"]
        if not isinstance(w, list) or len(w) != len(surviving):
            raise ConfigError("rho.weights", f"expected {len(surviving)} weights")
        weights = [_exact(v, f"rho.weights[{j}]") for j, v in enumerate(w)]
    else:
        total = sum(dims[b] for b in surviving)
        weights = [dims[b] / total for b in surviving]

    elem = _get(raw, "element", "")
    if not isinstance(elem, list) or len(elem) != len(dims):
        raise ConfigError("element", f"expected {len(dims)} block matrices")
    a = BlockElement(_matrix(m, f"element[{b}]", dims[b]) for b, m in enumerate(elem))

    schedule = _schedule(_get(raw, "schedule", ""))
    tol = dict(DEFAULT_TOLERANCES)
    for key, v in (raw.get("tolerances") or {}).items():
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"tolerances.{key}", "unknown tolerance")
        tol[key] = _exact(v, f"tolerances.{key}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed", "expected an integer")

    try:
        theta = Action(group, folner, dims, theta_u)
        xi = Action(group, folner, [dims[b] for b in surviving], xi_u)
        rho = BlockState(weights, dens_m)
        model = CStarModel(theta, kernel, WStarSystem(xi, rho))
    except SignatureError as exc:
        raise ConfigError("", str(exc)) from None
    return ExperimentConfig(str(raw.get("name", "experiment")), model, a, schedule, tol, seed, raw)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    return parse_config(raw)


def dump_config(raw: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(raw, indent=1) + "\n", encoding="utf-8")
