"""Bundled experiment configs and a seeded generator of valid ones.

Generated systems are rho-invariant by construction: rho has repeated
eigenvalues and every generator unitary is block diagonal with respect to
its eigenspaces.  Group relations also hold by construction (common
eigenbases for ``Z^d``; clock/shift pairs with scalar commutators for the
Heisenberg group; sums of irreducibles for ``S_3``).
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.linalg

from folnerlab.config import matrix_to_json
from folnerlab.groups import symmetric_group
from folnerlab.matrix import random_positive, random_unitary

__all__ = ["BUNDLED", "bundled_raw", "bundled_path", "build_bundled", "generate_example", "GEN_KINDS"]

GEN_KINDS = ("zd", "finite", "heisenberg", "kernel")

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)


def _mats(ms):
    return [matrix_to_json(m) for m in ms]


def _base(name, group, blocks, theta, rho_dens, element, schedule, kernel=(), weights=None, seed=0):
    raw = {
        "name": name,
        "seed": seed,
        "group": group,
        "algebra": {"blocks": list(blocks)},
        "kernel_blocks": list(kernel),
        "theta_unitaries": [_mats(g) for g in theta],
        "rho": {"densities": _mats(rho_dens)},
        "element": _mats(element),
        "schedule": schedule,
    }
    if weights is not None:
        raw["rho"]["weights"] = weights
    return raw


def _fixed_positive(n, seed):
    return random_positive([n], np.random.default_rng(seed)).blocks[0]


def build_bundled() -> dict[str, dict]:
    """The shipped systems, built from scratch (the JSON files are snapshots of this)."""
    out = {}
    out["identity"] = _base(
        "identity",
        {"kind": "zd", "dim": 1, "generators": [[1]]},
        [3],
        [[np.eye(3)]],
        [np.eye(3) / 3],
        [_fixed_positive(3, 11)],
        {"kind": "geometric", "kmax": 2000, "ratio": [3, 2]},
    )
    out["alternating"] = _base(
        "alternating",
        {"kind": "zd", "dim": 1, "generators": [[1]]},
        [2],
        [[SZ]],
        [I2 / 2],
        [np.ones((2, 2))],
        {"kind": "list", "ks": list(range(1, 2001))},
    )
    # Z^2 on M_4: rho = diag(0.4, 0.4, 0.1, 0.1); both generators preserve its eigenspaces and commute
    u1 = scipy.linalg.block_diag(SX, SZ)
    u2 = scipy.linalg.block_diag(-SX, np.diag([1, 1j]))
    out["z2_m4"] = _base(
        "z2_m4",
        {"kind": "zd", "dim": 2, "generators": [[1, 0], [0, 1]]},
        [4],
        [[u1], [u2]],
        [np.diag([0.4, 0.4, 0.1, 0.1])],
        [_fixed_positive(4, 12)],
        {"kind": "list", "ks": list(range(1, 21)) + list(range(24, 101, 4))},
    )
    # Heisenberg on M_4 = M_2 ⊕ M_2 spatially: clock/shift (commutator -1) on the first C^2,
    # commuting generators on the second, so the center acts by diag(-1, -1, 1, 1)
    hx = scipy.linalg.block_diag(SX, SZ)
    hy = scipy.linalg.block_diag(SZ, SZ)
    out["heisenberg_m4"] = _base(
        "heisenberg_m4",
        {"kind": "heisenberg", "generators": [[1, 0, 0], [0, 1, 0]]},
        [4],
        [[hx], [hy]],
        [np.diag([0.3, 0.3, 0.2, 0.2])],
        [_fixed_positive(4, 13)],
        {"kind": "list", "ks": [1, 2, 3, 4, 6, 8, 10, 12]},
    )
    out["kernel"] = _base(
        "kernel",
        {"kind": "zd", "dim": 1, "generators": [[1]]},
        [2, 2],
        [[SZ, SX]],
        [I2 / 2],
        [np.ones((2, 2)), 3 * I2],
        {"kind": "list", "ks": list(range(1, 2001))},
        kernel=[1],
    )
    s3, perms = symmetric_group(3)
    perm_mats = [np.eye(3)[:, list(p)] for p in perms]
    out["finite_s3"] = _base(
        "finite_s3",
        {"kind": "finite", "preset": "S3"},
        [3],
        [[perm_mats[g.coords[0]]] for g in s3.generators],
        [np.eye(3) / 3],
        [_fixed_positive(3, 14)],
        {"kind": "list", "ks": list(range(1, 11))},
    )
    return out


BUNDLED = ("identity", "alternating", "z2_m4", "heisenberg_m4", "kernel", "finite_s3")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("folnerlab") / "configs" / f"{name}.json"))


def bundled_raw(name: str) -> dict:
    return json.loads(bundled_path(name).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# generator


def _eigenspaces(rng, dim):
    """Random composition of ``dim`` into eigenspace sizes with at least one repeat when dim > 1."""
    sizes = []
    left = dim
    while left:
        s = int(rng.integers(1, min(left, 4) + 1))
        if dim > 1 and not sizes and s == 1:
            s = min(2, left)
        sizes.append(s)
        left -= s
    vals = rng.uniform(0.5, 2.0, size=len(sizes))
    diag = np.concatenate([np.full(s, v) for s, v in zip(sizes, vals)])
    return sizes, diag / diag.sum()


def _conj(w, m):
    return w @ m @ w.conj().T


def _chunks(rng, m, big):
    out, left = [], m
    while left:
        s = big if left >= big and rng.random() < 0.7 else 1
        out.append(s)
        left -= s
    return out


def _heis_part(rng, m):
    xs, ys = [], []
    for s in _chunks(rng, m, 2):
        if s == 2:
            ph = np.exp(2j * np.pi * rng.integers(0, 4, size=2) / 4)
            xs.append(ph[0] * SX)
            ys.append(ph[1] * SZ)
        else:
            ph = np.exp(2j * np.pi * rng.integers(0, 4, size=2) / 4)
            xs.append(np.array([[ph[0]]]))
            ys.append(np.array([[ph[1]]]))
    w = random_unitary(m, rng)
    return _conj(w, scipy.linalg.block_diag(*xs)), _conj(w, scipy.linalg.block_diag(*ys))


def _s3_irreps():
    s3, perms = symmetric_group(3)
    basis = np.array([[1, -1, 0], [1, 1, -2]], dtype=float).T
    basis /= np.linalg.norm(basis, axis=0)
    reps = {}
    for g in s3.generators:
        p = perms[g.coords[0]]
        pm = np.eye(3)[:, list(p)]
        sign = np.linalg.det(pm)
        reps[g.coords[0]] = {"triv": np.eye(1), "sign": np.array([[sign]]), "std": basis.T @ pm @ basis}
    return s3, reps


def generate_example(kind: str, seed: int, dim: int) -> dict:
    """A valid raw config of the given kind on ``M_dim`` (kernel kind: ``M_dim ⊕ M_{dim//2}``)."""
    if kind not in GEN_KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {GEN_KINDS}")
    if not 1 <= dim <= 64:
        raise ValueError("dim must lie in [1, 64]")
    rng = np.random.default_rng(seed)
    sizes, spectrum = _eigenspaces(rng, dim)
    v = random_unitary(dim, rng)
    rho = _conj(v, np.diag(spectrum))

    def lift(parts):
        return _conj(v, scipy.linalg.block_diag(*parts))

    name = f"gen_{kind}_s{seed}_d{dim}"
    if kind in ("zd", "kernel"):
        d = 2 if kind == "zd" else 1
        gens = [[] for _ in range(d)]
        for m in sizes:
            w = random_unitary(m, rng)
            for i in range(d):
                gens[i].append(_conj(w, np.diag(np.exp(2j * np.pi * rng.integers(0, 4, size=m) / 4))))
        mats = [lift(g) for g in gens]
        group = {"kind": "zd", "dim": d, "generators": np.eye(d, dtype=int).tolist()}
        if kind == "zd":
            a = random_positive([dim], rng).blocks
            return _base(name, group, [dim], [[u] for u in mats], [rho], a,
                         {"kind": "list", "ks": [1, 2, 3, 4, 6, 8, 12, 24, 36, 48, 60]}, seed=seed)
        kdim = max(1, dim // 2)
        ku = random_unitary(kdim, rng)
        a = random_positive([dim, kdim], rng).blocks
        a = [a[0], 3 * a[1]]
        return _base(name, group, [dim, kdim], [[mats[0], ku]], [rho], a,
                     {"kind": "list", "ks": list(range(1, 25)) + [36, 48, 60, 72, 84, 96, 108, 120]},
                     kernel=[1], seed=seed)
    if kind == "heisenberg":
        xs, ys = zip(*(_heis_part(rng, m) for m in sizes))
        a = random_positive([dim], rng).blocks
        return _base(name, {"kind": "heisenberg", "generators": [[1, 0, 0], [0, 1, 0]]}, [dim],
                     [[lift(xs)], [lift(ys)]], [rho], a,
                     {"kind": "list", "ks": [1, 2, 3, 4, 6, 8, 12, 16, 20, 24]}, seed=seed)
    # finite: S_3 through sums of irreducibles inside each eigenspace
    s3, reps = _s3_irreps()
    gens = {g.coords[0]: [] for g in s3.generators}
    for m in sizes:
        labels = []
        for s in _chunks(rng, m, 2):
            labels.append("std" if s == 2 else ("triv", "sign")[int(rng.integers(2))])
        w = random_unitary(m, rng)
        for g in gens:
            gens[g].append(_conj(w, scipy.linalg.block_diag(*(reps[g][lab] for lab in labels))))
    a = random_positive([dim], rng).blocks
    return _base(name, {"kind": "finite", "preset": "S3"}, [dim],
                 [[lift(gens[g.coords[0]])] for g in s3.generators], [rho], a,
                 {"kind": "list", "ks": [1, 2, 3, 4, 5]}, seed=seed)
