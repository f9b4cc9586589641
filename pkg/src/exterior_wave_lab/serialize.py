"""Deterministic CSV and JSON artifact formats.

Every CSV is UTF-8 with LF newlines, '.' decimal separator, one header row,
and 17 significant digits per value, so a float survives the round trip
bit-exactly and identical inputs give byte-identical files. Manifests are
JSON with sorted keys and 2-space indentation; they carry the resolution
metadata for the numbers written next to them and the run's only timestamp.
"""

from __future__ import annotations

import json
from typing import Dict, Mapping, Optional

import numpy as np
import numpy.typing as npt

from .errors import ContractViolation
from .field_core import RadialGrid, RadialState, Trajectory
from .linear_radiation import RadiationProfile

__all__ = [
    "branch_csv",
    "channels_csv",
    "fmt",
    "history_csv",
    "profile_csv",
    "read_csv",
    "read_profile_csv",
    "read_state_csv",
    "residual_csv",
    "state_csv",
    "trajectory_csv",
    "write_csv",
    "write_manifest",
]


def fmt(x) -> str:
    """17 significant digits: the shortest form that round-trips a double."""
    return f"{float(x):.17g}"


def write_csv(path, columns: Mapping[str, npt.ArrayLike]) -> None:
    """One header row, then rows of fmt()-formatted values, LF newlines.

    columns maps names to equal-length 1-d arrays; insertion order is the
    column order.
    """
    names = list(columns)
    if not names:
        raise ContractViolation("csv needs at least one column")
    cols = [np.asarray(columns[name], dtype=float).ravel() for name in names]
    n = cols[0].size
    if any(c.size != n for c in cols):
        raise ContractViolation("csv columns differ in length")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*cols):
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_csv(path) -> Dict[str, npt.NDArray[np.float64]]:
    with open(path, "r", encoding="utf-8") as fh:
        names = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        data = data.reshape(0, len(names))
    if data.shape[1] != len(names):
        raise ContractViolation(
            f"{path}: {data.shape[1]} data columns under {len(names)} names")
    return {name: data[:, j].copy() for j, name in enumerate(names)}


def _uniform_grid(r: npt.NDArray[np.float64], what: str) -> RadialGrid:
    grid = RadialGrid(float(r[0]), float(r[-1]), r.size)
    if not np.allclose(grid.r, r, rtol=1e-12, atol=1e-12):
        raise ContractViolation(f"{what} is not uniformly spaced")
    return grid


def state_csv(path, state: RadialState) -> None:
    write_csv(path, {"r": state.grid.r, "u": state.u, "ut": state.ut})


def read_state_csv(path, t: float = 0.0) -> RadialState:
    cols = read_csv(path)
    for name in ("r", "u", "ut"):
        if name not in cols:
            raise ContractViolation(f"{path}: state csv needs column '{name}'")
    grid = _uniform_grid(cols["r"], f"{path}: radial column")
    return RadialState(grid, cols["u"], cols["ut"], t=t)


def profile_csv(path, profile: RadiationProfile) -> None:
    write_csv(path, {"s": profile.s, "G": profile.G})


def read_profile_csv(path) -> RadiationProfile:
    cols = read_csv(path)
    for name in ("s", "G"):
        if name not in cols:
            raise ContractViolation(f"{path}: profile csv needs column '{name}'")
    s = cols["s"]
    _uniform_grid(s - s[0], f"{path}: retarded-time column")
    return RadiationProfile(float(s[0]), float(s[-1]), cols["G"])


def trajectory_csv(path, traj: Trajectory) -> None:
    """Long format, one row per (frame, radius): t, r, u, ut."""
    g = traj.grid
    n_frames = len(traj.states)
    t = np.repeat(traj.times, g.n)
    r = np.tile(g.r, n_frames)
    u = np.concatenate([st.u for st in traj.states])
    ut = np.concatenate([st.ut for st in traj.states])
    write_csv(path, {"t": t, "r": r, "u": u, "ut": ut})


def residual_csv(path, curve) -> None:
    write_csv(path, {"t": curve.times, "residual_sq": curve.values})


def channels_csv(path, channels) -> None:
    write_csv(path, {"k": channels.k, "b": channels.b})


def history_csv(path, history, probe_discrepancies) -> None:
    """Iteration log of a construction: step L2 norm and reading discrepancy."""
    history = np.asarray(history, dtype=float)
    disc = np.asarray(probe_discrepancies, dtype=float)
    if disc.size != history.size:
        raise ContractViolation("history and discrepancy logs differ in length")
    write_csv(path, {"iteration": np.arange(1, history.size + 1),
                     "step_l2": history,
                     "probe_discrepancy": disc})


def branch_csv(path, branch) -> None:
    write_csv(path, {"r": branch.r, "w": branch.w, "w_r": branch.w_r,
                     "u": branch.u, "u_r": branch.u_r})


def write_manifest(path, payload: Mapping, timestamp: Optional[str] = None) -> None:
    """Sorted-key JSON document; the timestamp is the only non-reproducible
    field and is attached here so the data files stay byte-identical."""
    doc = dict(payload)
    if timestamp is not None:
        doc["written_at"] = timestamp
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
