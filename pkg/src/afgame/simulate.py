"""Seeded Euler-Maruyama simulation of the controlled two-dimensional SDE.

Gaussian increments are produced by a counter-based scheme: a Philox
stream keyed by the seed supplies raw 64-bit words, and the pair of
standard normals consumed by path p at step k always comes from words
2*(p*nSteps + k) and its successor (Box-Muller).  Draws are therefore a
pure function of (seed, path, step), so batches are bit-reproducible no
matter how generation would be scheduled or sharded.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .controls import GainPath
from .model import GameParams
from .riccati import NonFinite, TimeGrid

__all__ = [
    "SimConfig",
    "TrajectoryBatch",
    "counter_normals",
    "euler_maruyama",
    "pathwise_quadratic",
    "save_batch",
    "load_batch",
]

_MAGIC = b"AFG1"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQQ")


@dataclass(frozen=True)
class SimConfig:
    """Simulation sizes; defaults follow the experiment configuration."""

    nSteps: int = 100
    nPaths: int = 50_000
    seed: int = 0
    x0: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nSteps < 1 or self.nPaths < 1:
            raise ValueError("nSteps and nPaths must be >= 1")


@dataclass(frozen=True)
class TrajectoryBatch:
    """Simulated states, shape (nPaths, nSteps+1, 2), plus provenance."""

    states: np.ndarray
    labels: tuple[str, str]
    seed: int
    increments: np.ndarray | None = None


def counter_normals(seed: int, n_paths: int, n_steps: int) -> np.ndarray:
    """Standard-normal increments, shape (n_paths, n_steps, 2).

    Element (p, k, :) is a fixed function of (seed, p, k): two raw Philox
    words mapped through Box-Muller.
    """
    n = n_paths * n_steps * 2
    words = np.random.Philox(key=seed).random_raw(n).reshape(n_paths, n_steps, 2)
    u1 = ((words[..., 0] >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    u2 = ((words[..., 1] >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.empty((n_paths, n_steps, 2))
    out[..., 0] = r * np.cos(2.0 * np.pi * u2)
    out[..., 1] = r * np.sin(2.0 * np.pi * u2)
    return out


def euler_maruyama(gains: GainPath, params: GameParams, sim: SimConfig,
                   keep_increments: bool = False) -> TrajectoryBatch:
    """Simulate X_{k+1} = X_k + K(t_k) X_k dt + Sigma sqrt(dt) xi_k.

    Drift is sampled at the left endpoint, matching the discretized
    residual definition used by the detector.
    """
    if gains.grid.N != sim.nSteps:
        raise ValueError("gains grid and simulation step count disagree")
    dt = gains.grid.dt
    sdt = np.sqrt(dt)
    sig = np.array([params.sigmaA, params.sigmaB])
    K = gains.K  # (N+1, 2, 2) node values
    xi = counter_normals(sim.seed, sim.nPaths, sim.nSteps)
    states = np.empty((sim.nPaths, sim.nSteps + 1, 2))
    states[:, 0, :] = np.asarray(sim.x0, dtype=float)
    x = states[:, 0, :].copy()
    for k in range(sim.nSteps):
        x = x + (x @ K[k].T) * dt + sig * sdt * xi[:, k, :]
        states[:, k + 1, :] = x
    if not np.isfinite(states).all():
        raise NonFinite("simulation overflowed")
    return TrajectoryBatch(states, gains.labels, sim.seed,
                           xi if keep_increments else None)


def pathwise_quadratic(batch: TrajectoryBatch, C: np.ndarray,
                       grid: TimeGrid) -> tuple[float, float, np.ndarray]:
    """Trapezoidal per-path integral of x' C(t_k) x and its batch statistics.

    C : (N+1, 2, 2) weight schedule on the grid nodes.
    Returns (mean, standard error, per-path values); the reduction order
    is fixed, so results are reproducible.
    """
    states = batch.states
    if states.shape[1] != grid.N + 1:
        raise ValueError("batch and grid disagree on the step count")
    w = np.full(grid.N + 1, grid.dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    quad = np.einsum("pti,tij,ptj->pt", states, C, states, optimize=True)
    per_path = quad @ w
    n = per_path.shape[0]
    mean = float(per_path.mean())
    se = float(per_path.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, se, per_path


def save_batch(path, batch: TrajectoryBatch) -> None:
    """Binary dump: header (magic 'AFG1', version, nPaths, nSteps, seed),
    then row-major little-endian float64 states."""
    states = np.ascontiguousarray(batch.states, dtype="<f8")
    n_paths, n_nodes, _ = states.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, n_paths, n_nodes - 1, batch.seed % 2**64))
        fh.write(states.tobytes())


def load_batch(path) -> TrajectoryBatch:
    """Read a batch written by save_batch."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, n_paths, n_steps, seed = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError(f"not a trajectory dump (magic {magic!r})")
        if version != _VERSION:
            raise ValueError(f"unsupported dump version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    states = data.reshape(n_paths, n_steps + 1, 2)
    return TrajectoryBatch(states, ("file", "file"), seed)
