"""Local-PCA (Fukunaga-Olsen) intrinsic dimension of parameter clouds."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import TooFewPoints
from .linalg import SeededRng
from .models import NetworkSpec
from .samplers import SamplerConfig, run_sampler

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.05
DEFAULT_K = 100


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray = field(repr=False)
    source: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise TooFewPoints(f"need at least 2 points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud has non-finite entries")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for row in self.points:
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, source: str = "") -> "PointCloud":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        return cls(np.array([[float(v) for v in r] for r in rows]), source)


@dataclass(frozen=True, eq=False)
class DimEstimate:
    global_estimate: float
    local_estimates: np.ndarray = field(repr=False)
    k_neighbors: int
    fo_alpha: float
    degenerate: int = 0
    noise_floor: float = 0.0
    epsilon: Optional[float] = None

    def histogram(self) -> dict:
        vals, counts = np.unique(self.local_estimates, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}

    def to_dict(self) -> dict:
        out = {
            "global_estimate": self.global_estimate,
            "k": self.k_neighbors,
            "alpha": self.fo_alpha,
            "histogram": {str(k): v for k, v in self.histogram().items()},
            "degenerate_neighborhoods": self.degenerate,
            "noise_floor": self.noise_floor,
        }
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def knn_indices(points: np.ndarray, k: int, block: int = 1024) -> np.ndarray:
    """Indices of the ``k`` nearest other points of every point (exhaustive search)."""
    n = points.shape[0]
    sq = np.einsum("ij,ij->i", points, points)
    out = np.empty((n, k), dtype=np.intp)
    for start in range(0, n, block):
        stop = min(n, start + block)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * points[start:stop] @ points.T
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        # stable order: by distance, ties by index
        rows = np.arange(stop - start)[:, None]
        order = np.lexsort((part, d2[rows, part]), axis=1)
        out[start:stop] = part[rows, order]
    return out


def lpca_estimate(cloud: PointCloud, k_neighbors: Optional[int] = None,
                  fo_alpha: float = DEFAULT_ALPHA, noise_floor: float = 0.0) -> DimEstimate:
    """Fukunaga-Olsen local PCA.

    For every point, the covariance of its ``k`` nearest neighbours is
    diagonalised and the local dimension is the number of eigenvalues above
    ``fo_alpha`` times the largest. ``noise_floor`` (a variance, default 0)
    additionally discards eigenvalues at or below it; neighbourhoods whose
    largest eigenvalue does not exceed the floor get local dimension 0 and
    are counted as degenerate.
    """
    pts = cloud.points
    n = pts.shape[0]
    k = min(DEFAULT_K, n - 1) if k_neighbors is None else int(k_neighbors)
    if k < 2:
        raise ValueError("k_neighbors must be >= 2")
    if not 0 < fo_alpha < 1:
        raise ValueError("fo_alpha must lie in (0, 1)")
    if n <= k:
        raise TooFewPoints(f"{n} points cannot supply {k} neighbours each")
    nbrs = knn_indices(pts, k)
    local = np.empty(n, dtype=np.int64)
    degenerate = 0
    for i in range(n):
        nb = pts[nbrs[i]]
        centred = nb - nb.mean(axis=0)
        # eigenvalues of the covariance from the singular values of the data
        sv = np.linalg.svd(centred, compute_uv=False)
        lam = sv * sv / k
        top = lam[0] if lam.size else 0.0
        if top <= noise_floor or top == 0.0:
            local[i] = 0
            degenerate += 1
            continue
        local[i] = int(np.count_nonzero((lam > fo_alpha * top) & (lam > noise_floor)))
    if degenerate:
        log.info("%d of %d neighbourhoods are degenerate", degenerate, n)
    return DimEstimate(float(local.mean()), local, k, fo_alpha, degenerate, noise_floor)


def estimate_tes_dimension(teacher, student_spec: NetworkSpec, sampler_cfg: SamplerConfig,
                           n_train_large: int, n_repeats: int, rng: SeededRng,
                           sampler: str = "pattern_search", k_neighbors: Optional[int] = None,
                           fo_alpha: float = DEFAULT_ALPHA, floor_factor: float = 0.0,
                           input_box=None) -> DimEstimate:
    """Sample ``n_repeats`` near-interpolators on one large dataset and run lPCA.

    Near-interpolators sit within an O(epsilon) shell of the teacher-equivalent
    set; ``floor_factor * epsilon`` is passed as the eigenvalue noise floor so
    that shell thickness is not counted as dimension (0 keeps plain lPCA).
    """
    from .data import InputBox, sample_dataset

    k = min(DEFAULT_K, n_repeats - 1) if k_neighbors is None else k_neighbors
    if n_repeats < k + 1:
        raise TooFewPoints(f"n_repeats={n_repeats} is below k_neighbors + 1 = {k + 1}")
    box = InputBox() if input_box is None else input_box
    dataset = sample_dataset(teacher, n_train_large, box, rng.child("dataset"))
    rows = [
        run_sampler(sampler, student_spec, dataset, sampler_cfg, rng.child("repeat", r)).params.data
        for r in range(n_repeats)
    ]
    cloud = PointCloud(np.vstack(rows), f"{sampler} x{n_repeats}")
    est = lpca_estimate(cloud, k, fo_alpha, noise_floor=floor_factor * sampler_cfg.epsilon)
    return DimEstimate(est.global_estimate, est.local_estimates, est.k_neighbors, est.fo_alpha,
                       est.degenerate, est.noise_floor, sampler_cfg.epsilon)
