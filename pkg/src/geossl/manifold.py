"""Synthetic manifold samplers with closed-form Laplace-Beltrami spectra.

Provides uniform samplers for the unit circle (intrinsic dimension 1,
ambient R^2) and the unit sphere (intrinsic dimension 2, ambient R^3),
the analytic eigenpairs of their Laplace-Beltrami operators, and simple
deterministic label rules for building classification tasks on them.

All randomness flows through ``numpy.random.default_rng`` (PCG64), so a
(kind, n, seed) triple always reproduces the same cloud bit for bit.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import sph_harm_y

MANIFOLD_KINDS = ("circle", "sphere")

# intrinsic dimension d and ambient dimension D = d + 1 per kind
_DIMS = {"circle": (1, 2), "sphere": (2, 3)}


@dataclass(frozen=True)
class PointCloud:
    """n points sampled from a unit circle or sphere, rows in ambient coords."""

    points: np.ndarray          # (n, D), float64, unit-norm rows
    manifold_kind: str
    intrinsic_dim: int
    seed: int

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def ambient_dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class AnalyticEigenpair:
    """One eigenpair of the Laplace-Beltrami operator on the manifold.

    ``eigenfunction`` maps an (m, D) array of ambient points to an (m,)
    array of values.
    """

    index: int
    eigenvalue: float
    eigenfunction: Callable[[np.ndarray], np.ndarray]


def intrinsic_dim(kind):
    if kind not in _DIMS:
        raise ValueError(f"unknown manifold kind {kind!r}; expected one of {MANIFOLD_KINDS}")
    return _DIMS[kind][0]


def sample_manifold(kind, n, seed):
    """Draw n i.i.d. points uniformly (surface measure) from the manifold.

    Parameters
    ----------
    kind : str
        "circle" or "sphere".
    n : int
        Number of points, n >= 1.
    seed : int
        PRNG seed; identical (kind, n, seed) yield bit-identical clouds.

    Returns
    -------
    PointCloud
    """
    d, D = _DIMS.get(kind, (None, None))
    if d is None:
        raise ValueError(f"unknown manifold kind {kind!r}; expected one of {MANIFOLD_KINDS}")
    if n < 1:
        raise ValueError(f"need at least one sample, got n={n}")
    rng = np.random.default_rng(seed)
    if kind == "circle":
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        pts = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        # normalized 3-D Gaussians are exactly uniform on the sphere
        pts = rng.standard_normal(size=(n, 3))
        norms = np.linalg.norm(pts, axis=1)
        while np.any(norms < 1e-12):  # pragma: no cover - essentially impossible
            bad = norms < 1e-12
            pts[bad] = rng.standard_normal(size=(int(bad.sum()), 3))
            norms = np.linalg.norm(pts, axis=1)
        pts /= norms[:, None]
    return PointCloud(points=pts, manifold_kind=kind, intrinsic_dim=d, seed=seed)


def _circle_theta(points):
    return np.arctan2(points[:, 1], points[:, 0])


def _circle_eigenfunction(k, use_sin):
    if k == 0:
        return lambda pts: np.ones(np.asarray(pts).shape[0])
    if use_sin:
        return lambda pts: np.sin(k * _circle_theta(np.asarray(pts)))
    return lambda pts: np.cos(k * _circle_theta(np.asarray(pts)))


def _sphere_eigenfunction(l, m):
    def f(pts):
        pts = np.asarray(pts)
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        theta = np.arccos(np.clip(z, -1.0, 1.0))   # polar angle
        phi = np.arctan2(y, x)                     # azimuth
        if m == 0:
            return np.real(sph_harm_y(l, 0, theta, phi))
        ylm = sph_harm_y(l, abs(m), theta, phi)
        if m > 0:
            return np.sqrt(2.0) * (-1.0) ** m * np.real(ylm)
        return np.sqrt(2.0) * (-1.0) ** m * np.imag(ylm)

    return f


def analytic_eigenpair(kind, index):
    """Return the index-th Laplace-Beltrami eigenpair, sorted by eigenvalue.

    Circle indexing interleaves the sine/cosine pair of each frequency k:
    index 0 is the constant, index 2k-1 is sin(k theta) and index 2k is
    cos(k theta), both with eigenvalue k^2. Sphere indexing is degree-major:
    degree l occupies indices l^2 .. l^2 + 2l (orders m = -l..l), all with
    eigenvalue l(l+1); eigenfunctions are real spherical harmonics.
    """
    if index < 0:
        raise ValueError(f"eigenpair index must be >= 0, got {index}")
    if kind == "circle":
        if index == 0:
            return AnalyticEigenpair(0, 0.0, _circle_eigenfunction(0, False))
        k = (index + 1) // 2
        use_sin = index % 2 == 1
        return AnalyticEigenpair(index, float(k * k), _circle_eigenfunction(k, use_sin))
    if kind == "sphere":
        l = int(np.sqrt(index))
        m = index - l * l - l
        return AnalyticEigenpair(index, float(l * (l + 1)), _sphere_eigenfunction(l, m))
    raise ValueError(f"unknown manifold kind {kind!r}; expected one of {MANIFOLD_KINDS}")


def circle_cosine_index(k):
    """Index of the cos(k theta) eigenfunction under the circle indexing."""
    if k < 0:
        raise ValueError("frequency must be >= 0")
    return 0 if k == 0 else 2 * k


def fourier_features(points, dim, seed, freq_scale=3.0):
    """Fixed smooth random-Fourier embedding of manifold points into R^dim.

    The projection frequencies and phases are functions of ``seed`` only,
    so the same point always maps to the same feature row; this gives a
    richer (higher-dimensional) embedding of the manifold than raw
    coordinates while staying a deterministic map on it.
    """
    points = np.asarray(points)
    if dim < 1:
        raise ValueError("feature dimension must be >= 1")
    rng = np.random.default_rng(seed)
    omega = rng.normal(0.0, freq_scale, size=(dim, points.shape[1]))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=dim)
    return np.sqrt(2.0 / dim) * np.cos(points @ omega.T + phase)


LABEL_RULES = ("hemisphere", "angular_sector")


def synthetic_labels(cloud, rule, sectors=None):
    """Assign integer class labels in {1..C} from point coordinates.

    "hemisphere" splits by the sign of the last ambient coordinate
    (class 1 for >= 0, class 2 otherwise) and works on both manifolds.
    "angular_sector" partitions the circle into ``sectors`` equal arcs,
    arc [2*pi*c/C, 2*pi*(c+1)/C) mapping to class c+1; circle only.
    """
    pts = cloud.points
    if rule == "hemisphere":
        return np.where(pts[:, -1] >= 0.0, 1, 2).astype(np.int64)
    if rule == "angular_sector":
        if cloud.manifold_kind != "circle":
            raise ValueError("angular_sector labels are only defined on the circle")
        if sectors is None or sectors < 1:
            raise ValueError("angular_sector needs a positive sector count")
        theta = np.mod(_circle_theta(pts), 2.0 * np.pi)
        labels = np.floor(theta / (2.0 * np.pi / sectors)).astype(np.int64) + 1
        # theta exactly 2*pi after mod rounding falls back into the last arc
        return np.minimum(labels, sectors)
    raise ValueError(f"unknown label rule {rule!r}; expected one of {LABEL_RULES}")
