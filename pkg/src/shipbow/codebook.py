"""Visual-word codebook: k-means over the pooled descriptors, BoW encoding."""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionMismatch, EmptyDescriptorSet, TooFewDescriptors

logger = logging.getLogger(__name__)

N_RESTARTS = 5
TRANSFER_ROUNDS = 5
TRANSFER_SWEEPS = 20
_CHUNK = 4096


@dataclass
class Codebook:
    centers: np.ndarray  # (k, D)
    seed: int = 0
    inertia: float = float("nan")
    n_iter: int = 0
    inertia_history: list = field(default_factory=list, repr=False)

    @property
    def k(self):
        return self.centers.shape[0]

    @property
    def dim(self):
        return self.centers.shape[1]


def _as_matrix(descriptors):
    x = np.asarray(descriptors, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionMismatch(f"descriptors must form an (n, D) matrix, got shape {x.shape}")
    return x


def _exact_sq_dist(x, centers):
    d = x[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", d, d)


def assign(x, centers):
    """Nearest center per row and its squared distance; ties go to the lowest index.

    Distances come from the ||x||^2 - 2 x.c + ||c||^2 expansion; rows whose two
    best candidates are too close to call are recomputed exactly.
    """
    n, k = x.shape[0], centers.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n)
    cc = np.einsum("kd,kd->k", centers, centers)
    for start in range(0, n, _CHUNK):
        xb = x[start : start + _CHUNK]
        xx = np.einsum("nd,nd->n", xb, xb)
        d2 = xx[:, None] - 2.0 * (xb @ centers.T) + cc[None, :]
        if k > 1:
            part = np.partition(d2, 1, axis=1)
            scale = np.maximum(xx[:, None] + cc[None, :], 1.0).max(axis=1)
            unsure = (part[:, 1] - part[:, 0]) <= 1e-9 * scale
        else:
            unsure = np.zeros(len(xb), dtype=bool)
        lab = np.argmin(d2, axis=1)
        if unsure.any():
            lab[unsure] = np.argmin(_exact_sq_dist(xb[unsure], centers), axis=1)
        diff = xb - centers[lab]
        labels[start : start + len(xb)] = lab
        dists[start : start + len(xb)] = np.einsum("nd,nd->n", diff, diff)
    return labels, dists


def _kmeanspp(x, w, k, rng):
    """k-means++ seeding on distinct rows ``x`` with multiplicities ``w``."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    first = int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(), side="right"))
    centers[0] = x[min(first, n - 1)]
    closest = _exact_sq_dist(x, centers[:1])[:, 0]
    for c in range(1, k):
        mass = w * closest
        total = mass.sum()
        if total <= 0:
            raise TooFewDescriptors(f"only {c} distinct descriptors for k={k}")
        idx = int(np.searchsorted(np.cumsum(mass), rng.random() * total, side="right"))
        idx = min(idx, n - 1)
        while closest[idx] <= 0:  # never pick a point that is already a center
            idx = (idx + 1) % n
        centers[c] = x[idx]
        closest = np.minimum(closest, _exact_sq_dist(x, centers[c : c + 1])[:, 0])
    return centers


def _means(x, w, labels, k):
    centers = np.empty((k, x.shape[1]))
    for j in range(k):
        m = labels == j
        centers[j] = (w[m, None] * x[m]).sum(axis=0) / w[m].sum()
    return centers


def _update_centers(x, w, labels, dists, k):
    """Weighted cluster means; an empty cluster takes the row farthest from its center."""
    rows = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(rows == 0):
        movable = rows[labels] > 1
        i = int(np.argmax(np.where(movable, dists, -1.0)))
        rows[labels[i]] -= 1
        labels[i] = j
        dists[i] = 0.0
        rows[j] = 1
    return _means(x, w, labels, k)


def _lloyd(x, w, centers, max_iter, tol):
    k = centers.shape[0]
    labels, dists = assign(x, centers)
    history = [float(w @ dists)]
    it = 0
    for it in range(1, max_iter + 1):
        new_centers = _update_centers(x, w, labels, dists, k)
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        labels, dists = assign(x, centers)
        history.append(float(w @ dists))
        if shift < tol:
            break
    return centers, history, it


def _refine(x, w, centers, history, max_iter, tol):
    """Alternate single-point transfer passes and Lloyd runs.

    Lloyd fixed points can still admit a single point move that lowers the
    inertia, which is how plain Lloyd gets stuck on small inputs. Every round
    either lowers the inertia or ends the loop.
    """
    k = centers.shape[0]
    total_iter = 0
    for _ in range(TRANSFER_ROUNDS):
        labels, _ = assign(x, centers)
        labels, moves = kernels.transfer_pass(x, w, labels, k, TRANSFER_SWEEPS)
        if moves == 0:
            break
        new_centers, more, n_iter = _lloyd(x, w, _means(x, w, labels, k), max_iter, tol)
        if more[0] > history[-1]:  # rounding noise only
            break
        centers, history = new_centers, history + more
        total_iter += n_iter
    return centers, history, total_iter


def kmeans_fit(descriptors, k, seed=0, max_iter=100, tol=1e-6, n_init=N_RESTARTS):
    """k-means++ seeded Lloyd iterations; the best of ``n_init`` restarts wins.

    Repeated descriptors are merged into weighted rows first, which leaves
    the objective unchanged. Each restart ends with single-point transfer
    passes followed by more Lloyd steps; both only ever lower the inertia.

    ``inertia_history`` of the returned codebook holds the within-cluster sum
    of squares after every assignment step of the winning restart.
    """
    x = _as_matrix(descriptors)
    if k < 1:
        raise ValueError("k must be >= 1")
    if x.shape[0] < k:
        raise TooFewDescriptors(f"{x.shape[0]} descriptors for k={k}")
    if not np.all(np.isfinite(x)):
        raise ValueError("descriptors contain non-finite values")
    ux, counts = np.unique(x, axis=0, return_counts=True)
    if ux.shape[0] < k:
        raise TooFewDescriptors(f"only {ux.shape[0]} distinct descriptors for k={k}")
    w = counts.astype(np.float64)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        init = _kmeanspp(ux, w, k, rng)
        centers, history, n_iter = _lloyd(ux, w, init, max_iter, tol)
        centers, history, more_iter = _refine(ux, w, centers, history, max_iter, tol)
        n_iter += more_iter
        if best is None or history[-1] < best.inertia:
            best = Codebook(centers, seed, history[-1], n_iter, history)
    logger.debug("k-means k=%d inertia=%.6g after %d iterations", k, best.inertia, best.n_iter)
    return best


def nearest_center(codebook, d):
    """Index of the closest center (lowest index on ties)."""
    d = np.asarray(d, dtype=np.float64).ravel()
    if d.shape[0] != codebook.dim:
        raise DimensionMismatch(f"descriptor has {d.shape[0]} dims, codebook {codebook.dim}")
    diff = codebook.centers - d
    return int(np.argmin(np.einsum("kd,kd->k", diff, diff)))


def encode_bow(codebook, descriptors):
    """L1-normalised histogram of nearest-center assignments."""
    x = _as_matrix(descriptors)
    if x.shape[0] == 0:
        raise EmptyDescriptorSet("cannot encode an empty descriptor set")
    if x.shape[1] != codebook.dim:
        raise DimensionMismatch(f"descriptors have {x.shape[1]} dims, codebook {codebook.dim}")
    labels = np.argmin(_exact_sq_dist(x, codebook.centers), axis=1)
    return np.bincount(labels, minlength=codebook.k) / x.shape[0]
