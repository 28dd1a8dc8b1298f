"""RBF-kernel support vector machine trained with SMO, one-vs-one multiclass."""
import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import DimensionMismatch, SingleClassInput

logger = logging.getLogger(__name__)

SV_THRESHOLD = 1e-8
DENSE_KERNEL_LIMIT = 4096
GRID_C = (0.1, 1.0, 10.0, 100.0, 1000.0)
GRID_GAMMA_FACTORS = (0.1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class SvmParams:
    """``gamma=None`` means 1 / (feature dimension)."""

    c: float = 1.0
    gamma: float = None
    kkt_tol: float = 1e-3
    max_passes: int = 200
    grid_search: bool = False

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be > 0")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.kkt_tol <= 0:
            raise ValueError("kkt_tol must be > 0")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")

    def resolved_gamma(self, dim):
        return self.gamma if self.gamma is not None else 1.0 / dim


@dataclass
class BinarySvmModel:
    support_vectors: np.ndarray  # (m, D)
    alphas: np.ndarray  # (m,)
    sv_labels: np.ndarray  # (m,) of +-1
    bias: float
    gamma: float
    c: float = 1.0
    n_iter: int = 0
    converged: bool = True
    sv_indices: np.ndarray = field(default=None, repr=False)
    objective_trace: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self):
        return self.support_vectors.shape[1]


@dataclass
class MulticlassSvmModel:
    class_names: list
    pairwise: dict  # (class_a, class_b) -> BinarySvmModel; +1 means class_a

    @property
    def dim(self):
        return next(iter(self.pairwise.values())).dim


def rbf_kernel(a, b, gamma):
    """exp(-gamma * ||a - b||^2)."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(f"vectors of length {a.shape[0]} and {b.shape[0]}")
    d = a - b
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_matrix(x, z, gamma):
    xx = np.einsum("nd,nd->n", x, x)
    zz = np.einsum("nd,nd->n", z, z)
    d2 = np.maximum(xx[:, None] + zz[None, :] - 2.0 * (x @ z.T), 0.0)
    return np.exp(-gamma * d2)


def _check_xy(x, y):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch(f"training vectors must form an (n, D) matrix, got {x.shape}")
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != x.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} vectors but {y.shape[0]} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("binary labels must be +1 or -1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SingleClassInput("binary training needs both +1 and -1 labels")
    return x, y


def train_binary(x, y, params=None, record_objective=False, backend=None):
    """Fit one binary RBF-SVM by solving the dual with SMO.

    Iteration stops once the maximal KKT violating pair is within
    ``params.kkt_tol`` or after ``max_passes * n`` pair updates.
    """
    params = params or SvmParams()
    x, y = _check_xy(x, y)
    n = x.shape[0]
    gamma = params.resolved_gamma(x.shape[1])
    impl = kernels.get_backend(backend)
    if n <= DENSE_KERNEL_LIMIT:
        kmat = rbf_matrix(x, x, gamma)
        np.fill_diagonal(kmat, 1.0)
    else:
        kmat = None
    alpha, bias, n_iter, converged, trace = impl.smo_solve(
        kmat, np.ascontiguousarray(x), y, gamma, params.c, params.kkt_tol,
        params.max_passes * n, record_objective,
    )
    if not converged:
        logger.warning("SMO stopped after %d updates without reaching kkt_tol=%g", n_iter, params.kkt_tol)
    sv = np.flatnonzero(alpha > SV_THRESHOLD)
    return BinarySvmModel(
        support_vectors=x[sv].copy(),
        alphas=alpha[sv].copy(),
        sv_labels=y[sv].copy(),
        bias=float(bias),
        gamma=gamma,
        c=params.c,
        n_iter=int(n_iter),
        converged=bool(converged),
        sv_indices=sv,
        objective_trace=trace if record_objective else None,
    )


def decision_values(model, v):
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if v.shape[1] != model.dim:
        raise DimensionMismatch(f"vector has {v.shape[1]} dims, model {model.dim}")
    if model.alphas.shape[0] == 0:
        return np.full(v.shape[0], model.bias)
    k = rbf_matrix(v, model.support_vectors, model.gamma)
    return k @ (model.alphas * model.sv_labels) + model.bias


def decision_value(model, v):
    """sum_i alpha_i y_i K(sv_i, v) + bias; its sign is the predicted label."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.shape[0] != model.dim:
        raise DimensionMismatch(f"vector has {v.shape[0]} dims, model {model.dim}")
    s = 0.0
    for sv, a, lab in zip(model.support_vectors, model.alphas, model.sv_labels):
        s += a * lab * rbf_kernel(sv, v, model.gamma)
    return s + model.bias


def train_multiclass(x, labels, params=None, backend=None):
    """One binary SVM per unordered class pair."""
    params = params or SvmParams()
    x = np.asarray(x, dtype=np.float64)
    labels = [str(l) for l in labels]
    if x.ndim != 2 or x.shape[0] != len(labels):
        raise DimensionMismatch(f"{x.shape} vectors for {len(labels)} labels")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise SingleClassInput(f"need at least two classes, got {classes}")
    lab = np.asarray(labels)
    pairwise = {}
    for a, b in itertools.combinations(classes, 2):
        mask = (lab == a) | (lab == b)
        y = np.where(lab[mask] == a, 1.0, -1.0)
        pairwise[(a, b)] = train_binary(x[mask], y, params, backend=backend)
    return MulticlassSvmModel(class_names=classes, pairwise=pairwise)


def _vote(model, dvs):
    """Winner from one-vs-one decision values keyed by class pair."""
    order = {name: i for i, name in enumerate(model.class_names)}
    votes = dict.fromkeys(model.class_names, 0)
    strength = dict.fromkeys(model.class_names, 0.0)
    for pair in sorted(dvs, key=lambda p: (order[p[0]], order[p[1]])):
        dv = dvs[pair]
        winner = pair[0] if dv > 0 else pair[1]
        votes[winner] += 1
        strength[winner] += abs(dv)
    top = max(votes.values())
    tied = [c for c in model.class_names if votes[c] == top]
    return min(tied, key=lambda c: (-strength[c], order[c]))


def predict(model, v):
    """Majority vote; ties go to the largest summed |decision value|, then class order."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.shape[0] != model.dim:
        raise DimensionMismatch(f"vector has {v.shape[0]} dims, model {model.dim}")
    dvs = {pair: float(decision_values(m, v)[0]) for pair, m in model.pairwise.items()}
    return _vote(model, dvs)


def predict_many(model, x):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.dim:
        raise DimensionMismatch(f"vectors have {x.shape[1]} dims, model {model.dim}")
    per_pair = {pair: decision_values(m, x) for pair, m in model.pairwise.items()}
    return [_vote(model, {p: float(d[i]) for p, d in per_pair.items()}) for i in range(x.shape[0])]


def grid_search(x, labels, params=None, folds=3, seed=0, backend=None):
    """Pick (c, gamma) by stratified cross-validation error.

    The gamma grid is ``GRID_GAMMA_FACTORS`` times 1/D. Ties keep the first
    grid entry.
    """
    params = params or SvmParams()
    x = np.asarray(x, dtype=np.float64)
    lab = np.asarray([str(l) for l in labels])
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(lab), dtype=np.int64)
    for cls in sorted(set(lab)):
        idx = np.flatnonzero(lab == cls)
        fold_of[rng.permutation(idx)] = np.arange(len(idx)) % folds
    base_gamma = 1.0 / x.shape[1]
    best, best_err = params, None
    for c in GRID_C:
        for g in GRID_GAMMA_FACTORS:
            trial = replace(params, c=c, gamma=g * base_gamma, grid_search=False)
            wrong = 0
            for f in range(folds):
                train, test = fold_of != f, fold_of == f
                if len(set(lab[train])) < 2 or not test.any():
                    continue
                model = train_multiclass(x[train], lab[train], trial, backend=backend)
                wrong += sum(p != t for p, t in zip(predict_many(model, x[test]), lab[test]))
            if best_err is None or wrong < best_err:
                best, best_err = trial, wrong
    logger.info("grid search picked c=%g gamma=%g (%d CV errors)", best.c, best.gamma, best_err)
    return best
