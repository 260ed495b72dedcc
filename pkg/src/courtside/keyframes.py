"""Keyframe selection: k-means pseudo-labels, shrinkage LDA, nearest-to-center picks.

Also hosts the uniform and colour-histogram baselines and the 2-D PCA export
used to plot the fused feature space.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import features as feat
from .errors import DegenerateLabels, DegenerateLabelsWarning, TooFewSamples
from .rng import PortableRNG, derive_seed
from .wavelet import haar_ll, motion_map, motion_to_3channel

logger = logging.getLogger(__name__)

DWT_LDA = "dwt-lda"
UNIFORM = "uniform"
COLOR_HISTOGRAM = "color-histogram"
METHODS = (DWT_LDA, UNIFORM, COLOR_HISTOGRAM)

MAX_ITER = 300
TIE_RTOL = 1e-9


def _rows(F):
    return np.asarray(F.rows if hasattr(F, "rows") else F, dtype=np.float64)


# ---------------------------------------------------------------- k-means


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    seed: int
    n_iter: int = 0
    inertia_history: list = field(default_factory=list)
    degenerate: bool = False


def _sq_dists(X, C):
    # (n, k) squared distances, explicit differences for exactness on duplicates
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def kmeans_pp_init(X, k, rng: PortableRNG):
    n = X.shape[0]
    chosen = [rng.randbelow(n)]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        idx = rng.choice_weighted(d2)
        if idx < 0:
            # every remaining point coincides with a centroid
            free = [i for i in range(n) if i not in chosen]
            idx = free[rng.randbelow(len(free))]
        chosen.append(idx)
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return X[chosen].copy()


def _repair_empty(X, labels, centroids, k):
    """Give each empty cluster the farthest member of the current largest cluster."""
    repaired = False
    degenerate = False
    for j in range(k):
        if np.any(labels == j):
            continue
        counts = np.bincount(labels, minlength=k)
        big = int(np.argmax(counts))  # lowest id among ties
        members = np.flatnonzero(labels == big)
        d = ((X[members] - centroids[big]) ** 2).sum(axis=1)
        far = members[int(np.argmax(d))]  # lowest frame among ties
        if d.max() == 0.0:
            degenerate = True
        labels[far] = j
        centroids[j] = X[far]
        repaired = True
    return repaired, degenerate


def kmeans(F, k: int, seed: int = 0, max_iter: int = MAX_ITER) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding from the portable RNG.

    Stops at an assignment fixpoint or after ``max_iter`` rounds. Distance ties
    go to the lowest cluster id.
    """
    X = _rows(F)
    n = X.shape[0]
    if k < 1:
        raise ValueError("k must be positive")
    if n < k:
        raise TooFewSamples(f"{n} rows cannot form {k} clusters")
    rng = PortableRNG(seed)
    centroids = kmeans_pp_init(X, k, rng)
    labels = None
    history = []
    degenerate = False
    it = 0
    for it in range(1, max_iter + 1):
        new = np.argmin(_sq_dists(X, centroids), axis=1)
        _, degen = _repair_empty(X, new, centroids, k)
        degenerate = degenerate or degen
        for j in range(k):
            centroids[j] = X[new == j].mean(axis=0)
        inertia = float(((X - centroids[new]) ** 2).sum())
        history.append(inertia)
        if labels is not None and np.array_equal(new, labels):
            labels = new
            break
        labels = new
    if len({tuple(c) for c in centroids}) < k:
        degenerate = True
    return ClusterModel(k, centroids, labels, history[-1], seed, it, history, degenerate)


# ---------------------------------------------------------------- LDA


@dataclass
class LdaProjection:
    basis: np.ndarray
    class_means_projected: np.ndarray
    shrinkage: float
    mean: np.ndarray
    classes: np.ndarray
    eigenvalues: np.ndarray
    fallback: Optional[str] = None

    def transform(self, F):
        return (_rows(F) - self.mean) @ self.basis


def _scatter_parts(X, labels):
    classes = np.unique(labels)
    mu = X.mean(axis=0)
    within = np.empty_like(X)
    M = np.empty((X.shape[1], len(classes)))
    for j, c in enumerate(classes):
        idx = labels == c
        mu_c = X[idx].mean(axis=0)
        within[idx] = X[idx] - mu_c
        M[:, j] = np.sqrt(idx.sum()) * (mu_c - mu)
    return classes, mu, within, M


def _regularizer(within, shrinkage):
    d = within.shape[1]
    tr = float((within ** 2).sum())
    alpha = shrinkage * tr / d
    if alpha <= 0.0:
        # S_w is zero (every row sits on its class mean); any multiple of I works
        alpha = 1.0
    return alpha


def regularized_within_solve(within, alpha, B):
    """Solve (alpha*I + W^T W) Z = B, picking the cheaper route.

    With more columns than rows the Woodbury identity reduces the work to an
    n x n system.
    """
    n, d = within.shape
    if d <= n:
        Sw = within.T @ within + alpha * np.eye(d)
        return np.linalg.solve(Sw, B)
    small = alpha * np.eye(n) + within @ within.T
    return (B - within.T @ np.linalg.solve(small, within @ B)) / alpha


def lda_fit(F, labels, shrinkage: float = 0.1) -> LdaProjection:
    """Shrinkage LDA on pseudo-labels.

    Solves the generalized eigenproblem of S_b against
    S_w + shrinkage * trace(S_w) / d * I and keeps up to
    min(classes - 1, rank(S_b)) directions. When S_b vanishes the leading
    principal direction is used instead (with a warning).
    """
    X = _rows(F)
    labels = np.asarray(labels)
    if not 0.0 <= shrinkage <= 1.0:
        raise ValueError("shrinkage must lie in [0, 1]")
    classes = np.unique(labels)
    if len(classes) < 2:
        raise DegenerateLabels("LDA needs at least two distinct labels")
    classes, mu, within, M = _scatter_parts(X, labels)
    alpha = _regularizer(within, shrinkage)
    SinvM = regularized_within_solve(within, alpha, M)
    small = M.T @ SinvM
    small = 0.5 * (small + small.T)
    evals, evecs = np.linalg.eigh(small)
    order = np.argsort(-evals, kind="stable")
    evals, evecs = evals[order], evecs[:, order]
    top = evals[0] if evals.size else 0.0
    keep = [i for i, v in enumerate(evals) if v > 1e-10 * max(top, 1e-300) and v > 1e-12]
    keep = keep[: len(classes) - 1]
    fallback = None
    if not keep:
        warnings.warn("between-class scatter is zero; falling back to PCA",
                      DegenerateLabelsWarning, stacklevel=2)
        basis = _principal_axes(X - mu, 1)
        fallback = "pca"
        kept_vals = np.zeros(1)
    else:
        basis = SinvM @ evecs[:, keep]
        basis = basis / np.linalg.norm(basis, axis=0, keepdims=True)
        basis = _fix_signs(basis)
        kept_vals = evals[keep]
    proj = (X - mu) @ basis
    cmeans = np.vstack([proj[labels == c].mean(axis=0) for c in classes])
    return LdaProjection(basis, cmeans, shrinkage, mu, classes, kept_vals, fallback)


def _fix_signs(basis):
    # largest-magnitude loading of every column is made positive
    for j in range(basis.shape[1]):
        col = basis[:, j]
        i = int(np.argmax(np.abs(col)))
        if col[i] < 0:
            basis[:, j] = -col
    return basis


def _principal_axes(Xc, n_components):
    d = Xc.shape[1]
    if not np.any(Xc):
        basis = np.zeros((d, n_components))
        for j in range(min(n_components, d)):
            basis[j, j] = 1.0
        return basis
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    basis = np.zeros((d, n_components))
    for j in range(min(n_components, vt.shape[0])):
        if s[j] > 1e-12 * s[0]:
            basis[:, j] = vt[j]
    return _fix_signs(basis)


# ---------------------------------------------------------------- selection


@dataclass
class KeyframeSet:
    indices: list
    cluster_of: dict
    distance_of: dict
    method: str
    k: int
    clip_id: str = ""
    degenerate: bool = False

    def to_dict(self):
        return {
            "clip_id": self.clip_id,
            "method": self.method,
            "k": self.k,
            "indices": [int(i) for i in self.indices],
            "degenerate": bool(self.degenerate),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def padded_indices(self, length: int = 16) -> list:
        """Indices padded to ``length`` by repeating the last keyframe."""
        idx = list(self.indices)
        if not idx:
            return idx
        return idx + [idx[-1]] * max(0, length - len(idx))


def select_keyframes(projected, labels, k: int, frame_indices=None,
                     method: str = DWT_LDA) -> KeyframeSet:
    """Per cluster, the member nearest to the cluster mean in ``projected`` space.

    Ties (distances within ``TIE_RTOL`` of the cluster's largest distance) go to
    the lowest frame index; the result is sorted by frame index.
    """
    P = np.asarray(projected, dtype=np.float64)
    if P.ndim == 1:
        P = P[:, None]
    labels = np.asarray(labels)
    if frame_indices is None:
        frame_indices = np.arange(P.shape[0])
    frame_indices = np.asarray(frame_indices)
    cluster_of, distance_of = {}, {}
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        center = P[members].mean(axis=0)
        dist = np.sqrt(((P[members] - center) ** 2).sum(axis=1))
        # distances equal up to rounding count as ties (a two-member cluster
        # is an exact tie that float arithmetic would otherwise split)
        tol = TIE_RTOL * float(dist.max())
        dmin = float(dist.min())
        fi, dv = min((int(frame_indices[m]), float(d))
                     for m, d in zip(members, dist) if d <= dmin + tol)
        best = (fi, dv)
        cluster_of[best[0]] = int(c)
        distance_of[best[0]] = best[1]
    indices = sorted(cluster_of)
    return KeyframeSet(indices, cluster_of, distance_of, method, k,
                       degenerate=len(indices) < k)


@dataclass
class KeyframeResult:
    """Everything computed on the way to a :class:`KeyframeSet`."""

    keyframes: KeyframeSet
    fused: feat.FusedFeatureMatrix
    standardized: np.ndarray
    clusters: ClusterModel
    lda: Optional[LdaProjection]
    projected: np.ndarray


def fused_features(seq, backbone=None, motion_backbone=None, level: int = 2):
    """Appearance + motion features for every sampled frame, fused.

    The first frame gets the features of a zero-motion (mid-gray) image so
    that all N frames remain selectable.
    """
    backbone = backbone or feat.BuiltinDescriptor()
    motion_backbone = motion_backbone or backbone
    fa = feat.extract_appearance(seq, backbone)
    approx = [haar_ll(f.gray, level, pos) for pos, f in enumerate(seq)]
    indices = seq.indices
    if len(seq) > 1:
        images = [motion_to_3channel(motion_map(a, b)) for a, b in zip(approx, approx[1:])]
        fm = feat.extract_motion(images, motion_backbone, indices[1:])
    else:
        fm = feat.FeatureMatrix(np.zeros((0, motion_backbone.output_dim)), (), feat.MOTION)
    zero = feat._run(motion_backbone, feat.zero_motion_image(approx[0].ll.shape), 0, indices[0])
    fa, fm = feat.align_paths(fa, fm, zero_motion_row=zero)
    return feat.fuse(fa, fm)


def extract_keyframes(seq, k: int = 16, backbone=None, seed: int = 0,
                      shrinkage: float = 0.1, motion_backbone=None,
                      scaling: str = "robust") -> KeyframeResult:
    """Full DWT + descriptor + k-means + LDA keyframe pipeline on a sampled sequence.

    ``scaling`` picks the per-column standardization applied before
    clustering: ``robust`` (median/IQR, default), ``zscore`` or ``none``.
    """
    n = len(seq)
    if n < k:
        raise TooFewSamples(f"{n} sampled frames, need at least k={k}")
    if scaling not in feat.SCALERS:
        raise ValueError(f"unknown scaling {scaling!r}")
    fused = fused_features(seq, backbone, motion_backbone)
    Z = feat.SCALERS[scaling](fused.rows)
    model = kmeans(Z, k, derive_seed(seed, "kmeans"))
    labels = model.assignments
    lda = None
    if len(np.unique(labels)) >= 2:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateLabelsWarning)
            lda = lda_fit(Z, labels, shrinkage)
        projected = lda.transform(Z)
    else:
        projected = np.zeros((n, 1))
    ks = select_keyframes(projected, labels, k, fused.frame_indices, DWT_LDA)
    ks.clip_id = seq.clip_id
    ks.degenerate = ks.degenerate or model.degenerate
    return KeyframeResult(ks, fused, Z, model, lda, projected)


# ---------------------------------------------------------------- baselines


def uniform_sample(n: int, k: int, frame_indices=None) -> KeyframeSet:
    if k < 1:
        raise ValueError("k must be positive")
    if n < k:
        raise TooFewSamples(f"{n} frames, need at least k={k}")
    pos = [(i * n) // k for i in range(k)]
    idx = pos if frame_indices is None else [int(frame_indices[p]) for p in pos]
    return KeyframeSet(idx, {}, {}, UNIFORM, k)


def color_histograms(seq, bins: int = 16) -> np.ndarray:
    """Per-frame concatenated R, G, B histograms, each normalized to sum 1."""
    rows = []
    for f in seq:
        v = np.clip(np.rint(f.rgb), 0, 255).astype(np.int64)
        parts = []
        for ch in range(3):
            counts = np.bincount(((v[..., ch] * bins) // 256).ravel(), minlength=bins)[:bins]
            parts.append(counts / counts.sum())
        rows.append(np.concatenate(parts))
    return np.vstack(rows)


def color_histogram_sample(seq, k: int, bins: int = 16, seed: int = 0) -> KeyframeSet:
    n = len(seq)
    if n < k:
        raise TooFewSamples(f"{n} frames, need at least k={k}")
    H = color_histograms(seq, bins)
    model = kmeans(H, k, derive_seed(seed, "color-histogram"))
    ks = select_keyframes(H, model.assignments, k, seq.indices, COLOR_HISTOGRAM)
    ks.clip_id = seq.clip_id
    ks.degenerate = ks.degenerate or model.degenerate
    return ks


# ---------------------------------------------------------------- PCA export


PCA_HEADER = ("frame", "pc1", "pc2", "cluster", "keyframe")


def emit_pca_projection(F, labels, keyframes: KeyframeSet, frame_indices=None) -> list:
    """Rows of (frame, pc1, pc2, cluster, keyframe) on the top-2 principal axes."""
    X = _rows(F)
    if X.shape[0] == 0:
        raise ValueError("empty feature matrix")
    if frame_indices is None:
        frame_indices = getattr(F, "frame_indices", range(X.shape[0]))
    Xc = X - X.mean(axis=0)
    if np.any(Xc):
        axes = _principal_axes(Xc, 2)
        pcs = Xc @ axes
    else:
        pcs = np.zeros((X.shape[0], 2))
    chosen = set(int(i) for i in keyframes.indices)
    return [
        (int(fi), float(p[0]), float(p[1]), int(c), int(fi) in chosen)
        for fi, p, c in zip(frame_indices, pcs, labels)
    ]


def pca_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PCA_HEADER)
    for fi, p1, p2, c, kf in rows:
        w.writerow([fi, repr(p1), repr(p2), c, int(kf)])
    return buf.getvalue()
