"""Cannot-link constrained k-means on length-normalized vectors.

Unlike COP-style constrained k-means, the assignment pass here always
produces a labeling: when every centroid conflicts with an already
assigned cannot-link partner, the point takes the least-conflicting
centroid and the conflicting partners are queued for reassignment, so
the pass cannot dead-end.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array


def normalize_rows(x: np.ndarray) -> np.ndarray:
    """Scale each row to unit length; all-zero rows are left untouched."""
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return x / safe


def _pairwise_d2(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances via the expansion identity (no n*k*d temporaries)."""
    d2 = (
        (x * x).sum(axis=1)[:, None]
        - 2.0 * (x @ centers.T)
        + (centers * centers).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++ seeding: each new center is the best of several
    distance-weighted candidates, which makes double-seeding a tight
    cluster (and thereby splitting it) very unlikely."""
    n = x.shape[0]
    trials = 2 + int(np.log(k)) if k > 1 else 1
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = _pairwise_d2(x, centers[:1])[:, 0]
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            candidates = rng.integers(n, size=trials)
        else:
            candidates = rng.choice(n, size=trials, p=d2 / total)
        cand_d2 = _pairwise_d2(x, x[candidates])
        potentials = np.minimum(d2[:, None], cand_d2).sum(axis=0)
        best = int(np.argmin(potentials))
        centers[c] = x[candidates[best]]
        d2 = np.minimum(d2, cand_d2[:, best])
    return centers


class CLCKMeans(ClusterMixin, BaseEstimator):
    """K-means clustering that honors cannot-link constraints.

    Vectors are length-normalized before clustering, so squared Euclidean
    distance orders candidates the same way cosine similarity does.
    Centroids are plain means of the normalized members.

    Parameters
    ----------
    n_clusters : int
        Number of clusters to form.
    n_init : int
        Independent restarts; the labeling with the lowest inertia wins.
    max_iter : int
        Iteration cap per restart; each restart also stops at an
        assignment fixpoint.
    random_state : int or None
        Seeds the k-means++ initialization and the per-pass visit order.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
        Cluster id per sample; no cannot-link pair shares an id.
    cluster_centers_ : ndarray of shape (n_clusters, n_features)
    inertia_ : float
    n_iter_ : int
    """

    def __init__(self, n_clusters: int = 2, n_init: int = 4, max_iter: int = 100,
                 random_state=None):
        self.n_clusters = n_clusters
        self.n_init = n_init
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None, cannot_link=()):
        """Cluster X subject to cannot-link pairs (index tuples into X)."""
        X = check_array(X, dtype=np.float64)
        n = X.shape[0]
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be at least 1")
        if self.n_init < 1:
            raise ValueError("n_init must be at least 1")
        if self.n_clusters > n:
            raise ValueError(
                f"n_clusters={self.n_clusters} exceeds the {n} available samples"
            )
        partners: list[list[int]] = [[] for _ in range(n)]
        for i, j in cannot_link:
            if i == j:
                raise ValueError(f"cannot-link pair ({i}, {j}) is a self-pair")
            partners[i].append(j)
            partners[j].append(i)

        rng = np.random.default_rng(self.random_state)
        xn = normalize_rows(X)
        best = None
        for _ in range(self.n_init):
            labels, centers, inertia, n_iter = self._single_run(xn, partners, rng)
            if best is None or inertia < best[2]:
                best = (labels, centers, inertia, n_iter)
        self.labels_, self.cluster_centers_, self.inertia_, self.n_iter_ = best
        return self

    def _single_run(self, xn, partners, rng):
        n = xn.shape[0]
        centers = _kmeans_pp_init(xn, self.n_clusters, rng)
        labels = np.full(n, -1, dtype=np.intp)
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            new_labels = self._assign(xn, centers, partners, rng)
            for c in range(self.n_clusters):
                members = new_labels == c
                if members.any():
                    centers[c] = xn[members].mean(axis=0)
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
        inertia = float(((xn - centers[labels]) ** 2).sum())
        return labels, centers, inertia, n_iter

    def fit_predict(self, X, y=None, cannot_link=()):
        return self.fit(X, y, cannot_link=cannot_link).labels_

    def _assign(self, xn, centers, partners, rng):
        n, k = xn.shape[0], centers.shape[0]
        d2 = _pairwise_d2(xn, centers)
        ranked = np.argsort(d2, axis=1, kind="stable")
        labels = np.full(n, -1, dtype=np.intp)
        queue = deque(rng.permutation(n).tolist())
        budget = 4 * n + k
        while queue and budget > 0:
            budget -= 1
            i = queue.popleft()
            if labels[i] != -1:
                continue
            blocked = {labels[j] for j in partners[i] if labels[j] != -1}
            choice = next((c for c in ranked[i] if c not in blocked), None)
            if choice is None:
                # Every centroid conflicts: take the least-conflicting one
                # and evict the partners occupying it for reassignment.
                conflicts = np.zeros(k, dtype=np.intp)
                for j in partners[i]:
                    if labels[j] != -1:
                        conflicts[labels[j]] += 1
                choice = min(range(k), key=lambda c: (conflicts[c], d2[i, c]))
                for j in partners[i]:
                    if labels[j] == choice:
                        labels[j] = -1
                        queue.append(j)
            labels[i] = choice
        for i in np.nonzero(labels == -1)[0]:
            # Budget exhausted on a pathological constraint set: settle
            # without further evictions.
            blocked = {labels[j] for j in partners[i] if labels[j] != -1}
            choice = next((c for c in ranked[i] if c not in blocked), None)
            labels[i] = ranked[i][0] if choice is None else choice
        return labels
