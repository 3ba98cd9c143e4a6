"""Inter-block speaker correspondence for offline inference.

Relative speaker embeddings from all blocks are compared through a
hinge-scaled affinity matrix; the number of speakers is read off the
eigenvalue ratios of that matrix; cannot-link constrained k-means then
groups the embeddings, and per-block posteriors are stitched into one
recording-level posterior matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import normalize_rows
from .types import RelativeEmbedding, as_float_matrix

# Posterior value filled in for a speaker over blocks where it has no
# local attractor; stays inside (0, 1) and binarizes to silence.
INACTIVE_FILL = 1e-6


@dataclass
class AffinityMatrix:
    """Symmetric affinity between relative embeddings, with provenance.

    ``block_index[i]`` and ``local_index[i]`` identify where row i's
    embedding came from, so same-block pairs can be recovered.
    """

    matrix: np.ndarray
    block_index: np.ndarray
    local_index: np.ndarray

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def cannot_link_pairs(self) -> list[tuple[int, int]]:
        """All (i, j) index pairs whose embeddings share a block."""
        pairs = []
        n = len(self)
        for i in range(n):
            for j in range(i + 1, n):
                if self.block_index[i] == self.block_index[j]:
                    pairs.append((i, j))
        return pairs


def build_affinity(relatives: list[RelativeEmbedding], margin: float = 0.5) -> AffinityMatrix:
    """Hinge-scaled cosine affinity with same-block pairs forced to zero.

    Entry (i, j) is 1 on the diagonal, 0 for distinct same-block
    embeddings, and otherwise max(cos - margin, 0) / (1 - margin), which
    keeps every entry in [0, 1].
    """
    if not 0.0 <= margin < 1.0:
        raise ValueError("margin must lie in [0, 1)")
    n = len(relatives)
    if n == 0:
        return AffinityMatrix(np.zeros((0, 0)), np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp))
    vectors = normalize_rows(np.stack([r.vector for r in relatives]))
    blocks = np.asarray([r.block_index for r in relatives], dtype=np.intp)
    locals_ = np.asarray([r.local_index for r in relatives], dtype=np.intp)
    cos = vectors @ vectors.T
    affinity = np.maximum(cos - margin, 0.0) / (1.0 - margin)
    same_block = blocks[:, None] == blocks[None, :]
    affinity[same_block] = 0.0
    np.fill_diagonal(affinity, 1.0)
    # Mirror the upper triangle so the matrix is exactly symmetric.
    upper = np.triu(affinity)
    affinity = upper + np.triu(affinity, 1).T
    return AffinityMatrix(affinity, blocks, locals_)


def eigenvalues_desc(matrix) -> np.ndarray:
    """Full real spectrum of a symmetric matrix, sorted descending.

    The hinge-scaled affinity is not positive semidefinite, so negative
    eigenvalues are legitimate output.
    """
    m = as_float_matrix(matrix, "affinity")
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got {m.shape}")
    if m.size == 0:
        return np.zeros(0)
    if not np.allclose(m, m.T, atol=1e-10):
        raise ValueError("matrix must be symmetric")
    return np.linalg.eigvalsh(m)[::-1].copy()


# A speaker appearing in a single block yields an affinity eigenvalue of
# exactly 1; the qualifier below must not drop it to rounding error.
_QUALIFIER_TOLERANCE = 1e-6


def count_by_eigenratio(eigenvalues) -> int:
    """Speaker count from the smallest eigenvalue ratio.

    Among indices s with eigenvalue[s] >= 1, pick the s minimizing
    eigenvalue[s+1] / eigenvalue[s]; negative numerators are floored at
    zero.  With a single eigenvalue, or none qualifying, the count is 1:
    any embedding at all implies at least one speaker.
    """
    eigs = np.asarray(eigenvalues, dtype=np.float64).reshape(-1)
    if eigs.size == 0:
        raise ValueError("need at least one eigenvalue")
    best_s, best_ratio = None, np.inf
    for s in range(eigs.size - 1):
        if eigs[s] < 1.0 - _QUALIFIER_TOLERANCE:
            break
        ratio = max(eigs[s + 1], 0.0) / eigs[s]
        if ratio < best_ratio:
            best_s, best_ratio = s + 1, ratio
    return 1 if best_s is None else best_s


def clamp_count(estimate: int, block_counts) -> int:
    """Raise the estimate to the largest per-block speaker count.

    Guarantees that clustering with cannot-link constraints between
    same-block attractors always has a solution.
    """
    counts = list(block_counts)
    if not counts:
        return int(estimate)
    return max(int(estimate), max(counts))


def stitch(
    blocks,
    assignments,
    num_clusters: int,
    num_frames: int,
    fill: float = INACTIVE_FILL,
) -> np.ndarray:
    """Assemble per-block posteriors into one recording-level matrix.

    ``blocks`` is a list of (start, stop, posterior) with posterior shaped
    (local speakers x stop - start); ``assignments[l][r]`` maps local row
    r of block l to its cluster id.  Cells where a cluster has no local
    attractor in a block get the inactive ``fill`` value.
    """
    if len(blocks) != len(assignments):
        raise ValueError("blocks and assignments must have equal length")
    out = np.full((num_clusters, num_frames), fill, dtype=np.float64)
    for (start, stop, posterior), rows in zip(blocks, assignments):
        posterior = np.asarray(posterior, dtype=np.float64)
        if posterior.ndim != 2 or posterior.shape[1] != stop - start:
            raise ValueError(
                f"posterior of block [{start}, {stop}) has shape {posterior.shape}"
            )
        if len(rows) != posterior.shape[0]:
            raise ValueError(
                f"block [{start}, {stop}) has {posterior.shape[0]} local rows "
                f"but {len(rows)} assignments"
            )
        for r, cluster in enumerate(rows):
            if not 0 <= cluster < num_clusters:
                raise ValueError(f"cluster id {cluster} out of range")
            out[cluster, start:stop] = posterior[r]
    return out


def fuse_global_local(global_result, local_result, global_count: int, trained_cap: int = 4):
    """Pick one of the two inference results based on the global count.

    Below the trained speaker cap the supervised global estimate is the
    better one; at or above the cap only the clustered local estimate can
    represent every speaker.  The chosen input is returned as-is.
    """
    if global_count < trained_cap:
        return global_result
    return local_result
