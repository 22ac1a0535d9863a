"""Seeded toy data with joint and individual non-Gaussian structure.

Dataset X has image-like loadings (binary activation patches on a square grid) and
dataset Y has network-edge loadings (hub-and-community patterns packed as
lower triangles). Both share the joint subject scores ``M_J``::

    X = M_J D_x S_Jx + M_Ix S_Ix + noise_sd * M_Nx N_x
    Y = M_J D_y S_Jy + M_Iy S_Iy + noise_sd * M_Ny N_y
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .nongauss import jb_rows

__all__ = [
    "ToySpec",
    "ToyTruth",
    "generate_toy",
    "block_means",
    "vec_to_net",
    "net_to_vec",
    "image_loadings",
    "network_loadings",
    "loading_jb",
]

# block sign patterns of the score means; block sizes follow np.array_split
JOINT_MEANS = [(1, -1), (-1, 1)]
INDIV_MEANS_X = [(-1, 1, -1, 1), (1, -1, 1, -1)]
INDIV_MEANS_Y = [(-1, 1, -1, 1, -1, 1, -1, -1), (1, -1)]


@dataclass
class ToySpec:
    n: int = 48
    grid: int = 33
    nodes: int = 100
    r_j: int = 2
    r_ind: int = 2
    noise_sd: float = 1.0
    seed: int = 0
    d_x: tuple | None = None
    d_y: tuple | None = None

    @property
    def p_x(self):
        return self.grid * self.grid

    @property
    def p_y(self):
        return self.nodes * (self.nodes - 1) // 2

    def validate(self):
        if self.n < 4:
            raise InvalidInputError(f"n must be at least 4, got {self.n}")
        if self.r_j < 0 or self.r_ind < 0 or self.r_j + self.r_ind < 1:
            raise InvalidInputError("need r_j >= 0, r_ind >= 0 and at least one component")
        if self.r_j + self.r_ind > self.n - 2:
            raise InvalidInputError(f"r_j + r_ind must be <= n - 2 = {self.n - 2}")
        if self.grid < 4 or self.nodes < 4:
            raise InvalidInputError("grid and nodes must be at least 4")
        if self.noise_sd < 0:
            raise InvalidInputError("noise_sd must be nonnegative")
        for name in ("d_x", "d_y"):
            d = getattr(self, name)
            if d is not None and len(d) != self.r_j:
                raise InvalidInputError(f"{name} needs {self.r_j} entries")


@dataclass
class ToyTruth:
    M_j: np.ndarray
    M_ix: np.ndarray
    M_iy: np.ndarray
    S_jx: np.ndarray
    S_jy: np.ndarray
    S_ix: np.ndarray
    S_iy: np.ndarray
    D_x: np.ndarray
    D_y: np.ndarray


def block_means(pattern, n):
    """Piecewise-constant mean vector: ``pattern[k]`` on the k-th of ``len(pattern)`` blocks."""
    out = np.empty(n)
    for sign, idx in zip(pattern, np.array_split(np.arange(n), len(pattern))):
        out[idx] = sign
    return out


def vec_to_net(v, diag_value=np.nan):
    """Symmetric ``k x k`` matrix from its packed strict lower triangle.

    Entries are filled column by column below the diagonal: ``(1,0), (2,0),
    ..., (k-1,0), (2,1), ...``.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    m = v.size
    k = int(round((1 + np.sqrt(1 + 8 * m)) / 2))
    if k * (k - 1) // 2 != m or m == 0:
        raise InvalidInputError(f"length {m} is not a triangular number k(k-1)/2")
    # column-major lower triangle == row-major upper triangle of the transpose
    cols, rows = np.triu_indices(k, 1)
    net = np.zeros((k, k))
    net[rows, cols] = v
    net = net + net.T
    np.fill_diagonal(net, diag_value)
    return net


def net_to_vec(net):
    """Inverse of :func:`vec_to_net`."""
    net = np.asarray(net, dtype=np.float64)
    if net.ndim != 2 or net.shape[0] != net.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {net.shape}")
    cols, rows = np.triu_indices(net.shape[0], 1)
    return net[rows, cols]


def _standardize_rows(S):
    S = S - S.mean(axis=1, keepdims=True)
    sd = S.std(axis=1, keepdims=True)
    if np.any(sd == 0):
        raise InvalidInputError("a generated loading row is constant; increase grid or nodes")
    return S / sd


def _orthonormalize_rows(S):
    # symmetric orthogonalization: S S^T = p I with minimal change to S
    p = S.shape[1]
    vals, vecs = np.linalg.eigh(S @ S.T / p)
    return (vecs / np.sqrt(vals)) @ vecs.T @ S


SHAPES = ("disc", "square", "ring", "cross")


def _shape_mask(kind, dy, dx, size):
    if kind == "disc":
        return dy**2 + dx**2 <= size**2
    if kind == "square":
        return (np.abs(dy) <= 0.9 * size) & (np.abs(dx) <= 0.9 * size)
    if kind == "ring":
        d2 = dy**2 + dx**2
        return (d2 >= (0.6 * size) ** 2) & (d2 <= (1.2 * size) ** 2)
    if kind == "cross":
        bar = size / 3
        return ((np.abs(dy) <= bar) & (np.abs(dx) <= 1.3 * size)) | (
            (np.abs(dx) <= bar) & (np.abs(dy) <= 1.3 * size)
        )
    raise InvalidInputError(f"unknown shape {kind!r}")


def image_loadings(count, grid, rng):
    """Vectorized grid images, each one binary activation patch.

    Patches cycle through disc, square, ring and cross shapes and sit in
    distinct cells of a coarse lattice, so components do not overlap.
    """
    yy, xx = np.mgrid[0:grid, 0:grid]
    cells = max(3, int(np.ceil(np.sqrt(count))))
    step = grid / cells
    slots = rng.permutation(cells * cells)[:count]
    out = np.zeros((count, grid * grid))
    for i, slot in enumerate(slots):
        size = max(grid / 8.0, 1.0) * rng.uniform(0.85, 1.15)
        cy = (slot // cells + 0.5) * step + rng.uniform(-0.1, 0.1) * step
        cx = (slot % cells + 0.5) * step + rng.uniform(-0.1, 0.1) * step
        mask = _shape_mask(SHAPES[i % len(SHAPES)], yy - cy, xx - cx, size)
        if not mask.any():
            # thin shapes can miss every pixel on very small grids
            mask[min(int(cy), grid - 1), min(int(cx), grid - 1)] = True
        out[i] = mask.ravel().astype(np.float64)
    return out


def network_loadings(count, nodes, rng, n_communities=5, background=0.1):
    """Packed network loadings: a hub node's edges plus one community block.

    Nodes are split into ``n_communities`` contiguous communities. Each
    component lights up every edge of a hub node (a cross in matrix form)
    and the within-community block of a different community, over a weak
    Gaussian background.
    """
    community = np.repeat(np.arange(n_communities), -(-nodes // n_communities))[:nodes]
    hubs = rng.choice(nodes, size=count, replace=False)
    targets = np.resize(rng.permutation(n_communities), count)
    out = np.zeros((count, nodes * (nodes - 1) // 2))
    for i, (hub, target) in enumerate(zip(hubs, targets)):
        members = np.flatnonzero(community == target)
        net = np.zeros((nodes, nodes))
        net[hub, :] = 1.0
        net[:, hub] = 1.0
        net[np.ix_(members, members)] += 1.0
        np.fill_diagonal(net, 0.0)
        out[i] = net_to_vec(net) + background * rng.standard_normal(out.shape[1])
    return out


def _cycle(seq, k):
    return [seq[i % len(seq)] for i in range(k)]


def generate_toy(spec=None):
    """Simulate a pair of datasets with planted joint and individual components.

    Returns
    -------
    X : ndarray, shape (n, grid**2)
    Y : ndarray, shape (n, nodes*(nodes-1)/2)
    truth : ToyTruth
    """
    spec = ToySpec() if spec is None else spec
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, rj, ri = spec.n, spec.r_j, spec.r_ind
    rx = ry = rj + ri

    def scores(patterns):
        cols = [block_means(pat, n) + rng.standard_normal(n) for pat in patterns]
        return np.column_stack(cols) if cols else np.zeros((n, 0))

    M_j = scores(_cycle(JOINT_MEANS, rj))
    M_ix = scores(_cycle(INDIV_MEANS_X, ri))
    M_iy = scores(_cycle(INDIV_MEANS_Y, ri))
    D_x = np.asarray(spec.d_x if spec.d_x is not None else [1.0] * rj, dtype=np.float64)
    D_y = np.asarray(spec.d_y if spec.d_y is not None else _cycle([-5.0, 2.0], rj), dtype=np.float64)

    Sx = _orthonormalize_rows(_standardize_rows(image_loadings(rx, spec.grid, rng)))
    Sy = _orthonormalize_rows(_standardize_rows(network_loadings(ry, spec.nodes, rng)))

    def gaussian_part(S, r):
        k = n - r - 1
        p = S.shape[1]
        N = rng.standard_normal((k, p))
        N = N - N.mean(axis=1, keepdims=True)
        N = N - (N @ S.T) @ S / p
        M_n = rng.standard_normal((n, k))
        return M_n @ N

    X = M_j @ (D_x[:, None] * Sx[:rj]) + M_ix @ Sx[rj:]
    Y = M_j @ (D_y[:, None] * Sy[:rj]) + M_iy @ Sy[rj:]
    gx = gaussian_part(Sx, rx)
    gy = gaussian_part(Sy, ry)
    if spec.noise_sd > 0:
        X = X + spec.noise_sd * gx
        Y = Y + spec.noise_sd * gy

    truth = ToyTruth(
        M_j=M_j, M_ix=M_ix, M_iy=M_iy,
        S_jx=Sx[:rj], S_jy=Sy[:rj], S_ix=Sx[rj:], S_iy=Sy[rj:],
        D_x=D_x, D_y=D_y,
    )
    return X, Y, truth


def loading_jb(truth, alpha=0.8):
    """JB of every true loading row, keyed by block name."""
    return {name: jb_rows(getattr(truth, name), alpha)
            for name in ("S_jx", "S_jy", "S_ix", "S_iy") if getattr(truth, name).size}
