"""Synthetic 2-D Euclidean delay spaces.

Nodes live in the plane and the delay between two nodes is their Euclidean
distance, read in seconds. Node 0 is always the peercaster (stream source).

Three families of spaces are supported:

* ``flat`` — every coordinate drawn uniformly from (-D, D) with D = 0.25 s,
  so the worst-case pairwise delay is sqrt(2)/2 s.
* ``tight`` / ``loose`` — clustered spaces grown by a random walk: seed a
  cluster centre uniformly in (-D, D)^2, then repeatedly perturb the *current*
  position by a uniform step in (-d, d)^2 (perturbations accumulate) and
  record it; after each recorded node, with probability p jump to a fresh
  cluster seed. Tight clusters use d = 0.005, loose use d = 0.05, both with
  p = 0.01.

Clustered generation produces consecutive runs of nearby nodes, so the node
order is randomly permuted afterwards; the peercaster is whichever node lands
at index 0. Flat spaces are exchangeable already and are not shuffled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import make_rng

FLAT = "flat"
TIGHT = "tight"
LOOSE = "loose"
KINDS = (FLAT, TIGHT, LOOSE)

#: Half-width of the coordinate box, in seconds.
DEFAULT_D = 0.25
#: Per-step perturbation half-width for the clustered kinds.
CLUSTER_STEP = {TIGHT: 0.005, LOOSE: 0.05}
#: Probability of starting a new cluster after each recorded node.
DEFAULT_P = 0.01


@dataclass(frozen=True)
class DistributionSpec:
    """Parameters of a delay-space distribution.

    ``n`` is the total node count *including* the peercaster. ``d`` and ``p``
    are only meaningful for the clustered kinds and must be left at None for
    ``flat``.
    """

    kind: str
    n: int
    seed: int
    D: float = DEFAULT_D
    d: float | None = None
    p: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 1:
            raise ValueError("n must be at least 1 (the peercaster itself)")
        if not self.D > 0:
            raise ValueError("D must be positive")
        if self.kind == FLAT:
            if self.d is not None or self.p is not None:
                raise ValueError("flat spaces take no cluster parameters d/p")
        else:
            d = self.d if self.d is not None else CLUSTER_STEP[self.kind]
            p = self.p if self.p is not None else DEFAULT_P
            if not 0 < d < self.D:
                raise ValueError(f"cluster step d={d} must satisfy 0 < d < D={self.D}")
            if not 0 < p <= 1:
                raise ValueError(f"new-cluster probability p={p} must lie in (0, 1]")
            object.__setattr__(self, "d", d)
            object.__setattr__(self, "p", p)

    @classmethod
    def preset(cls, kind: str, n: int, seed: int) -> "DistributionSpec":
        """The standard parameterisation of ``kind`` at size ``n``."""
        return cls(kind=kind, n=n, seed=seed)


class DelaySpace:
    """An immutable set of node coordinates with Euclidean delay queries."""

    def __init__(self, coords: np.ndarray, kind: str = FLAT, cluster_count: int | None = None):
        coords = np.asarray(coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] < 1:
            raise ValueError("coords must be an (n, 2) array with n >= 1")
        coords = coords.copy()
        coords.flags.writeable = False
        self._coords = coords
        self.kind = kind
        #: Number of clusters the generator produced (None for flat spaces).
        self.cluster_count = cluster_count
        self._max_pairwise: float | None = None

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    @property
    def n_nodes(self) -> int:
        return self._coords.shape[0]

    def _check(self, i: int) -> None:
        if not 0 <= i < self.n_nodes:
            raise IndexError(f"node index {i} out of range for {self.n_nodes} nodes")

    def delay(self, i: int, j: int) -> float:
        """Delay between nodes ``i`` and ``j`` in seconds."""
        self._check(i)
        self._check(j)
        dx = self._coords[i, 0] - self._coords[j, 0]
        dy = self._coords[i, 1] - self._coords[j, 1]
        return float(np.hypot(dx, dy))

    def delays_from(self, i: int) -> np.ndarray:
        """Vector of delays from node ``i`` to every node (length n)."""
        self._check(i)
        diff = self._coords - self._coords[i]
        return np.hypot(diff[:, 0], diff[:, 1])

    def edge_delays(self, uploaders: np.ndarray, downloaders: np.ndarray) -> np.ndarray:
        """Delays for a batch of (uploader, downloader) pairs."""
        a = self._coords[uploaders]
        b = self._coords[downloaders]
        return np.hypot(a[:, 0] - b[:, 0], a[:, 1] - b[:, 1])

    def max_pairwise_delay(self) -> float:
        """Largest delay between any two nodes (the diameter of the point set)."""
        if self._max_pairwise is None:
            self._max_pairwise = _diameter(self._coords)
        return self._max_pairwise

    def to_csv(self, path) -> None:
        """Write the space as ``node,x,y`` rows, node 0 (the peercaster) first."""
        with open(path, "w", encoding="ascii", newline="\n") as f:
            f.write("node,x,y\n")
            for i in range(self.n_nodes):
                x = float(self._coords[i, 0])
                y = float(self._coords[i, 1])
                f.write(f"{i},{x!r},{y!r}\n")


def _pairwise_max(a: np.ndarray, b: np.ndarray) -> float:
    best = 0.0
    for start in range(0, a.shape[0], 1024):
        chunk = a[start : start + 1024]
        dx = chunk[:, None, 0] - b[None, :, 0]
        dy = chunk[:, None, 1] - b[None, :, 1]
        best = max(best, float(np.hypot(dx, dy).max()))
    return best


def _diameter(coords: np.ndarray) -> float:
    """Exact max pairwise distance; goes through the convex hull for large n.

    Every path uses np.hypot so the value is bit-identical regardless of
    which shortcut applies (the diameter's endpoints are always hull vertices).
    """
    n = coords.shape[0]
    if n == 1:
        return 0.0
    pts = coords
    if n > 2048:
        try:
            from scipy.spatial import ConvexHull

            pts = coords[ConvexHull(coords).vertices]
        except Exception:
            # Degenerate geometry (all nodes collinear, say): fall back to the
            # full pairwise computation.
            return _pairwise_max(coords, coords)
    return _pairwise_max(pts, pts)


def _generate_clustered(spec: DistributionSpec, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Run the clustered random walk; returns (coords in generation order, cluster count)."""
    coords = np.empty((spec.n, 2), dtype=np.float64)
    n_clusters = 0
    pos: np.ndarray | None = None
    for i in range(spec.n):
        if pos is None:
            pos = rng.uniform(-spec.D, spec.D, size=2)  # fresh cluster seed
            n_clusters += 1
        pos = pos + rng.uniform(-spec.d, spec.d, size=2)  # walk accumulates
        coords[i] = pos
        if rng.random() < spec.p:
            pos = None
    return coords, n_clusters


def generate(spec: DistributionSpec) -> DelaySpace:
    """Generate the delay space described by ``spec``.

    Deterministic in ``spec.seed``: the coordinate stream and the shuffle
    stream are derived separately (see :mod:`p2pcast.rng`).
    """
    rng = make_rng(spec.seed, "delay_space", spec.kind, "coords")
    if spec.kind == FLAT:
        coords = rng.uniform(-spec.D, spec.D, size=(spec.n, 2))
        return DelaySpace(coords, kind=FLAT)
    coords, n_clusters = _generate_clustered(spec, rng)
    shuffle_rng = make_rng(spec.seed, "delay_space", spec.kind, "shuffle")
    perm = shuffle_rng.permutation(spec.n)
    return DelaySpace(coords[perm], kind=spec.kind, cluster_count=n_clusters)
