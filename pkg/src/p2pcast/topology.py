"""Feasible overlay construction for multi-substream live streaming.

The stream is split into M substreams; a topology assigns every peer exactly
M incoming connections (with repetition allowed: the same uploader may carry
several substreams for the same downloader), never lets a node upload more
than its capacity, and must leave M edge-disjoint paths from the peercaster
(node 0) to every peer.

Construction follows a spare-bandwidth admission argument. With F tracking
the spare upload capacity of the connected part of the network (initially
``u_0 - M``), any unadmitted peer i with ``u_i + F >= M`` can be admitted:
it receives exactly M connections from connected peers with residual
capacity, after which ``F := F + u_i - M``. Keeping F non-negative keeps the
whole construction feasible by induction.

A policy is a triple:

* ordering — ``growing`` admits peers in arrival (index) order, deferring any
  peer that fails the spare-capacity guard until capacity recovers;
  ``fixed`` knows all peers up front and picks the guard-passing peer with the
  best score.
* score — ``random``, ``closest`` (argmin over eligible uploaders j of
  delay(i, j)) or ``least_delay`` (argmin of d_j + delay(i, j), where d_j is
  j's delay from the peercaster through the overlay).
* diversity — how the M uploads are spread: ``none`` repeats the raw argmin,
  ``diverse`` adds a transient penalty L = n * max-pairwise-delay to an
  uploader's score each time it is picked within the current round, and
  ``small_world`` uses the diverse rule for M-1 picks and chooses the final
  uploader uniformly at random.

Random-score policies exist in one diversity mode only, giving 14 policies in
total: FR, GR, and the fixed/growing x closest/least-delay x
diverse/none/small-world grid.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass

import numpy as np

from .delay_space import DelaySpace
from .rng import make_rng

FIXED = "fixed"
GROWING = "growing"
RANDOM = "random"
CLOSEST = "closest"
LEAST_DELAY = "least_delay"
NONE = "none"
DIVERSE = "diverse"
SMALL_WORLD = "small_world"

_SCORE_CODE = {CLOSEST: "C", LEAST_DELAY: "D"}
_DIVERSITY_CODE = {DIVERSE: "D", NONE: "N", SMALL_WORLD: "S"}
_CODE_SCORE = {v: k for k, v in _SCORE_CODE.items()}
_CODE_DIVERSITY = {v: k for k, v in _DIVERSITY_CODE.items()}

#: Every expressible policy, in canonical order.
ALL_POLICY_CODES = (
    "FR", "GR",
    "FCD", "FCN", "FCS", "FDD", "FDN", "FDS",
    "GCD", "GCN", "GCS", "GDD", "GDN", "GDS",
)


class TopologyBuildError(Exception):
    """Base class for construction failures."""


class AdmissionStuck(TopologyBuildError):
    """No unadmitted peer passes the spare-capacity guard ``u_i + F >= M``."""

    def __init__(self, stuck: tuple[int, ...], f: int, m: int):
        self.stuck = tuple(int(i) for i in stuck)
        self.F = int(f)
        super().__init__(
            f"admission stuck with F={f}: no remaining peer has u_i + F >= {m}; "
            f"unadmitted peers: {list(self.stuck)}"
        )


class CapacityExhausted(TopologyBuildError):
    """Fewer than M upload units remain among connected peers (should be
    unreachable when the admission guard is respected)."""


@dataclass(frozen=True)
class PolicySpec:
    """One of the 14 construction policies."""

    ordering: str
    score: str
    diversity: str = NONE

    def __post_init__(self) -> None:
        if self.ordering not in (FIXED, GROWING):
            raise ValueError(f"unknown ordering {self.ordering!r}")
        if self.score not in (RANDOM, CLOSEST, LEAST_DELAY):
            raise ValueError(f"unknown score {self.score!r}")
        if self.diversity not in (NONE, DIVERSE, SMALL_WORLD):
            raise ValueError(f"unknown diversity mode {self.diversity!r}")
        if self.score == RANDOM and self.diversity != NONE:
            raise ValueError("random-score policies admit only the plain diversity mode")

    @property
    def code(self) -> str:
        head = "F" if self.ordering == FIXED else "G"
        if self.score == RANDOM:
            return head + "R"
        return head + _SCORE_CODE[self.score] + _DIVERSITY_CODE[self.diversity]

    @classmethod
    def from_code(cls, code: str) -> "PolicySpec":
        c = code.strip().upper()
        ordering = {"F": FIXED, "G": GROWING}.get(c[:1])
        if ordering is not None and len(c) == 2 and c[1] == "R":
            return cls(ordering, RANDOM, NONE)
        if (
            ordering is not None
            and len(c) == 3
            and c[1] in _CODE_SCORE
            and c[2] in _CODE_DIVERSITY
        ):
            return cls(ordering, _CODE_SCORE[c[1]], _CODE_DIVERSITY[c[2]])
        raise ValueError(f"unknown policy code {code!r}; expected one of {ALL_POLICY_CODES}")


@dataclass(frozen=True)
class CapacityProfile:
    """Upload capacities u_i, in connection units, for every node."""

    u: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=np.int64).copy()
        if u.ndim != 1 or u.shape[0] < 1:
            raise ValueError("u must be a one-dimensional array with at least one entry")
        if (u < 0).any():
            raise ValueError("upload capacities must be non-negative")
        u.flags.writeable = False
        object.__setattr__(self, "u", u)

    @property
    def n_nodes(self) -> int:
        return int(self.u.shape[0])

    @classmethod
    def sample(
        cls,
        n_nodes: int,
        rng: np.random.Generator,
        choices: tuple[int, ...] = (1, 5, 10, 16),
        u0: int = 16,
    ) -> "CapacityProfile":
        """Draw peer capacities uniformly from ``choices``; the peercaster gets ``u0``."""
        u = rng.choice(np.asarray(choices, dtype=np.int64), size=n_nodes)
        u[0] = u0
        return cls(u)


class Topology:
    """A built overlay: multigraph edges plus leftover upload capacity.

    ``edges`` maps (uploader, downloader) to the connection multiplicity.
    Treat instances as immutable once built.
    """

    def __init__(self, n_nodes: int, edges: dict[tuple[int, int], int], residual_u: np.ndarray):
        self.n_nodes = int(n_nodes)
        self.edges = edges
        residual_u = np.asarray(residual_u, dtype=np.int64).copy()
        residual_u.flags.writeable = False
        self.residual_u = residual_u

    def in_multiplicity(self) -> np.ndarray:
        m = np.zeros(self.n_nodes, dtype=np.int64)
        for (_, dl), c in self.edges.items():
            m[dl] += c
        return m

    def out_multiplicity(self) -> np.ndarray:
        m = np.zeros(self.n_nodes, dtype=np.int64)
        for (ul, _), c in self.edges.items():
            m[ul] += c
        return m

    def upload_capacity(self) -> np.ndarray:
        """Reconstruct u from residuals and realised uploads."""
        return self.residual_u + self.out_multiplicity()

    def to_csv(self, edges_path, caps_path=None) -> None:
        """Write ``uploader,downloader,multiplicity`` rows (sorted by pair).

        When ``caps_path`` is given, a capacity sidecar ``node,u,residual_u``
        is written next to it.
        """
        with open(edges_path, "w", encoding="ascii", newline="\n") as f:
            f.write("uploader,downloader,multiplicity\n")
            for (ul, dl) in sorted(self.edges):
                f.write(f"{ul},{dl},{self.edges[(ul, dl)]}\n")
        if caps_path is not None:
            u = self.upload_capacity()
            with open(caps_path, "w", encoding="ascii", newline="\n") as f:
                f.write("node,u,residual_u\n")
                for i in range(self.n_nodes):
                    f.write(f"{i},{int(u[i])},{int(self.residual_u[i])}\n")


def read_topology_csv(edges_path, caps_path) -> tuple[Topology, CapacityProfile]:
    """Read a topology written by :meth:`Topology.to_csv` (both files)."""
    import csv

    with open(caps_path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != ["node", "u", "residual_u"]:
            raise ValueError(f"unexpected capacity header in {caps_path}: {reader.fieldnames}")
        rows = [(int(r["node"]), int(r["u"]), int(r["residual_u"])) for r in reader]
    rows.sort()
    if [r[0] for r in rows] != list(range(len(rows))):
        raise ValueError(f"capacity file {caps_path} must list every node exactly once")
    u = np.array([r[1] for r in rows], dtype=np.int64)
    residual = np.array([r[2] for r in rows], dtype=np.int64)

    edges: dict[tuple[int, int], int] = {}
    with open(edges_path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != ["uploader", "downloader", "multiplicity"]:
            raise ValueError(f"unexpected edge header in {edges_path}: {reader.fieldnames}")
        for r in reader:
            key = (int(r["uploader"]), int(r["downloader"]))
            if not (0 <= key[0] < len(rows) and 0 <= key[1] < len(rows)):
                raise ValueError(f"edge {key} references a node outside the capacity file")
            edges[key] = edges.get(key, 0) + int(r["multiplicity"])
    return Topology(len(rows), edges, residual), CapacityProfile(u)


class BuildState:
    """Mutable state of one construction run. Internal to :func:`build`;
    exposed so the admission steps can be driven and inspected one at a time.
    """

    def __init__(
        self,
        space: DelaySpace,
        caps: CapacityProfile,
        policy: PolicySpec,
        m: int = 4,
        seed: int = 0,
    ):
        n = space.n_nodes
        if caps.n_nodes != n:
            raise ValueError(f"capacity profile covers {caps.n_nodes} nodes, space has {n}")
        if m < 1:
            raise ValueError("M must be at least 1")
        if n < 2:
            raise ValueError("need at least one peer besides the peercaster")
        if int(caps.u[0]) < m:
            raise ValueError(f"peercaster capacity u_0={int(caps.u[0])} is below M={m}")

        self.space = space
        self.policy = policy
        self.M = int(m)
        self.n = n
        self.u = caps.u.astype(np.int64)
        self.residual = self.u.copy()
        self.rng = make_rng(seed, "build")  # policy-independent label: FR and GR share streams

        self.F = int(self.u[0]) - self.M
        self.d = np.full(n, np.inf)
        self.d[0] = 0.0
        self.edges: dict[tuple[int, int], int] = {}

        # Connected ids in admission order, as a growing prefix of a buffer so
        # uploader scoring can slice it without copying.
        self._conn_buf = np.empty(n, dtype=np.int64)
        self._conn_buf[0] = 0
        self.n_connected = 1
        self.unadmitted_mask = np.ones(n, dtype=bool)
        self.unadmitted_mask[0] = False

        # Random-score policies admit in arrival order through the growing
        # path; this makes FR and GR produce identical topologies under the
        # same seed (they are the same procedure).
        self._arrival_order = policy.ordering == GROWING or policy.score == RANDOM
        self.pending: deque[int] | None = deque(range(1, n)) if self._arrival_order else None

        # Fixed scored policies keep a best-eligible-uploader cache per
        # unadmitted peer, invalidated when the cached uploader exhausts.
        self._best_score: np.ndarray | None = None
        self._best_up: np.ndarray | None = None
        if not self._arrival_order:
            base = space.delays_from(0)  # d[0] == 0, so closest == least_delay here
            self._best_score = base.copy()
            self._best_score[0] = np.inf
            self._best_up = np.zeros(n, dtype=np.int64)

        self._penalty: float | None = None

    # -- helpers ---------------------------------------------------------

    @property
    def connected_ids(self) -> np.ndarray:
        """Connected nodes in admission order (peercaster first)."""
        return self._conn_buf[: self.n_connected]

    def done(self) -> bool:
        return self.n_connected == self.n

    def _diversity_penalty(self) -> float:
        if self._penalty is None:
            self._penalty = self.n * self.space.max_pairwise_delay()
        return self._penalty

    def _guard(self, i: int) -> bool:
        return int(self.u[i]) + self.F >= self.M

    # -- admission steps -------------------------------------------------

    def select_next_peer(self) -> int:
        """The next peer to admit under the policy. Raises AdmissionStuck if
        nobody passes the spare-capacity guard."""
        if self._arrival_order:
            assert self.pending is not None
            for i in self.pending:  # index order; failed peers stay queued
                if self._guard(i):
                    return i
            raise AdmissionStuck(tuple(self.pending), self.F, self.M)

        candidates = self.unadmitted_mask & (self.u + self.F >= self.M)
        if not candidates.any():
            raise AdmissionStuck(tuple(np.flatnonzero(self.unadmitted_mask)), self.F, self.M)
        # Cached scores are exact while the cached uploader has capacity left
        # and only under-estimate once it exhausts, so validating the winner
        # (and re-scoring it if stale) converges on the true argmin.
        while True:
            scores = np.where(candidates, self._best_score, np.inf)
            best = scores.min()
            peer = int(np.flatnonzero(scores == best)[0])  # ties: lowest node id
            if self.residual[self._best_up[peer]] > 0:
                return peer
            self._rescore(peer)

    def select_uploaders(self, peer: int) -> list[int]:
        """Choose the peer's M uploaders (repetition allowed), respecting
        residual capacities connection by connection. Does not mutate state;
        :meth:`update_after_admission` applies the result."""
        conn = self.connected_ids
        rr = self.residual[conn].copy()  # local view of this round's eligibility
        score = self.policy.score
        diversity = self.policy.diversity

        base: np.ndarray | None = None
        if score != RANDOM:
            base = self.space.delays_from(peer)[conn]
            if score == LEAST_DELAY:
                base = self.d[conn] + base
        counts = np.zeros(len(conn)) if diversity != NONE else None

        chosen: list[int] = []
        for t in range(self.M):
            eligible = rr > 0
            if not eligible.any():
                raise CapacityExhausted(
                    f"no residual upload capacity among connected peers "
                    f"(picked {len(chosen)}/{self.M} for peer {peer})"
                )
            if score == RANDOM or (diversity == SMALL_WORLD and t == self.M - 1):
                ids = np.flatnonzero(eligible)
                k = int(ids[self.rng.integers(len(ids))])
            else:
                eff = base if counts is None else base + counts * self._diversity_penalty()
                masked = np.where(eligible, eff, np.inf)
                m = masked.min()
                ties = np.flatnonzero(masked == m)
                k = int(ties[np.argmin(conn[ties])]) if len(ties) > 1 else int(ties[0])
            chosen.append(int(conn[k]))
            rr[k] -= 1
            if counts is not None:
                counts[k] += 1
        return chosen

    def update_after_admission(self, peer: int, uploaders: list[int]) -> None:
        """Commit an admission: record edges, decrement capacities, set the
        peer's overlay delay d, update F, and refresh selection caches."""
        if len(uploaders) != self.M:
            raise ValueError(f"expected exactly {self.M} uploaders, got {len(uploaders)}")
        mult = Counter(uploaders)
        best = np.inf
        for j, c in mult.items():
            if self.unadmitted_mask[j]:
                raise ValueError(f"uploader {j} is not connected yet")
            self.edges[(j, peer)] = self.edges.get((j, peer), 0) + c
            self.residual[j] -= c
            if self.residual[j] < 0:
                raise CapacityExhausted(f"uploader {j} driven past its capacity")
            score = self.d[j] + self.space.delay(j, peer)
            if score < best:
                best = score
        self.d[peer] = best
        self.F += int(self.u[peer]) - self.M

        self.unadmitted_mask[peer] = False
        self._conn_buf[self.n_connected] = peer
        self.n_connected += 1
        if self.pending is not None:
            if self.pending and self.pending[0] == peer:
                self.pending.popleft()
            else:
                self.pending.remove(peer)

        if self._best_score is not None:
            self._refresh_fixed_cache(peer)

    def _rescore(self, i: int) -> None:
        """Recompute peer i's best eligible uploader from scratch. The
        admission guard keeps F + M > 0 upload units available, so some
        connected uploader is always open."""
        conn = self.connected_ids
        open_ids = conn[self.residual[conn] > 0]
        vec = self.space.delays_from(i)[open_ids]
        if self.policy.score == LEAST_DELAY:
            vec = self.d[open_ids] + vec
        k = int(vec.argmin())
        self._best_score[i] = vec[k]
        self._best_up[i] = int(open_ids[k])

    def _refresh_fixed_cache(self, new_node: int) -> None:
        """Let the newly admitted node improve unadmitted peers' cached scores."""
        if self.residual[new_node] <= 0:
            return
        targets = np.flatnonzero(self.unadmitted_mask)
        if not len(targets):
            return
        vec = self.space.delays_from(new_node)[targets]
        if self.policy.score == LEAST_DELAY:
            vec = self.d[new_node] + vec
        better = vec < self._best_score[targets]
        ids = targets[better]
        self._best_score[ids] = vec[better]
        self._best_up[ids] = new_node

    def admit_next(self) -> int:
        peer = self.select_next_peer()
        uploaders = self.select_uploaders(peer)
        self.update_after_admission(peer, uploaders)
        return peer

    def topology(self) -> Topology:
        return Topology(self.n, dict(self.edges), self.residual)


def build(
    space: DelaySpace,
    caps: CapacityProfile,
    policy: PolicySpec,
    m: int = 4,
    seed: int = 0,
) -> Topology:
    """Build a feasible topology over ``space`` under ``policy``.

    Deterministic in ``seed``. Raises :class:`AdmissionStuck` when the
    spare-capacity guard blocks every remaining peer.
    """
    state = BuildState(space, caps, policy, m, seed)
    while not state.done():
        state.admit_next()
    return state.topology()
