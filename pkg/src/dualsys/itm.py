"""Instance-based topology-preserving map over the latent space.

The map starts from two connected nodes and grows one node at a time as
stimuli arrive.  Each adaptation step runs three phases on a stimulus phi:

  matching        nearest node n and second-nearest n' by squared distance,
                  ties broken towards the lower node id;
  edge adaptation connect n and n' if needed, then for every neighbor m of n
                  drop the edge (m, n) when m lies inside the Thales sphere
                  through n and n' (negative dot product test), deleting m
                  outright if that leaves it edgeless;
  node adaptation when phi falls outside the Thales sphere through n and n'
                  and farther than the resolution threshold from n, insert a
                  new node at phi wired to n.

Nodes also carry the bookkeeping for reliability gating: a ring of recent
prediction errors, the history of windowed error means, and an event count.
Learning progress is the windowed mean from `lag` events ago minus the
current one; it stays undefined until a node has seen window+lag events.
Each node optionally owns a local world model supplied by a factory.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

MIN_NODES = 2

SNAPSHOT_MAGIC = "dualsys-itm"
SNAPSHOT_VERSION = 1


@dataclass
class ItmNode:
    ident: int
    w: np.ndarray
    neighbors: set[int]
    error_window: deque
    mean_history: deque
    window: int
    lag: int
    event_count: int = 0
    model: object = None

    def record_error(self, e: float) -> float:
        """Push one prediction error; returns the updated windowed mean."""
        e = float(e)
        if e < 0.0 or not np.isfinite(e):
            raise ValueError(f"prediction error must be finite and >= 0, got {e}")
        self.error_window.append(e)
        mean = float(np.mean(np.fromiter(self.error_window, dtype=float)))
        self.mean_history.append(mean)
        self.event_count += 1
        return mean

    def learning_progress(self) -> Optional[float]:
        """Windowed mean `lag` events ago minus now; None during warm-up."""
        if self.event_count < self.window + self.lag:
            return None
        return self.mean_history[0] - self.mean_history[-1]

    def intrinsic_reward(self) -> float:
        lp = self.learning_progress()
        return 0.0 if lp is None else -lp


@dataclass
class AdaptResult:
    best: int
    created: Optional[int]
    deleted: list[int]


class ItmMap:
    def __init__(self, w1: np.ndarray, w2: np.ndarray, resolution: float,
                 window: int, lag: int,
                 model_factory: Optional[Callable[[], object]] = None) -> None:
        if window < 1 or lag < 1:
            raise ValueError("window and lag must be >= 1")
        self.resolution = float(resolution)
        self.window = int(window)
        self.lag = int(lag)
        self.model_factory = model_factory
        self.nodes: dict[int, ItmNode] = {}
        self._next_id = 0
        a = self._new_node(np.asarray(w1, dtype=float))
        b = self._new_node(np.asarray(w2, dtype=float))
        a.neighbors.add(b.ident)
        b.neighbors.add(a.ident)

    # ------------------------------------------------------------- plumbing

    def _new_node(self, w: np.ndarray) -> ItmNode:
        node = ItmNode(
            ident=self._next_id,
            w=w.copy(),
            neighbors=set(),
            error_window=deque(maxlen=self.window),
            mean_history=deque(maxlen=self.lag + 1),
            window=self.window,
            lag=self.lag,
            model=self.model_factory() if self.model_factory else None,
        )
        self.nodes[node.ident] = node
        self._next_id += 1
        return node

    def _ranked(self, phi: np.ndarray):
        ids = sorted(self.nodes)
        wmat = np.stack([self.nodes[i].w for i in ids])
        d2 = np.sum((wmat - phi) ** 2, axis=1)
        order = np.argsort(d2, kind="stable")
        return ids, d2, order

    def __len__(self) -> int:
        return len(self.nodes)

    def nearest(self, phi: np.ndarray) -> int:
        """Matching only; no adaptation."""
        phi = np.asarray(phi, dtype=float)
        ids, _, order = self._ranked(phi)
        return ids[order[0]]

    def lp(self, ident: int) -> Optional[float]:
        return self.nodes[ident].learning_progress()

    # ------------------------------------------------------------ adaptation

    def adapt(self, phi: np.ndarray) -> AdaptResult:
        """One full adaptation step; returns the best-matching node afterwards."""
        phi = np.asarray(phi, dtype=float)
        if not np.all(np.isfinite(phi)):
            raise ValueError("non-finite stimulus")
        ids, _, order = self._ranked(phi)
        n = ids[order[0]]
        n2 = ids[order[1]]
        node_n = self.nodes[n]
        node_n2 = self.nodes[n2]

        # edge adaptation
        if n2 not in node_n.neighbors:
            node_n.neighbors.add(n2)
            node_n2.neighbors.add(n)
        deleted = []
        wn, wn2 = node_n.w, node_n2.w
        for m in sorted(node_n.neighbors):
            if float(np.dot(wn - wn2, self.nodes[m].w - wn2)) < 0.0:
                node_n.neighbors.discard(m)
                self.nodes[m].neighbors.discard(n)
                if not self.nodes[m].neighbors and len(self.nodes) > MIN_NODES:
                    del self.nodes[m]
                    deleted.append(m)

        # node adaptation
        created = None
        if (float(np.dot(wn - phi, wn2 - phi)) > 0.0
                and float(np.sum((phi - wn) ** 2)) > self.resolution):
            v = self._new_node(phi)
            v.neighbors.add(n)
            node_n.neighbors.add(v.ident)
            created = v.ident

        return AdaptResult(best=created if created is not None else n,
                           created=created, deleted=deleted)

    # -------------------------------------------------------------- auditing

    def check_consistent(self) -> None:
        for i, node in self.nodes.items():
            assert i not in node.neighbors, f"self edge at {i}"
            for j in node.neighbors:
                assert j in self.nodes, f"dangling edge {i}->{j}"
                assert i in self.nodes[j].neighbors, f"asymmetric edge {i}->{j}"
        assert len(self.nodes) >= MIN_NODES

    def edge_set(self) -> set[frozenset]:
        return {frozenset((i, j)) for i, n in self.nodes.items() for j in n.neighbors}

    # --------------------------------------------------------- serialization

    def dump(self) -> str:
        """Text snapshot of weights, edges and window contents (models excluded)."""
        lines = [f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION}",
                 f"resolution {self.resolution!r}",
                 f"window {self.window} {self.lag}",
                 f"next {self._next_id}",
                 f"nodes {len(self.nodes)}"]
        for i in sorted(self.nodes):
            node = self.nodes[i]
            lines.append(f"node {i} {node.event_count}")
            lines.append("w " + " ".join(repr(float(v)) for v in node.w))
            lines.append("errors " + " ".join(repr(float(v)) for v in node.error_window))
            lines.append("means " + " ".join(repr(float(v)) for v in node.mean_history))
        edges = sorted(tuple(sorted(e)) for e in self.edge_set())
        lines.append(f"edges {len(edges)}")
        lines.extend(f"{a} {b}" for a, b in edges)
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str,
             model_factory: Optional[Callable[[], object]] = None) -> "ItmMap":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        if head[0] != SNAPSHOT_MAGIC or int(head[1]) != SNAPSHOT_VERSION:
            raise ValueError("not a recognized map snapshot")
        resolution = float(lines[1].split()[1])
        _, window, lag = lines[2].split()
        next_id = int(lines[3].split()[1])
        n_nodes = int(lines[4].split()[1])
        obj = cls.__new__(cls)
        obj.resolution = resolution
        obj.window = int(window)
        obj.lag = int(lag)
        obj.model_factory = model_factory
        obj.nodes = {}
        obj._next_id = next_id
        pos = 5
        for _ in range(n_nodes):
            _, ident, events = lines[pos].split()
            w = np.array([float(v) for v in lines[pos + 1].split()[1:]])
            errors = [float(v) for v in lines[pos + 2].split()[1:]]
            means = [float(v) for v in lines[pos + 3].split()[1:]]
            node = ItmNode(
                ident=int(ident), w=w, neighbors=set(),
                error_window=deque(errors, maxlen=obj.window),
                mean_history=deque(means, maxlen=obj.lag + 1),
                window=obj.window, lag=obj.lag, event_count=int(events),
                model=model_factory() if model_factory else None)
            obj.nodes[node.ident] = node
            pos += 4
        n_edges = int(lines[pos].split()[1])
        pos += 1
        for _ in range(n_edges):
            a, b = (int(v) for v in lines[pos].split())
            obj.nodes[a].neighbors.add(b)
            obj.nodes[b].neighbors.add(a)
            pos += 1
        return obj
