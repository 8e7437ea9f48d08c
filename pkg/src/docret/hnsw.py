"""Hierarchical navigable small world graph over unit vectors.

Similarity is the dot product (rows are unit-norm, so this is cosine).
Construction is single-threaded and fully determined by the seed: node
levels come from one seeded RNG consumed in insertion order.
"""

from __future__ import annotations

import heapq
import math
import struct
from dataclasses import dataclass
from typing import List

import numpy as np


@dataclass(frozen=True)
class HnswParams:
    M: int = 16
    ef_construction: int = 200
    ef_search: int = 100
    seed: int = 42


class HnswGraph:
    def __init__(self, matrix: np.ndarray, params: HnswParams):
        self.params = params
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        n = self.matrix.shape[0]
        self.levels = np.zeros(n, dtype=np.int64)
        # neighbors[layer][node] -> list of node ids
        self.neighbors: List[List[List[int]]] = []
        self.entry_point = -1
        self.max_level = -1
        self._visited = np.zeros(n, dtype=np.int64)
        self._epoch = 0
        self._build()

    def _m_max(self, layer: int) -> int:
        # layer 0 carries a deliberately dense neighborhood: high-dimensional
        # corpora without cluster structure need the extra degree for the
        # beam search to reach the recall target at the default ef_search
        return self.params.M * 4 if layer == 0 else self.params.M

    # -- construction ------------------------------------------------------

    def _build(self):
        p = self.params
        n = self.matrix.shape[0]
        rng = np.random.default_rng(p.seed)
        ml = 1.0 / math.log(p.M)
        for i in range(n):
            u = rng.random()
            self.levels[i] = int(-math.log(max(u, 1e-300)) * ml)
        top = int(self.levels.max()) if n else -1
        self.neighbors = [[[] for _ in range(n)] for _ in range(top + 1)]
        for i in range(n):
            self._insert(i)

    def _sims(self, nodes: List[int], q: np.ndarray) -> np.ndarray:
        return self.matrix[nodes] @ q

    def _search_layer(self, q: np.ndarray, entry: int, ef: int, layer: int):
        """Return up to ef (sim, node) pairs, best-first."""
        self._epoch += 1
        mark = self._epoch
        vm = self._visited
        d0 = float(self.matrix[entry] @ q)
        vm[entry] = mark
        # candidates: max-heap by sim (store negated); results: min-heap by sim
        candidates = [(-d0, entry)]
        results = [(d0, entry)]
        adj = self.neighbors[layer]
        while candidates:
            negsim, c = heapq.heappop(candidates)
            if -negsim < results[0][0] and len(results) >= ef:
                break
            neigh = [x for x in adj[c] if vm[x] != mark]
            if not neigh:
                continue
            for x in neigh:
                vm[x] = mark
            sims = self._sims(neigh, q)
            worst = results[0][0]
            for x, s in zip(neigh, sims):
                s = float(s)
                if len(results) < ef or s > worst:
                    heapq.heappush(candidates, (-s, x))
                    heapq.heappush(results, (s, x))
                    if len(results) > ef:
                        heapq.heappop(results)
                    worst = results[0][0]
        return sorted(results, reverse=True)

    def _insert(self, i: int):
        p = self.params
        level = int(self.levels[i])
        q = self.matrix[i]
        if self.entry_point < 0:
            self.entry_point = i
            self.max_level = level
            return
        ep = self.entry_point
        # greedy descent through layers above the node's level
        for layer in range(self.max_level, level, -1):
            ep = self._search_layer(q, ep, 1, layer)[0][1]
        for layer in range(min(level, self.max_level), -1, -1):
            found = self._search_layer(q, ep, p.ef_construction, layer)
            m_max = self._m_max(layer)
            chosen = [node for _, node in found[:m_max]]
            adj = self.neighbors[layer]
            adj[i] = list(chosen)
            for c in chosen:
                lst = adj[c]
                lst.append(i)
                if len(lst) > m_max:
                    sims = self._sims(lst, self.matrix[c])
                    keep = np.argsort(-sims, kind="stable")[:m_max]
                    adj[c] = [lst[k] for k in keep]
            ep = found[0][1]
        if level > self.max_level:
            self.max_level = level
            self.entry_point = i

    # -- search ------------------------------------------------------------

    def search(self, q: np.ndarray, k: int, ef_search: int | None = None) -> List[int]:
        """Candidate node ids for the k nearest, best-first."""
        ef = max(ef_search or self.params.ef_search, k)
        q = np.asarray(q, dtype=np.float32)
        ep = self.entry_point
        for layer in range(self.max_level, 0, -1):
            ep = self._search_layer(q, ep, 1, layer)[0][1]
        found = self._search_layer(q, ep, ef, 0)
        return [node for _, node in found]

    # -- persistence -------------------------------------------------------

    def to_bytes(self) -> bytes:
        out = bytearray()
        n = self.matrix.shape[0]
        out += struct.pack("<III", self.max_level + 1, self.entry_point, n)
        for i in range(n):
            li = int(self.levels[i])
            out += struct.pack("<I", li)
            for layer in range(li + 1):
                adj = self.neighbors[layer][i]
                out += struct.pack("<I", len(adj))
                out += struct.pack(f"<{len(adj)}I", *adj)
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes, matrix: np.ndarray, params: HnswParams) -> "HnswGraph":
        graph = cls.__new__(cls)
        graph.params = params
        graph.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        graph._visited = np.zeros(graph.matrix.shape[0], dtype=np.int64)
        graph._epoch = 0
        off = 0
        n_levels, entry, n = struct.unpack_from("<III", data, off)
        off += 12
        graph.max_level = n_levels - 1
        graph.entry_point = int(entry)
        graph.levels = np.zeros(n, dtype=np.int64)
        graph.neighbors = [[[] for _ in range(n)] for _ in range(n_levels)]
        for i in range(n):
            (li,) = struct.unpack_from("<I", data, off)
            off += 4
            graph.levels[i] = li
            for layer in range(li + 1):
                (cnt,) = struct.unpack_from("<I", data, off)
                off += 4
                adj = list(struct.unpack_from(f"<{cnt}I", data, off))
                off += 4 * cnt
                graph.neighbors[layer][i] = adj
        return graph
