"""Dinic max-flow on small float-capacity graphs."""

from __future__ import annotations

from collections import deque

RESIDUAL_EPS = 1e-12


class FlowGraph:
    def __init__(self, n: int):
        self.n = n
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[float] = []

    def add_edge(self, u: int, v: int, cap: float, rev_cap: float = 0.0) -> None:
        """Arc u->v with capacity ``cap`` and v->u with ``rev_cap``."""
        self.adj[u].append(len(self.to))
        self.to.append(v)
        self.cap.append(float(cap))
        self.adj[v].append(len(self.to))
        self.to.append(u)
        self.cap.append(float(rev_cap))

    def _levels(self, s: int, t: int):
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        to, cap, adj = self.to, self.cap, self.adj
        while q:
            u = q.popleft()
            for e in adj[u]:
                v = to[e]
                if level[v] < 0 and cap[e] > RESIDUAL_EPS:
                    level[v] = level[u] + 1
                    q.append(v)
        return level if level[t] >= 0 else None

    def _blocking_flow(self, s: int, t: int, level) -> float:
        to, cap, adj = self.to, self.cap, self.adj
        it = [0] * self.n
        total = 0.0
        while True:
            # iterative DFS for one augmenting path in the level graph
            path: list[int] = []
            u = s
            while u != t:
                advanced = False
                while it[u] < len(adj[u]):
                    e = adj[u][it[u]]
                    v = to[e]
                    if cap[e] > RESIDUAL_EPS and level[v] == level[u] + 1:
                        path.append(e)
                        u = v
                        advanced = True
                        break
                    it[u] += 1
                if not advanced:
                    if u == s:
                        return total
                    level[u] = -1      # dead end, prune
                    e = path.pop()
                    u = to[e ^ 1]
                    it[u] += 1
            f = min(cap[e] for e in path)
            for e in path:
                cap[e] -= f
                cap[e ^ 1] += f
            total += f

    def max_flow(self, s: int, t: int) -> float:
        flow = 0.0
        while True:
            level = self._levels(s, t)
            if level is None:
                return flow
            flow += self._blocking_flow(s, t, level)

    def source_side(self, s: int) -> list[bool]:
        """Nodes reachable from ``s`` in the residual graph (after max_flow)."""
        seen = [False] * self.n
        seen[s] = True
        stack = [s]
        while stack:
            u = stack.pop()
            for e in self.adj[u]:
                v = self.to[e]
                if not seen[v] and self.cap[e] > RESIDUAL_EPS:
                    seen[v] = True
                    stack.append(v)
        return seen
