"""Rooted navigation graphs over source indices ``0..L``.

Node 0 is the start of every navigation (no source held yet).  An edge
``(u, v)`` means source ``v`` may be requested right after ``u``.

Text format::

    L=3
    # comments allowed
    0 1
    1 2
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError, GraphError

DEFAULT_SUBSET_CAP = 4096


@dataclass(frozen=True)
class Unreachable:
    node: int


@dataclass(frozen=True)
class SelfLoop:
    node: int


@dataclass(frozen=True)
class RootHasIncoming:
    source: int


@dataclass(frozen=True)
class NodeOutOfRange:
    edge: tuple


class NavigationGraph:
    def __init__(self, num_sources, edges=()):
        if num_sources < 0:
            raise GraphError("number of sources must be nonnegative")
        self.num_sources = int(num_sources)
        self.edges = frozenset((int(u), int(v)) for u, v in edges)
        self._in = {}
        self._out = {}
        for u, v in sorted(self.edges):
            self._out.setdefault(u, []).append(v)
            self._in.setdefault(v, []).append(u)

    root = 0

    def __eq__(self, other):
        return (isinstance(other, NavigationGraph) and self.num_sources == other.num_sources
                and self.edges == other.edges)

    def __repr__(self):
        return f"NavigationGraph(L={self.num_sources}, edges={sorted(self.edges)})"

    def successors(self, u):
        return tuple(self._out.get(u, ()))

    def _check_node(self, k):
        if not 1 <= k <= self.num_sources:
            raise GraphError(f"source {k} out of range 1..{self.num_sources}")

    def reachable(self):
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in self._out.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen

    # text format -----------------------------------------------------------

    @classmethod
    def parse(cls, text):
        num = None
        edges = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if num is None:
                if not line.startswith("L="):
                    raise FormatError(f"line {lineno}: expected header 'L=<int>'")
                try:
                    num = int(line[2:])
                except ValueError:
                    raise FormatError(f"line {lineno}: bad header {raw!r}") from None
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(f"line {lineno}: expected 'u v', got {raw!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise FormatError(f"line {lineno}: bad edge {raw!r}") from None
        if num is None:
            raise FormatError("missing header 'L=<int>'")
        return cls(num, edges)

    def dumps(self):
        lines = [f"L={self.num_sources}"]
        lines += [f"{u} {v}" for u, v in sorted(self.edges)]
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, path):
        return cls.parse(Path(path).read_text())


def validate(g):
    """Return the list of structural violations (empty when the graph is sound)."""
    out = []
    for u, v in sorted(g.edges):
        if not (0 <= u <= g.num_sources and 0 <= v <= g.num_sources):
            out.append(NodeOutOfRange((u, v)))
        elif u == v:
            out.append(SelfLoop(u))
        elif v == 0:
            out.append(RootHasIncoming(u))
    seen = g.reachable()
    out += [Unreachable(k) for k in range(1, g.num_sources + 1) if k not in seen]
    return out


def one_hop(g, k):
    """Possible previous requests of ``k``: its in-neighbours."""
    g._check_node(k)
    return frozenset(g._in.get(k, ()))


def previous_request_subsets(g, k, cap=DEFAULT_SUBSET_CAP):
    """Vertex sets (minus ``k``) of all simple paths from 0 to ``k``.

    Raises ``GraphError`` if ``k`` is unreachable or more than ``cap``
    distinct subsets exist.
    """
    g._check_node(k)
    if k not in g.reachable():
        raise GraphError(f"source {k} is unreachable from 0")
    found = set()
    on_path = [0]
    in_path = {0}
    # iterative DFS over simple paths; k may only appear as the endpoint
    stack = [iter(g.successors(0))]
    while stack:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            in_path.discard(on_path.pop())
            continue
        if nxt in in_path or nxt == 0:
            continue
        if nxt == k:
            found.add(frozenset(on_path))
            if len(found) > cap:
                raise GraphError(f"more than {cap} previous-request subsets for source {k}")
            continue
        on_path.append(nxt)
        in_path.add(nxt)
        stack.append(iter(g.successors(nxt)))
    return found


def ordering(g, k, model):
    """Neighbours of ``k`` sorted by ascending conditional entropy (ties: id)."""
    from .entropy_bounds import conditional_entropy

    keyed = [(conditional_entropy(model.channel(k, j)), j) for j in one_hop(g, k)]
    return [j for _, j in sorted(keyed)]


def root_equality_condition(g, k):
    """True when every non-root neighbour of ``k`` can be reached straight from 0."""
    return all((0, j) in g.edges for j in one_hop(g, k) if j != 0)


def is_rooted_path(g, path):
    """Whether ``0 -> path[0] -> ... -> path[-1]`` follows edges of ``g``."""
    prev = 0
    for v in path:
        if (prev, v) not in g.edges:
            return False
        prev = v
    return True


def example_graph():
    """The four-node example used throughout the docs and tests."""
    return NavigationGraph(3, [(0, 1), (0, 2), (1, 2), (2, 1), (1, 3), (2, 3)])
