"""Graphical models, chordal completion and junction trees.

Vertices are labelled ``1..d``. A :class:`JunctionTree` keeps its cliques in
an order with the running intersection property: every clique ``k >= 1``
(0-based) has a parent ``parents[k] < k`` whose intersection with it
contains everything ``C_k`` shares with earlier cliques.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

from .errors import InvalidArgumentError, PreconditionError


def _edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class GraphicalModel:
    num_vars: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.num_vars < 0:
            raise InvalidArgumentError("num_vars must be nonnegative")
        clean = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise InvalidArgumentError(f"self-loop at vertex {u}")
            for w in (u, v):
                if not 1 <= w <= self.num_vars:
                    raise InvalidArgumentError(f"vertex {w} outside 1..{self.num_vars}")
            clean.add(_edge(u, v))
        object.__setattr__(self, "edges", frozenset(clean))

    @property
    def vertices(self) -> range:
        return range(1, self.num_vars + 1)

    def adjacency(self) -> dict[int, set[int]]:
        adj = {v: set() for v in self.vertices}
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    @classmethod
    def empty(cls, d: int) -> "GraphicalModel":
        return cls(d, frozenset())

    @classmethod
    def chain(cls, d: int) -> "GraphicalModel":
        return cls(d, frozenset((i, i + 1) for i in range(1, d)))

    @classmethod
    def complete(cls, d: int) -> "GraphicalModel":
        return cls(d, frozenset(combinations(range(1, d + 1), 2)))


@dataclass(frozen=True)
class JunctionTree:
    """Cliques in RIP order with their tree structure.

    ``parents[0]`` is ``-1``; for ``k >= 1`` the tree edge is
    ``(parents[k], k)`` and ``separators[k] = cliques[k] & cliques[parents[k]]``.
    ``separators[0]`` is the empty tuple.
    """

    num_vars: int
    cliques: tuple[tuple[int, ...], ...]
    parents: tuple[int, ...]
    separators: tuple[tuple[int, ...], ...]
    added_edges: tuple[tuple[int, int], ...] = ()

    @property
    def tree_edges(self) -> tuple[tuple[int, int], ...]:
        return tuple((self.parents[k], k) for k in range(1, len(self.cliques)))

    @property
    def clique_number(self) -> int:
        return max((len(c) for c in self.cliques), default=0)

    @property
    def treewidth_bound(self) -> int:
        """``cl(J) - 1`` for this completion; an upper bound on the treewidth."""
        return self.clique_number - 1

    def partition_count(self) -> int:
        """``sum |C_k| - sum |S_k|``; equals ``num_vars`` for a valid tree."""
        return sum(len(c) for c in self.cliques) - sum(len(s) for s in self.separators)

    def to_dot(self) -> str:
        lines = ["graph junction_tree {"]
        for k, c in enumerate(self.cliques):
            label = "{" + ",".join(map(str, c)) + "}"
            lines.append(f'  c{k} [label="{label}"];')
        for j, k in self.tree_edges:
            sep = ",".join(map(str, self.separators[k]))
            lines.append(f'  c{j} -- c{k} [label="{{{sep}}}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _fill_in(adj: dict[int, set[int]], v: int) -> list[tuple[int, int]]:
    nbrs = sorted(adj[v])
    return [(a, b) for a, b in combinations(nbrs, 2) if b not in adj[a]]


def chordal_complete(g: GraphicalModel) -> tuple[GraphicalModel, tuple[tuple[int, int], ...]]:
    """Greedy min-fill triangulation.

    Repeatedly eliminates the vertex whose elimination adds the fewest fill
    edges (ties go to the smallest label). Returns the completed graph and
    the sorted fill edges.
    """
    work = g.adjacency()
    added = set()
    remaining = set(g.vertices)
    while remaining:
        v = min(remaining, key=lambda u: (len(_fill_in(work, u)), u))
        for a, b in _fill_in(work, v):
            work[a].add(b)
            work[b].add(a)
            added.add(_edge(a, b))
        for u in work[v]:
            work[u].discard(v)
        del work[v]
        remaining.remove(v)
    added = tuple(sorted(added - g.edges))
    return GraphicalModel(g.num_vars, g.edges | frozenset(added)), added


def max_cardinality_order(g: GraphicalModel) -> list[int]:
    """Maximum cardinality search visiting order (ties to the smallest label)."""
    adj = g.adjacency()
    weight = {v: 0 for v in g.vertices}
    order = []
    unvisited = set(g.vertices)
    while unvisited:
        v = min(unvisited, key=lambda u: (-weight[u], u))
        order.append(v)
        unvisited.remove(v)
        for u in adj[v]:
            if u in unvisited:
                weight[u] += 1
    return order


def is_chordal(g: GraphicalModel) -> bool:
    """Perfect-elimination check on the reversed MCS order."""
    adj = g.adjacency()
    order = max_cardinality_order(g)
    pos = {v: i for i, v in enumerate(order)}
    for v in order:
        earlier = [u for u in adj[v] if pos[u] < pos[v]]
        if not earlier:
            continue
        p = max(earlier, key=pos.__getitem__)
        if any(u != p and u not in adj[p] for u in earlier):
            return False
    return True


def maximal_cliques(chordal: GraphicalModel) -> list[tuple[int, ...]]:
    """Maximal cliques of a chordal graph, each sorted, listed lexicographically."""
    if not is_chordal(chordal):
        raise PreconditionError("graph is not chordal; run chordal_complete first")
    adj = chordal.adjacency()
    order = max_cardinality_order(chordal)
    pos = {v: i for i, v in enumerate(order)}
    candidates = {frozenset({v} | {u for u in adj[v] if pos[u] < pos[v]}) for v in order}
    maximal = [c for c in candidates if not any(c < other for other in candidates)]
    return sorted(tuple(sorted(c)) for c in maximal)


def _rip_order(num_vars, cliques, tree_adj, added_edges) -> JunctionTree:
    # breadth-first from clique 0, children in ascending index
    order, parent_of = [0], {0: -1}
    head = 0
    while head < len(order):
        k = order[head]
        head += 1
        for nb in sorted(tree_adj[k]):
            if nb not in parent_of:
                parent_of[nb] = k
                order.append(nb)
    relabel = {old: new for new, old in enumerate(order)}
    ordered = tuple(cliques[old] for old in order)
    parents = tuple(-1 if parent_of[old] < 0 else relabel[parent_of[old]] for old in order)
    seps = [()]
    for k in range(1, len(ordered)):
        seps.append(tuple(sorted(set(ordered[k]) & set(ordered[parents[k]]))))
    return JunctionTree(num_vars, ordered, parents, tuple(seps), tuple(added_edges))


def _spanning_tree(cliques) -> dict[int, set[int]]:
    """Kruskal maximum-weight spanning tree on |C_i & C_j| with (i, j) tie-break."""
    n = len(cliques)
    sets = [set(c) for c in cliques]
    pairs = sorted(
        ((len(sets[i] & sets[j]), i, j) for i, j in combinations(range(n), 2)),
        key=lambda t: (-t[0], t[1], t[2]),
    )
    root = list(range(n))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    adj = {k: set() for k in range(n)}
    for _, i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            root[ri] = rj
            adj[i].add(j)
            adj[j].add(i)
    return adj


def junction_tree(chordal: GraphicalModel, added_edges=()) -> JunctionTree:
    cliques = maximal_cliques(chordal)
    if not cliques:
        raise InvalidArgumentError("graph has no vertices")
    jt = _rip_order(chordal.num_vars, cliques, _spanning_tree(cliques), added_edges)
    if not verify_clique_intersection(jt):  # pragma: no cover - guaranteed for chordal input
        raise PreconditionError("spanning tree lacks the clique-intersection property")
    return jt


def build_junction_tree(g: GraphicalModel) -> JunctionTree:
    """Complete ``g`` by min-fill and arrange the cliques in RIP order."""
    completed, added = chordal_complete(g)
    return junction_tree(completed, added)


def junction_tree_from_cliques(num_vars: int, cliques) -> JunctionTree:
    """Junction tree over an explicitly supplied clique list.

    The cliques must cover ``1..num_vars``, none may contain another, and a
    maximum-weight spanning tree over them must have the clique-intersection
    property (which holds iff they are the maximal cliques of a chordal graph).
    """
    cl = sorted({tuple(sorted(int(v) for v in c)) for c in cliques})
    if not cl or any(len(c) == 0 for c in cl):
        raise InvalidArgumentError("cliques must be nonempty")
    covered = set().union(*map(set, cl))
    if covered != set(range(1, num_vars + 1)):
        raise InvalidArgumentError(f"cliques cover {sorted(covered)}, expected 1..{num_vars}")
    for a, b in combinations(cl, 2):
        if set(a) <= set(b) or set(b) <= set(a):
            raise InvalidArgumentError(f"clique {a} and {b} are nested")
    jt = _rip_order(num_vars, cl, _spanning_tree(cl), ())
    if not verify_clique_intersection(jt):
        raise PreconditionError("supplied cliques admit no junction tree")
    return jt


def _tree_path(adj: dict[int, set[int]], a: int, b: int) -> list[int]:
    prev = {a: None}
    stack = [a]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in prev:
                prev[w] = u
                stack.append(w)
    path = []
    node = b
    while node is not None:
        path.append(node)
        node = prev.get(node)
    return path[::-1]


def _is_tree(n: int, edges) -> bool:
    if len(edges) != n - 1:
        return False
    adj = {k: set() for k in range(n)}
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            return False
        adj[i].add(j)
        adj[j].add(i)
    seen, stack = {0}, [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


def verify_clique_intersection(jt: JunctionTree) -> bool:
    """Exhaustive check that ``A & B`` lies in every clique on the A-B path."""
    n = len(jt.cliques)
    edges = jt.tree_edges
    if not _is_tree(n, edges):
        return False
    adj = {k: set() for k in range(n)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    sets = [set(c) for c in jt.cliques]
    for a, b in combinations(range(n), 2):
        common = sets[a] & sets[b]
        if not common:
            continue
        if any(not common <= sets[c] for c in _tree_path(adj, a, b)):
            return False
    return True


def verify_rip(jt: JunctionTree) -> bool:
    """Check the running intersection property of the stored order."""
    seen = set(jt.cliques[0]) if jt.cliques else set()
    for k in range(1, len(jt.cliques)):
        p = jt.parents[k]
        if not 0 <= p < k:
            return False
        ck = set(jt.cliques[k])
        if not (ck & seen) <= set(jt.cliques[p]):
            return False
        if set(jt.separators[k]) != ck & set(jt.cliques[p]):
            return False
        seen |= ck
    return True


def read_graph(path) -> GraphicalModel:
    """Parse the graph text format: ``d`` on the first line, then ``u v`` pairs.

    Blank lines and ``#`` comments are ignored; labels are 1-based.
    """
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.replace(",", " ").split())
    if not rows or len(rows[0]) != 1:
        raise InvalidArgumentError(f"{path}: first line must hold the number of variables")
    try:
        d = int(rows[0][0])
        edges = []
        for r in rows[1:]:
            if len(r) != 2:
                raise ValueError(r)
            edges.append((int(r[0]), int(r[1])))
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: malformed line {exc}") from None
    return GraphicalModel(d, frozenset(edges))


def format_graph(g: GraphicalModel) -> str:
    return "\n".join([str(g.num_vars)] + [f"{u} {v}" for u, v in sorted(g.edges)]) + "\n"
