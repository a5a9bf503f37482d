"""Sparse bipartite graphs sampled from degree distributions, and their files.

Orientation convention: the *left* side of every graph is the variable-like
side. The source code uses q (left) to s (right); the nested code uses b (left)
to c (right) for the generator graph ``G`` and b (left) to p (right) for the
parity graph ``H``.

Instance files are ASCII, newline-terminated, space-separated::

    cfrelay-instance 1
    kind C1 n 2 graph_seed 0 dither_seed 0
    graph qs 2 1 2
    0
    0

The header line carries the format version. The second line holds
``key value`` pairs. Optional ``rate <name> <value>`` lines and
``ensemble <name> <count>`` blocks (followed by ``count`` lines of
``degree fraction``) may follow. Each ``graph <name> <n_left> <n_right>
<edges>`` line is followed by one line per left node listing its right
neighbours (0-based, ascending).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import make_rng
from .ensemble import DegreeDistribution

FORMAT_TAG = "cfrelay-instance"
FORMAT_VERSION = 1


class DegreeBudgetError(ValueError):
    """The two sides' edge counts cannot be reconciled."""


class ConstructionError(RuntimeError):
    """Duplicate edges could not be removed within the retry budget."""


class InstanceParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InstanceVersionError(ValueError):
    pass


@dataclass(frozen=True)
class BipartiteGraph:
    """CSR adjacency of left nodes; each row sorted and duplicate-free."""

    n_left: int
    n_right: int
    ptr: np.ndarray
    idx: np.ndarray

    def __post_init__(self):
        ptr = np.asarray(self.ptr, dtype=np.int64)
        idx = np.asarray(self.idx, dtype=np.int64)
        if ptr.shape != (self.n_left + 1,) or ptr[0] != 0 or ptr[-1] != idx.size or np.any(np.diff(ptr) < 0):
            raise ValueError("malformed row pointer")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_right):
            raise ValueError("right index out of range")
        row = np.repeat(np.arange(self.n_left), np.diff(ptr))
        if idx.size > 1:
            same = row[1:] == row[:-1]
            if np.any(idx[1:][same] <= idx[:-1][same]):
                raise ValueError("rows must be strictly ascending (no duplicate edges)")
        object.__setattr__(self, "ptr", ptr)
        object.__setattr__(self, "idx", idx)

    @classmethod
    def from_edges(cls, n_left: int, n_right: int, left_ids, right_ids) -> "BipartiteGraph":
        left_ids = np.asarray(left_ids, dtype=np.int64)
        right_ids = np.asarray(right_ids, dtype=np.int64)
        order = np.lexsort((right_ids, left_ids))
        ptr = np.zeros(n_left + 1, dtype=np.int64)
        np.cumsum(np.bincount(left_ids, minlength=n_left), out=ptr[1:])
        return cls(n_left, n_right, ptr, right_ids[order])

    @classmethod
    def from_adjacency(cls, n_right: int, rows) -> "BipartiteGraph":
        rows = [sorted(int(c) for c in r) for r in rows]
        ptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum([len(r) for r in rows], out=ptr[1:])
        idx = np.array([c for r in rows for c in r], dtype=np.int64)
        return cls(len(rows), n_right, ptr, idx)

    @property
    def edge_count(self) -> int:
        return int(self.idx.size)

    @property
    def left_degrees(self) -> np.ndarray:
        return np.diff(self.ptr)

    @property
    def right_degrees(self) -> np.ndarray:
        return np.bincount(self.idx, minlength=self.n_right)

    def edges(self):
        """``(left_ids, right_ids)`` in CSR order."""
        return np.repeat(np.arange(self.n_left), self.left_degrees), self.idx

    def adjacency(self, i: int) -> np.ndarray:
        return self.idx[self.ptr[i]:self.ptr[i + 1]]

    def transpose(self) -> "BipartiteGraph":
        left, right = self.edges()
        return BipartiteGraph.from_edges(self.n_right, self.n_left, right, left)

    def to_dense(self) -> np.ndarray:
        """``(n_left, n_right)`` 0/1 matrix."""
        out = np.zeros((self.n_left, self.n_right), dtype=np.uint8)
        left, right = self.edges()
        out[left, right] = 1
        return out

    def __eq__(self, other):
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        return (self.n_left == other.n_left and self.n_right == other.n_right
                and np.array_equal(self.ptr, other.ptr) and np.array_equal(self.idx, other.idx))

    def __hash__(self):
        return hash((self.n_left, self.n_right, self.idx.tobytes()))


def node_counts(dist: DegreeDistribution, n_nodes: int) -> np.ndarray:
    """Integer node counts per degree by largest-remainder rounding of node fractions."""
    raw = dist.node_fractions() * n_nodes
    cnt = np.floor(raw).astype(np.int64)
    rem = int(n_nodes - cnt.sum())
    order = np.argsort(-(raw - cnt), kind="stable")
    cnt[order[:rem]] += 1
    return cnt


def degree_sequence(dist: DegreeDistribution, n_nodes: int, edge_budget: int | None = None,
                    max_degree: int | None = None) -> np.ndarray:
    """Per-node degrees (grouped ascending) optionally repaired to ``edge_budget`` edges.

    Degrees above ``max_degree`` are clipped first. Repair walks down from the
    highest-degree class, moving one node at a time by one degree (staying
    within ``[1, max_degree]``) until the budget is met.
    """
    degs = np.repeat(dist.degrees, node_counts(dist, n_nodes))
    cap = edge_budget if max_degree is None else int(max_degree)
    if edge_budget is None and max_degree is None:
        return degs
    if edge_budget is None:
        edge_budget = int(degs.sum())
        cap = int(max_degree)
    degs = np.minimum(degs, cap)
    if not n_nodes <= edge_budget <= n_nodes * cap:
        raise DegreeBudgetError(f"cannot place {edge_budget} edges on {n_nodes} nodes of degree 1..{cap}")
    diff = int(edge_budget - degs.sum())
    step = 1 if diff > 0 else -1
    pos = n_nodes - 1
    while diff != 0:
        if 1 <= degs[pos] + step <= cap:
            degs[pos] += step
            diff -= step
        pos = pos - 1 if pos > 0 else n_nodes - 1
    return degs


def _configuration(left_deg, right_deg, rng: np.random.Generator, retries: int = 50):
    """Random socket matching; duplicate edges are swapped away.

    Cheap vectorised random swaps run first; leftovers (dense corners of tiny
    graphs) get targeted swaps that are checked against the adjacency.
    """
    ls = np.repeat(np.arange(len(left_deg)), left_deg)
    rs = np.repeat(np.arange(len(right_deg)), right_deg)
    if ls.size != rs.size:
        raise DegreeBudgetError(f"left has {ls.size} sockets, right has {rs.size}")
    rs = rs[rng.permutation(rs.size)]
    n_r = len(right_deg)

    def duplicates():
        key = ls * n_r + rs
        srt = np.argsort(key, kind="stable")
        dup = np.zeros(key.size, dtype=bool)
        dup[srt[1:]] = key[srt[1:]] == key[srt[:-1]]
        return np.flatnonzero(dup)

    for _ in range(retries):
        bad = duplicates()
        if bad.size == 0:
            return ls, rs
        other = rng.integers(0, rs.size, bad.size)
        for i, j in zip(bad.tolist(), other.tolist()):  # sequential: keeps socket counts exact
            rs[i], rs[j] = rs[j], rs[i]
    adj = [set() for _ in range(len(left_deg))]
    for a, b in zip(ls.tolist(), rs.tolist()):
        adj[a].add(b)
    for i in duplicates().tolist():
        l1, r1 = int(ls[i]), int(rs[i])
        for j in rng.permutation(rs.size).tolist():
            l2, r2 = int(ls[j]), int(rs[j])
            if r2 not in adj[l1] and r1 not in adj[l2] and l1 != l2:
                adj[l2].discard(r2)
                adj[l2].add(r1)
                adj[l1].add(r2)  # r1 stays in adj[l1] through its other copy
                rs[i], rs[j] = r2, r1
                break
        else:
            return _greedy_fill(left_deg, right_deg, rng)
    if duplicates().size:
        return _greedy_fill(left_deg, right_deg, rng)
    return ls, rs


def _greedy_fill(left_deg, right_deg, rng: np.random.Generator):
    """Constructive fallback: each right node (largest first) takes the left
    nodes with the most free sockets, random tie-breaks. Succeeds whenever a
    simple graph with these degrees exists."""
    free = np.asarray(left_deg, dtype=np.int64).copy()
    ls, rs = [], []
    for r in np.argsort(-np.asarray(right_deg), kind="stable").tolist():
        d = int(right_deg[r])
        order = np.lexsort((rng.random(free.size), -free))[:d]
        if d > free.size or np.any(free[order] == 0):
            raise ConstructionError("degree sequences admit no simple bipartite graph")
        free[order] -= 1
        ls.extend(order.tolist())
        rs.extend([r] * d)
    return np.array(ls, dtype=np.int64), np.array(rs, dtype=np.int64)


def sample_bipartite(n_left: int, left, right, rng, n_right: int | None = None) -> BipartiteGraph:
    """Sample a duplicate-free bipartite graph.

    ``left`` is an edge-perspective distribution or an explicit degree array.
    ``right`` is an int (regular right degree; ``n_right`` then follows from the
    edge count and the left budget is repaired to a multiple of it) or a
    distribution over ``n_right`` nodes (repaired to the left edge count).
    """
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    if isinstance(right, (int, np.integer)):
        if isinstance(left, DegreeDistribution):
            approx = n_left * left.avg_node_degree
            n_r = max(1, int(round(approx / right))) if n_right is None else n_right
            left_deg = degree_sequence(left, n_left, n_r * right, max_degree=n_r)
        else:
            left_deg = np.asarray(left, dtype=np.int64)
            if left_deg.sum() % right:
                raise DegreeBudgetError("left edge count is not a multiple of the right degree")
            n_r = int(left_deg.sum() // right)
        right_deg = np.full(n_r, int(right))
    else:
        if n_right is None:
            raise ValueError("n_right is required for an irregular right side")
        if isinstance(left, DegreeDistribution):
            left_deg = degree_sequence(left, n_left, max_degree=n_right)
        else:
            left_deg = np.asarray(left, dtype=np.int64)
        right_deg = degree_sequence(right, n_right, int(left_deg.sum()), max_degree=n_left)
        n_r = n_right
    left_deg = left_deg[rng.permutation(n_left)]
    right_deg = right_deg[rng.permutation(len(right_deg))]
    if np.any(right_deg > n_left) or np.any(left_deg > n_r):
        raise DegreeBudgetError("a node degree exceeds the opposite side size")
    ls, rs = _configuration(left_deg, right_deg, rng)
    return BipartiteGraph.from_edges(n_left, n_r, ls, rs)


@dataclass
class CodeInstance:
    """A concrete code: ``C1`` holds graph ``qs``; ``C2`` holds ``G`` (b-c) and ``H`` (b-p)."""

    kind: str
    n: int
    graphs: dict
    graph_seed: int = 0
    dither_seed: int = 0
    params: dict = field(default_factory=dict)
    rates: dict = field(default_factory=dict)
    ensembles: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "C1":
            g = self.graphs.get("qs")
            if g is None or g.n_left != self.n:
                raise ValueError("C1 instance needs graph 'qs' with n left nodes")
        elif self.kind == "C2":
            g, h = self.graphs.get("G"), self.graphs.get("H")
            if g is None or h is None:
                raise ValueError("C2 instance needs graphs 'G' and 'H'")
            if g.n_left != h.n_left:
                raise ValueError("G and H must share the b-node count")
            if g.n_right != 2 * self.n:
                raise ValueError("G must have 2n c-nodes")
        else:
            raise ValueError(f"unknown instance kind {self.kind!r}")

    @property
    def k(self) -> int:
        return self.graphs["qs"].n_right

    @property
    def m(self) -> int:
        return self.graphs["G"].n_left

    @property
    def t(self) -> int:
        return self.graphs["H"].n_right

    def __eq__(self, other):
        if not isinstance(other, CodeInstance):
            return NotImplemented
        return (self.kind == other.kind and self.n == other.n and self.graph_seed == other.graph_seed
                and self.dither_seed == other.dither_seed and self.params == other.params
                and self.rates == other.rates and self.ensembles == other.ensembles
                and self.graphs == other.graphs)


def instantiate_c1(dist: DegreeDistribution, d_s: int, n: int, seed: int) -> CodeInstance:
    rng = make_rng(seed)
    g = sample_bipartite(n, dist, int(d_s), rng)
    r0 = 1.0 - (1.0 / d_s) / dist.inv_avg
    return CodeInstance("C1", n, {"qs": g}, graph_seed=seed, params={"d_s": int(d_s)},
                        rates={"R0": r0}, ensembles={"v_qd": dist})


def instantiate_c2(v_cd: DegreeDistribution, d_b: int, v_bd: DegreeDistribution, v_pd: DegreeDistribution,
                   n: int, seed: int, dither_seed: int | None = None) -> CodeInstance:
    """Nested code: both c-bits of a relay symbol share one sampled c-degree."""
    rng = make_rng(seed)
    r_b = 2.0 / (d_b * v_cd.inv_avg)
    r_p = r_b * v_pd.inv_avg / v_bd.inv_avg
    m = int(round(n * r_b))
    if (d_b * m) % 2:
        m += 1
    sym_deg = degree_sequence(v_cd, n, d_b * m // 2, max_degree=m)
    sym_deg = sym_deg[rng.permutation(n)]
    c_deg = np.repeat(sym_deg, 2)
    ls, rs = _configuration(np.full(m, d_b), c_deg, rng)
    g = BipartiteGraph.from_edges(m, 2 * n, ls, rs)
    t = int(round(n * r_p))
    h = sample_bipartite(m, v_bd, v_pd, rng, n_right=t)
    return CodeInstance("C2", n, {"G": g, "H": h}, graph_seed=seed,
                        dither_seed=seed if dither_seed is None else dither_seed,
                        params={"d_b": int(d_b)}, rates={"R_b": r_b, "R_p": r_p},
                        ensembles={"v_cd": v_cd, "v_bd": v_bd, "v_pd": v_pd})


# --------------------------------------------------------------- file format

def save_instance(inst: CodeInstance, sink) -> None:
    w = sink.write
    w(f"{FORMAT_TAG} {FORMAT_VERSION}\n")
    head = [("kind", inst.kind), ("n", inst.n), ("graph_seed", inst.graph_seed), ("dither_seed", inst.dither_seed)]
    head += sorted(inst.params.items())
    w(" ".join(f"{k} {v}" for k, v in head) + "\n")
    for name, val in sorted(inst.rates.items()):
        w(f"rate {name} {float(val)!r}\n")
    for name, dist in sorted(inst.ensembles.items()):
        w(f"ensemble {name} {dist.degrees.size}\n")
        for d, v in zip(dist.degrees.tolist(), dist.fractions.tolist()):
            w(f"{d} {v!r}\n")
    for name, g in sorted(inst.graphs.items()):
        w(f"graph {name} {g.n_left} {g.n_right} {g.edge_count}\n")
        ptr = g.ptr.tolist()
        idx = g.idx.tolist()
        for i in range(g.n_left):
            w(" ".join(map(str, idx[ptr[i]:ptr[i + 1]])) + "\n")


def _int(tok: str, line: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise InstanceParseError(line, f"{what} must be an integer, got {tok!r}") from None


def _float(tok: str, line: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise InstanceParseError(line, f"{what} must be a number, got {tok!r}") from None


def load_instance(source) -> CodeInstance:
    lines = source.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    pos = 0
    while pos < len(lines) and lines[pos].startswith("#"):  # leading provenance comments
        pos += 1

    def take(what: str):
        nonlocal pos
        if pos >= len(lines):
            raise InstanceParseError(pos + 1, f"unexpected end of file, expected {what}")
        pos += 1
        return pos, lines[pos - 1].split()

    ln, tok = take("format header")
    if len(tok) != 2 or tok[0] != FORMAT_TAG:
        raise InstanceParseError(ln, "missing format header")
    version = _int(tok[1], ln, "format version")
    if version != FORMAT_VERSION:
        raise InstanceVersionError(f"instance format version {version} is not supported (expected {FORMAT_VERSION})")
    ln, tok = take("key/value header")
    if len(tok) % 2:
        raise InstanceParseError(ln, "header fields must come in key/value pairs")
    head = dict(zip(tok[0::2], tok[1::2]))
    for key in ("kind", "n", "graph_seed", "dither_seed"):
        if key not in head:
            raise InstanceParseError(ln, f"header is missing {key!r}")
    kind = head.pop("kind")
    n = _int(head.pop("n"), ln, "n")
    graph_seed = _int(head.pop("graph_seed"), ln, "graph_seed")
    dither_seed = _int(head.pop("dither_seed"), ln, "dither_seed")
    params = {k: _int(v, ln, k) for k, v in head.items()}
    rates, ensembles, graphs = {}, {}, {}
    while pos < len(lines):
        ln, tok = take("section")
        if not tok:
            raise InstanceParseError(ln, "blank line between sections")
        if tok[0] == "rate" and len(tok) == 3:
            rates[tok[1]] = _float(tok[2], ln, "rate")
        elif tok[0] == "ensemble" and len(tok) == 3:
            count = _int(tok[2], ln, "ensemble size")
            ds, vs = [], []
            for _ in range(count):
                eln, pair = take(f"ensemble {tok[1]} entry")
                if len(pair) != 2:
                    raise InstanceParseError(eln, "ensemble entry must be 'degree fraction'")
                ds.append(_int(pair[0], eln, "degree"))
                vs.append(_float(pair[1], eln, "fraction"))
            try:
                ensembles[tok[1]] = DegreeDistribution(np.array(ds), np.array(vs))
            except ValueError as exc:
                raise InstanceParseError(ln, str(exc)) from None
        elif tok[0] == "graph" and len(tok) == 5:
            name = tok[1]
            n_left = _int(tok[2], ln, "n_left")
            n_right = _int(tok[3], ln, "n_right")
            n_edges = _int(tok[4], ln, "edge count")
            rows = []
            for i in range(n_left):
                rln, row = take(f"adjacency of left node {i} in graph {name}")
                cols = [_int(c, rln, "neighbour index") for c in row]
                if any(c < 0 or c >= n_right for c in cols):
                    raise InstanceParseError(rln, f"graph {name}: neighbour index out of range")
                rows.append(cols)
            try:
                g = BipartiteGraph.from_adjacency(n_right, rows)
            except ValueError as exc:
                raise InstanceParseError(ln, f"graph {name}: {exc}") from None
            if g.edge_count != n_edges:
                raise InstanceParseError(ln, f"graph {name} declares {n_edges} edges, found {g.edge_count}")
            graphs[name] = g
        else:
            raise InstanceParseError(ln, f"unrecognised section {' '.join(tok[:2])!r}")
    try:
        return CodeInstance(kind, n, graphs, graph_seed, dither_seed, params, rates, ensembles)
    except ValueError as exc:
        raise InstanceParseError(pos, str(exc)) from None
