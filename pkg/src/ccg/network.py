"""Graph data model, TNTP ingestion, preprocessing, and the shortest-path LMO.

The TNTP link table is the public text convention: ``<KEY> value`` metadata
lines, a table header starting with ``~``, and whitespace-separated data rows
terminated by ``;``.  Columns map positionally to (init_node, term_node,
capacity, length, free_flow_time, b, power, speed, toll, link_type).

Preprocessing merges antiparallel arcs into undirected edges (taking the
minimum of the two free-flow times), keeps the largest connected component,
and indexes edges lexicographically by (min endpoint, max endpoint); that
index is the resource index used everywhere else.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import NoPathError, ParseError, ValidationError

TNTP_COLUMNS = (
    "init_node",
    "term_node",
    "capacity",
    "length",
    "free_flow_time",
    "b",
    "power",
    "speed",
    "toll",
    "link_type",
)


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    free_flow_time: float
    raw_attributes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DirectedNetwork:
    node_count: int
    arcs: tuple

    def __post_init__(self):
        if self.node_count < 1:
            raise ValidationError("node_count must be positive")
        for a in self.arcs:
            if not (1 <= a.tail <= self.node_count and 1 <= a.head <= self.node_count):
                raise ValidationError(
                    f"arc {a.tail}->{a.head} references a node outside [1, {self.node_count}]"
                )
            if a.free_flow_time < 0:
                raise ValidationError(f"arc {a.tail}->{a.head} has negative free-flow time")


@dataclass(frozen=True)
class Network:
    """Undirected resource graph; edge index i in [0, n) is the resource index."""

    node_count: int
    edges: tuple            # ((u, v), ...) with u < v, lexicographically sorted
    d: np.ndarray           # per-edge free-flow weight
    coordinates: dict | None = None

    def __post_init__(self):
        seen = set()
        for (u, v) in self.edges:
            if u == v:
                raise ValidationError(f"self-loop on node {u}")
            if not (u < v):
                raise ValidationError(f"edge ({u},{v}) not stored as (min,max)")
            if (u, v) in seen:
                raise ValidationError(f"duplicate edge ({u},{v})")
            seen.add((u, v))
        if len(self.d) != len(self.edges):
            raise ValidationError("d and edges length mismatch")
        if np.any(np.asarray(self.d) < 0):
            raise ValidationError("negative free-flow weight")

    @property
    def n(self):
        return len(self.edges)

    @property
    def nodes(self):
        out = set()
        for u, v in self.edges:
            out.add(u)
            out.add(v)
        return out

    def csr(self):
        """CSR adjacency over node-id slots (cached): indptr, adj_node, adj_edge."""
        cached = self.__dict__.get("_csr")
        if cached is not None:
            return cached
        slots = self.node_count + 1
        deg = np.zeros(slots + 1, dtype=np.int64)
        for (u, v) in self.edges:
            deg[u + 1] += 1
            deg[v + 1] += 1
        indptr = np.cumsum(deg)
        fill = indptr[:-1].copy()
        adj_node = np.empty(indptr[-1], dtype=np.int64)
        adj_edge = np.empty(indptr[-1], dtype=np.int64)
        for e, (u, v) in enumerate(self.edges):
            adj_node[fill[u]] = v
            adj_edge[fill[u]] = e
            fill[u] += 1
            adj_node[fill[v]] = u
            adj_edge[fill[v]] = e
            fill[v] += 1
        self.__dict__["_csr"] = (indptr, adj_node, adj_edge)
        return self.__dict__["_csr"]


def strategy_to_incidence(strategy, n):
    vec = np.zeros(n, dtype=np.uint8)
    for i in strategy:
        vec[i] = 1
    return vec


def incidence_to_strategy(vec):
    return tuple(int(i) for i in np.flatnonzero(vec))


@dataclass(frozen=True)
class FamilySpec:
    """Which combinatorial strategy family to compile over a network's edges."""

    kind: str                       # st_paths | hamiltonian_st_paths | steiner_cycles
    s: int | None = None
    t: int | None = None
    terminals: tuple = ()

    def __post_init__(self):
        if self.kind in ("st_paths", "hamiltonian_st_paths"):
            if self.s is None or self.t is None:
                raise ValidationError(f"{self.kind} needs s and t")
            if self.s == self.t:
                raise ValidationError("s and t must differ")
        elif self.kind == "steiner_cycles":
            if not self.terminals:
                raise ValidationError("steiner_cycles needs a nonempty terminal set")
            if len(set(self.terminals)) != len(self.terminals):
                raise ValidationError("duplicate terminals")
        else:
            raise ValidationError(f"unknown family kind {self.kind!r}")

    @classmethod
    def st_paths(cls, s, t):
        return cls("st_paths", s=s, t=t)

    @classmethod
    def hamiltonian_st_paths(cls, s, t):
        return cls("hamiltonian_st_paths", s=s, t=t)

    @classmethod
    def steiner_cycles(cls, terminals):
        return cls("steiner_cycles", terminals=tuple(terminals))


def parse_tntp(text):
    """Parse TNTP link-table text into a DirectedNetwork.

    Raises ParseError (with line number) on malformed metadata or short rows,
    ValidationError when a row references a node beyond the declared count.
    """
    if hasattr(text, "read"):
        text = text.read()
    meta = {}
    arcs = []
    node_count = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("~"):
            continue
        if line.startswith("<"):
            if ">" not in line:
                raise ParseError("metadata line missing closing '>'", line=lineno)
            key, _, value = line.partition(">")
            key = key[1:].strip()
            value = value.strip()
            meta[key] = value
            if key == "NUMBER OF NODES":
                try:
                    node_count = int(value)
                except ValueError:
                    raise ParseError(f"bad NUMBER OF NODES value {value!r}", line=lineno)
            continue
        fields = line.rstrip(";").split()
        values = []
        for tok in fields:
            try:
                values.append(float(tok))
            except ValueError:
                raise ParseError(f"non-numeric field {tok!r}", line=lineno)
        if len(values) < 3:
            raise ParseError(f"link row has {len(values)} fields, need at least 3", line=lineno)
        tail, head = int(values[0]), int(values[1])
        raw_attrs = {name: values[i] for i, name in enumerate(TNTP_COLUMNS) if i < len(values)}
        fft = values[4] if len(values) > 4 else 0.0
        if node_count is None:
            raise ParseError("link row before <NUMBER OF NODES> header", line=lineno)
        if not (1 <= tail <= node_count and 1 <= head <= node_count):
            raise ValidationError(
                f"line {lineno}: node id {max(tail, head)} exceeds declared count {node_count}"
            )
        arcs.append(Arc(tail, head, fft, raw_attrs))
    if node_count is None:
        raise ParseError("missing <NUMBER OF NODES> metadata header")
    return DirectedNetwork(node_count=node_count, arcs=tuple(arcs))


def parse_coordinates(text):
    """Node coordinate rows: node_id x y (comments with ~, blanks skipped)."""
    coords = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("~") or line.startswith("<"):
            continue
        parts = line.rstrip(";").split()
        if len(parts) < 3:
            raise ParseError("coordinate row needs node_id x y", line=lineno)
        try:
            coords[int(float(parts[0]))] = (float(parts[1]), float(parts[2]))
        except ValueError:
            raise ParseError("non-numeric coordinate field", line=lineno)
    return coords


def symmetrize(net):
    """Merge antiparallel arcs into undirected edges and keep one component.

    The merged free-flow weight is the minimum over all arcs between the two
    endpoints (optimistic merge); self-loops are dropped with a warning.
    Component ties break toward the component containing the smallest node id.
    """
    if not net.arcs:
        raise ValidationError("cannot symmetrize a network with no arcs")
    weight = {}
    dropped_loops = 0
    for a in net.arcs:
        if a.tail == a.head:
            dropped_loops += 1
            continue
        key = (min(a.tail, a.head), max(a.tail, a.head))
        w = weight.get(key)
        weight[key] = a.free_flow_time if w is None else min(w, a.free_flow_time)
    if dropped_loops:
        warnings.warn(f"dropped {dropped_loops} self-loop arc(s)")
    if not weight:
        raise ValidationError("no non-loop arcs to symmetrize")

    adj = {}
    for (u, v) in weight:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    unvisited = set(adj)
    components = []
    while unvisited:
        start = min(unvisited)
        comp = {start}
        stack = [start]
        unvisited.discard(start)
        while stack:
            x = stack.pop()
            for yn in adj[x]:
                if yn in unvisited:
                    unvisited.discard(yn)
                    comp.add(yn)
                    stack.append(yn)
        components.append(comp)
    components.sort(key=lambda c: (-len(c), min(c)))
    keep = components[0]

    edges = sorted(k for k in weight if k[0] in keep)
    d = np.array([weight[k] for k in edges], dtype=np.float64)
    return Network(node_count=net.node_count, edges=tuple(edges), d=d)


def lift(net):
    """Re-express a Network as a DirectedNetwork with one arc per edge."""
    arcs = tuple(Arc(u, v, float(w)) for (u, v), w in zip(net.edges, net.d))
    return DirectedNetwork(node_count=net.node_count, arcs=arcs)


def normalize_freeflow(net):
    """Scale d so the largest weight is 1; all-zero weights stay and warn."""
    if not net.edges:
        raise ValidationError("cannot normalize a network with no edges")
    top = float(np.max(net.d))
    if top <= 0.0:
        warnings.warn("all free-flow weights are zero; skipping normalization")
        return net
    return Network(
        node_count=net.node_count,
        edges=net.edges,
        d=net.d / top,
        coordinates=net.coordinates,
    )


def load_network(path, coords_path=None):
    """parse -> symmetrize -> normalize pipeline from a TNTP file on disk."""
    with open(path, "r", encoding="utf-8") as fh:
        directed = parse_tntp(fh.read())
    net = normalize_freeflow(symmetrize(directed))
    if coords_path is not None:
        with open(coords_path, "r", encoding="utf-8") as fh:
            coords = parse_coordinates(fh.read())
        net = Network(net.node_count, net.edges, net.d, coordinates=coords)
    return net


def induced_subgraph(net, nodes):
    """Restrict to an explicit node list (config-driven subgraph extraction)."""
    keep = set(nodes)
    idx = [i for i, (u, v) in enumerate(net.edges) if u in keep and v in keep]
    if not idx:
        raise ValidationError("subgraph node list induces no edges")
    return Network(
        node_count=net.node_count,
        edges=tuple(net.edges[i] for i in idx),
        d=np.asarray(net.d)[idx].copy(),
        coordinates=net.coordinates,
    )


def euclidean_weights(net):
    """Replace d by Euclidean edge lengths from node coordinates."""
    if not net.coordinates:
        raise ValidationError("network has no coordinates")
    d = np.empty(net.n)
    for i, (u, v) in enumerate(net.edges):
        try:
            xu, yu = net.coordinates[u]
            xv, yv = net.coordinates[v]
        except KeyError as missing:
            raise ValidationError(f"no coordinates for node {missing}")
        d[i] = float(np.hypot(xu - xv, yu - yv))
    return Network(net.node_count, net.edges, d, coordinates=net.coordinates)


def shortest_path_lmo(net, weights, s, t):
    """Minimum-weight s-t path as a Strategy (sorted edge-index tuple).

    Nonnegative weights only; ties resolve through the deterministic
    priority-queue order (smaller node id pops first, smaller edge index kept).
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (net.n,):
        raise ValidationError(f"weights must have shape ({net.n},)")
    if np.any(weights < 0):
        raise ValidationError("negative edge weight")
    nodes = net.nodes
    if s not in nodes or t not in nodes:
        raise NoPathError(f"endpoint {s if s not in nodes else t} not in the component")
    indptr, adj_node, adj_edge = net.csr()
    dist, pred_edge, pred_node = _kernels.dijkstra_sssp(
        indptr, adj_node, adj_edge, weights, s, net.node_count + 1
    )
    if not np.isfinite(dist[t]):
        raise NoPathError(f"no path from {s} to {t}")
    path = []
    v = t
    while v != s:
        path.append(int(pred_edge[v]))
        v = int(pred_node[v])
    return tuple(sorted(path))
