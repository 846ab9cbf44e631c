"""Power-network graphs: construction, CSV ingestion and synthetic instances."""

from __future__ import annotations

import csv
import io
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, minimum_spanning_tree
from scipy.spatial import Delaunay

__all__ = [
    "NetworkParseError",
    "ReferentialError",
    "SchemaError",
    "PowerGraph",
    "Uniform",
    "CliquePairSpec",
    "load_network",
    "save_network",
    "generate_clique_pair",
    "generate_random_graph",
    "generate_grid_network",
    "is_connected",
]


class NetworkParseError(ValueError):
    def __init__(self, message, row=None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


class ReferentialError(NetworkParseError):
    """A link references a vertex that does not exist."""


class SchemaError(NetworkParseError):
    """Missing columns or duplicate vertex ids."""


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PowerGraph:
    """Undirected power network ``G = (V, E)``.

    Vertices carry a surplus weight and an optional (lon, lat) position.
    Edges are stored as index pairs ``(n, m)`` with ``n < m`` and carry a
    non-negative transfer weight (1.0 unless given).
    """

    ids: tuple
    surplus: np.ndarray
    edges: np.ndarray
    transfer: np.ndarray = None
    positions: Optional[np.ndarray] = None
    _index: dict = field(default=None, repr=False)

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        if len(set(ids)) != len(ids):
            raise SchemaError("duplicate vertex id")
        surplus = _frozen(self.surplus, float).reshape(-1)
        if surplus.shape != (len(ids),):
            raise ValueError("one surplus weight per vertex required")
        if not np.all(np.isfinite(surplus)):
            raise ValueError("surplus weights must be finite")

        edges = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        transfer = (
            np.ones(len(edges)) if self.transfer is None else np.array(self.transfer, dtype=float)
        )
        if transfer.shape != (len(edges),):
            raise ValueError("one transfer weight per edge required")
        if len(edges):
            if edges.min() < 0 or edges.max() >= len(ids):
                raise ReferentialError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loops are not allowed")
            edges = np.sort(edges, axis=1)
            key = edges[:, 0] * len(ids) + edges[:, 1]
            if len(np.unique(key)) != len(key):
                raise ValueError("duplicate edge")
        if not (np.all(np.isfinite(transfer)) and np.all(transfer >= 0)):
            raise ValueError("transfer weights must be finite and non-negative")

        positions = self.positions
        if positions is not None:
            positions = _frozen(positions, float).reshape(len(ids), 2)

        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "surplus", surplus)
        object.__setattr__(self, "edges", _frozen(edges, np.int64).reshape(-1, 2))
        object.__setattr__(self, "transfer", _frozen(transfer, float))
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(ids)})

    @classmethod
    def from_edges(cls, ids, surplus, edges, transfer=None, positions=None) -> "PowerGraph":
        """Build from vertex ids and edges given as pairs of ids."""
        ids = [str(i) for i in ids]
        index = {v: i for i, v in enumerate(ids)}
        pairs = []
        for a, b in edges:
            try:
                pairs.append((index[str(a)], index[str(b)]))
            except KeyError as err:
                raise ReferentialError(f"unknown vertex {err.args[0]!r}") from None
        return cls(ids, surplus, pairs, transfer, positions)

    @property
    def num_vertices(self) -> int:
        return len(self.ids)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def index(self, vertex_id) -> int:
        return self._index[str(vertex_id)]

    def edge_ids(self) -> list[tuple[str, str]]:
        return [(self.ids[n], self.ids[m]) for n, m in self.edges]

    def with_surplus(self, surplus) -> "PowerGraph":
        return PowerGraph(self.ids, surplus, self.edges, self.transfer, self.positions)

    def __eq__(self, other):
        if not isinstance(other, PowerGraph):
            return NotImplemented
        same_pos = (self.positions is None and other.positions is None) or (
            self.positions is not None
            and other.positions is not None
            and np.array_equal(self.positions, other.positions)
        )
        return (
            self.ids == other.ids
            and np.array_equal(self.surplus, other.surplus)
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.transfer, other.transfer)
            and same_pos
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"PowerGraph(N={self.num_vertices}, |E|={self.num_edges})"


def is_connected(graph: PowerGraph) -> bool:
    n = graph.num_vertices
    if n <= 1:
        return True
    e = graph.edges
    adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    return ncomp == 1


# ---- CSV ingestion -----------------------------------------------------------


@dataclass(frozen=True)
class Uniform:
    """Weight policy: draw vertex surpluses from U[0, 1) with a fixed seed."""

    seed: int = 0


Source = Union[str, os.PathLike, io.TextIOBase]


def _rows(source: Source, required: tuple[str, ...], table: str):
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            yield from _rows(fh, required, table)
        return
    reader = csv.DictReader(source)
    header = [h.strip() for h in (reader.fieldnames or [])]
    reader.fieldnames = header
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{table} table lacks column(s) {', '.join(missing)}")
    for row in reader:
        # header is line 1
        lineno = reader.line_num
        if None in row or any(v is None for v in row.values()):
            raise NetworkParseError(f"{table}: wrong number of fields", lineno)
        yield lineno, header, {k: v.strip() for k, v in row.items()}


def _float(value: str, what: str, row: int) -> float:
    try:
        out = float(value)
    except ValueError:
        raise NetworkParseError(f"cannot parse {what} {value!r}", row) from None
    if not math.isfinite(out):
        raise NetworkParseError(f"non-finite {what} {value!r}", row)
    return out


def load_network(vertices: Source, links: Source, weight_policy: Union[str, Uniform] = "surplus") -> PowerGraph:
    """Read a vertices/links table pair into a :class:`PowerGraph`.

    ``weight_policy`` is either the name of a vertices column holding the
    surplus, or :class:`Uniform` for seeded U[0, 1) weights.  Links with a
    ``capacity`` column set the transfer weights; duplicate links (in either
    orientation) are collapsed, keeping the first.
    """
    ids, positions, weights = [], [], []
    seen = set()
    column = weight_policy if isinstance(weight_policy, str) else None
    for row, header, rec in _rows(vertices, ("id", "lon", "lat"), "vertices"):
        vid = rec["id"]
        if not vid:
            raise NetworkParseError("empty vertex id", row)
        if vid in seen:
            raise SchemaError(f"duplicate vertex id {vid!r}", row)
        seen.add(vid)
        ids.append(vid)
        positions.append((_float(rec["lon"], "lon", row), _float(rec["lat"], "lat", row)))
        if column is not None:
            if column not in header:
                raise SchemaError(f"vertices table lacks weight column {column!r}")
            weights.append(_float(rec[column], column, row))

    if isinstance(weight_policy, Uniform):
        weights = np.random.default_rng(weight_policy.seed).random(len(ids))
    elif column is None:
        raise TypeError(f"unsupported weight policy {weight_policy!r}")

    index = {v: i for i, v in enumerate(ids)}
    pairs, capacity, keys = [], [], set()
    for row, header, rec in _rows(links, ("id", "v1", "v2"), "links"):
        try:
            n, m = index[rec["v1"]], index[rec["v2"]]
        except KeyError as err:
            raise ReferentialError(f"link {rec['id']!r} references unknown vertex {err.args[0]!r}", row) from None
        if n == m:
            raise NetworkParseError(f"link {rec['id']!r} is a self-loop", row)
        key = (min(n, m), max(n, m))
        cap = _float(rec["capacity"], "capacity", row) if "capacity" in header and rec["capacity"] != "" else 1.0
        if key in keys:
            continue
        keys.add(key)
        pairs.append(key)
        capacity.append(cap)

    graph = PowerGraph(ids, weights, np.array(pairs, dtype=np.int64).reshape(-1, 2), capacity, positions)
    if not is_connected(graph):
        warnings.warn("network is disconnected; partitioning is still well-defined", stacklevel=2)
    return graph


def save_network(graph: PowerGraph, vertices: Source, links: Source) -> None:
    """Write ``graph`` in the format read by :func:`load_network`."""

    def write(target, header, rows):
        if isinstance(target, (str, os.PathLike)):
            with open(target, "w", newline="", encoding="utf-8") as fh:
                write(fh, header, rows)
            return
        w = csv.writer(target, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)

    pos = graph.positions if graph.positions is not None else np.zeros((graph.num_vertices, 2))
    write(
        vertices,
        ["id", "lon", "lat", "surplus"],
        [[i, repr(float(x)), repr(float(y)), repr(float(w))] for i, (x, y), w in zip(graph.ids, pos, graph.surplus)],
    )
    write(
        links,
        ["id", "v1", "v2", "capacity"],
        [[f"l{e}", graph.ids[n], graph.ids[m], repr(float(c))] for e, ((n, m), c) in enumerate(zip(graph.edges, graph.transfer))],
    )


# ---- synthetic instances -----------------------------------------------------


@dataclass(frozen=True)
class CliquePairSpec:
    n: int
    target_mean: float = 0.45
    k: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 2):
            raise ValueError(f"clique size must be an integer >= 2, got {self.n!r}")
        if not 0.0 <= self.target_mean < 1.0:
            raise ValueError("target mean surplus must lie in [0, 1)")


def _clique_weights(n: int, mean: float, rng: np.random.Generator) -> np.ndarray:
    spread = min(0.3, mean, np.nextafter(1.0 - mean, 0.0))
    signs = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(n)])
    if n % 2:
        signs[-1] = 0.0
    return mean + spread * rng.permutation(signs)


def generate_clique_pair(spec: CliquePairSpec) -> PowerGraph:
    """Two complete graphs on ``n`` vertices joined by one edge.

    Clique A is ``a0..a{n-1}``, clique B is ``b0..b{n-1}``; the bridge joins
    ``a0`` and ``b0``.  Surpluses alternate ``mean +/- spread`` within each
    clique so each clique averages exactly ``target_mean``.
    """
    n = spec.n
    rng = np.random.default_rng(spec.seed)
    ids = [f"a{i}" for i in range(n)] + [f"b{i}" for i in range(n)]
    weights = np.concatenate([_clique_weights(n, spec.target_mean, rng) for _ in range(2)])
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges += [(n + i, n + j) for i, j in edges]
    edges.append((0, n))
    return PowerGraph(ids, weights, edges)


def generate_random_graph(n: int, edge_probability: float, seed: int = 0) -> PowerGraph:
    """Connected Erdos-Renyi graph on ``n`` (2..8) vertices with U[0, 1) surpluses.

    Edge sets are redrawn until the graph is connected.
    """
    if not (isinstance(n, (int, np.integer)) and 2 <= n <= 8):
        raise ValueError(f"n must be an integer in 2..8, got {n!r}")
    if not 0.0 < edge_probability <= 1.0:
        raise ValueError("edge probability must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    weights = rng.random(n)
    iu, ju = np.triu_indices(n, 1)
    while True:
        mask = rng.random(len(iu)) < edge_probability
        graph = PowerGraph([str(i) for i in range(n)], weights, np.column_stack([iu[mask], ju[mask]]))
        if is_connected(graph):
            return graph


def generate_grid_network(
    n: int,
    seed: int = 0,
    mean_degree: float = 2.6,
    bbox: tuple[float, float, float, float] = (5.9, 47.3, 15.0, 55.0),
) -> PowerGraph:
    """Sparse planar transmission-like network with ``n`` substations.

    Positions are uniform in ``bbox`` (lon_min, lat_min, lon_max, lat_max);
    edges are the Euclidean minimum spanning tree of the Delaunay
    triangulation plus the shortest remaining Delaunay edges up to
    ``mean_degree``.  Surpluses are U[0, 1).
    """
    if n < 4:
        raise ValueError("grid networks need at least 4 vertices")
    rng = np.random.default_rng(seed)
    lo = np.array(bbox[:2])
    hi = np.array(bbox[2:])
    pos = lo + (hi - lo) * rng.random((n, 2))
    weights = rng.random(n)

    tri = Delaunay(pos)
    cand = set()
    for simplex in tri.simplices:
        for a in range(3):
            i, j = sorted((int(simplex[a]), int(simplex[(a + 1) % 3])))
            cand.add((i, j))
    cand = np.array(sorted(cand))
    length = np.linalg.norm(pos[cand[:, 0]] - pos[cand[:, 1]], axis=1)
    mst = minimum_spanning_tree(coo_matrix((length, (cand[:, 0], cand[:, 1])), shape=(n, n))).tocoo()
    chosen = {tuple(sorted((int(i), int(j)))) for i, j in zip(mst.row, mst.col)}
    target = int(round(mean_degree * n / 2))
    for e in np.argsort(length, kind="stable"):
        if len(chosen) >= target:
            break
        chosen.add(tuple(cand[e]))
    edges = sorted(chosen)
    return PowerGraph([f"s{i}" for i in range(n)], weights, edges, positions=pos)
