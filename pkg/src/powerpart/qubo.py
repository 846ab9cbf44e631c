"""Sparse binary quadratic models over named variables.

A :class:`QuadraticModel` is a mutable builder that accumulates linear,
pairwise and constant terms.  ``finalize()`` turns it into an immutable
:class:`Qubo` holding flat numpy arrays, which is what the solvers consume.

Variable names are plain tuples whose first element is a kind tag, for
example ``("v", n, p)`` for "vertex n sits in partition p" or
``("x", a, p)`` for the a-th slack bit of partition p.
"""

from __future__ import annotations

import io
from collections import defaultdict
from collections.abc import Hashable, Iterable, Sequence
from typing import Union

import numpy as np
import scipy.sparse as sp

__all__ = [
    "RegistryError",
    "DegreeError",
    "DimensionError",
    "VariableRegistry",
    "QuadraticModel",
    "Qubo",
    "combine",
]


class RegistryError(KeyError):
    """A variable name is unknown, or registered twice."""


class DegreeError(ValueError):
    """A term has more than two variables."""


class DimensionError(ValueError):
    """An assignment does not match the number of registered variables."""


class VariableRegistry:
    """Ordered bijection between structured variable names and dense indices."""

    def __init__(self, names: Iterable[Hashable] = ()):
        self._index: dict[Hashable, int] = {}
        self._names: list[Hashable] = []
        for name in names:
            self.add(name)

    def add(self, name: Hashable) -> int:
        if name in self._index:
            raise RegistryError(f"variable {name!r} already registered")
        idx = len(self._names)
        self._index[name] = idx
        self._names.append(name)
        return idx

    def index(self, name: Hashable) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise RegistryError(f"unknown variable {name!r}") from None

    def name(self, idx: int) -> Hashable:
        return self._names[idx]

    @property
    def names(self) -> tuple:
        return tuple(self._names)

    def kind(self, tag: str) -> np.ndarray:
        """Indices of every variable whose name starts with ``tag``."""
        return np.array(
            [i for i, n in enumerate(self._names) if isinstance(n, tuple) and n and n[0] == tag],
            dtype=np.int64,
        )

    def __contains__(self, name) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self):
        return iter(self._names)

    def __repr__(self) -> str:
        return f"VariableRegistry({len(self)} variables)"


Name = Hashable
Term = Union[tuple[float, Name], tuple[float, Name, Name]]


class QuadraticModel:
    """Mutable accumulator of QUBO terms over a shared :class:`VariableRegistry`.

    Terms accumulate additively.  Because variables are binary, ``x*x`` is
    folded into the linear coefficient of ``x``.
    """

    def __init__(self, registry: VariableRegistry | None = None):
        self.registry = registry if registry is not None else VariableRegistry()
        self.linear: defaultdict[int, float] = defaultdict(float)
        self.quadratic: defaultdict[tuple[int, int], float] = defaultdict(float)
        self.offset = 0.0

    def add_term(self, coefficient: float, *variables: Name) -> None:
        coefficient = float(coefficient)
        if not np.isfinite(coefficient):
            raise ValueError(f"non-finite coefficient {coefficient!r}")
        if len(variables) > 2:
            raise DegreeError(
                f"term of degree {len(variables)}; reduce it to pairwise form first"
            )
        idx = [self.registry.index(v) for v in variables]
        self._add_indexed(coefficient, idx)

    def _add_indexed(self, coefficient: float, idx: Sequence[int]) -> None:
        if len(idx) == 0:
            self.offset += coefficient
        elif len(idx) == 1 or idx[0] == idx[1]:
            self.linear[idx[0]] += coefficient
        else:
            i, j = idx
            if i > j:
                i, j = j, i
            self.quadratic[i, j] += coefficient

    def add_squared(
        self,
        terms: Iterable[tuple[float, Name]],
        constant: float = 0.0,
        scale: float = 1.0,
    ) -> None:
        """Add ``scale * (sum(coef * var) + constant) ** 2`` expanded in place."""
        coef: dict[int, float] = defaultdict(float)
        for c, name in terms:
            coef[self.registry.index(name)] += float(c)
        items = [(i, c) for i, c in coef.items() if c != 0.0]
        self.offset += scale * constant * constant
        for a, (i, ci) in enumerate(items):
            # x_i^2 = x_i
            self.linear[i] += scale * (ci * ci + 2.0 * constant * ci)
            for j, cj in items[a + 1:]:
                self._add_indexed(2.0 * scale * ci * cj, (i, j))

    def has_terms(self, name: Name) -> bool:
        idx = self.registry.index(name)
        if self.linear.get(idx, 0.0) != 0.0:
            return True
        return any(idx in pair for pair, c in self.quadratic.items() if c != 0.0)

    def finalize(self) -> "Qubo":
        n = len(self.registry)
        linear = np.zeros(n)
        for i, c in self.linear.items():
            linear[i] = c
        if self.quadratic:
            keys = np.array(list(self.quadratic.keys()), dtype=np.int64).reshape(-1, 2)
            vals = np.fromiter(self.quadratic.values(), dtype=float, count=len(keys))
        else:
            keys = np.zeros((0, 2), dtype=np.int64)
            vals = np.zeros(0)
        return Qubo(self.registry, linear, keys[:, 0], keys[:, 1], vals, self.offset)

    def evaluate(self, assignment) -> float:
        return self.finalize().evaluate(assignment)


class Qubo:
    """Immutable QUBO ``offset + sum_i h_i x_i + sum_{i<j} J_ij x_i x_j``.

    Pairs are stored upper-triangular (``row < col``), coalesced and sorted;
    zero coefficients are pruned.
    """

    def __init__(self, registry, linear, rows, cols, values, offset=0.0):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
        diag = lo == hi
        linear = np.array(linear, dtype=float)
        if diag.any():
            np.add.at(linear, lo[diag], values[diag])
            lo, hi, values = lo[~diag], hi[~diag], values[~diag]
        n = len(registry)
        if linear.shape != (n,):
            raise DimensionError(f"linear has shape {linear.shape}, expected ({n},)")
        if len(lo) and hi.max() >= n:
            raise DimensionError("pair index out of range")

        key = lo * n + hi
        uniq, inv = np.unique(key, return_inverse=True)
        summed = np.zeros(len(uniq))
        np.add.at(summed, inv, values)
        keep = summed != 0.0
        uniq, summed = uniq[keep], summed[keep]

        self.registry = registry
        self.linear = linear
        self.rows = uniq // n if n else uniq
        self.cols = uniq % n if n else uniq
        self.values = summed
        self.offset = float(offset)
        for arr in (self.linear, self.rows, self.cols, self.values):
            arr.setflags(write=False)
        self._csr = None

    @property
    def num_variables(self) -> int:
        return len(self.linear)

    @property
    def num_interactions(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return self.num_variables

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.num_variables:
            raise DimensionError(
                f"assignment has length {x.shape[-1]}, model has {self.num_variables} variables"
            )
        return x

    def evaluate(self, assignment) -> float:
        x = self._check(assignment).astype(float)
        if x.ndim != 1:
            raise DimensionError("evaluate expects a single assignment; use energies()")
        return float(
            self.offset + self.linear @ x + np.sum(self.values * x[self.rows] * x[self.cols])
        )

    def energies(self, samples) -> np.ndarray:
        """Vectorised evaluation of a ``(num_samples, num_variables)`` array."""
        X = self._check(samples).astype(float)
        X = np.atleast_2d(X)
        out = self.offset + X @ self.linear
        if self.num_interactions:
            out += (X[:, self.rows] * X[:, self.cols]) @ self.values
        return out

    def dense(self) -> np.ndarray:
        """Upper-triangular matrix with the linear terms on the diagonal."""
        Q = np.diag(self.linear)
        Q[self.rows, self.cols] = self.values
        return Q

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric coupling matrix in CSR form, zero diagonal."""
        if self._csr is None:
            n = self.num_variables
            r = np.concatenate([self.rows, self.cols])
            c = np.concatenate([self.cols, self.rows])
            v = np.concatenate([self.values, self.values])
            self._csr = sp.csr_matrix((v, (r, c)), shape=(n, n))
            self._csr.sort_indices()
        return self._csr

    def local_fields(self, x) -> np.ndarray:
        x = self._check(x).astype(float)
        return self.linear + self.adjacency() @ x

    def flip_deltas(self, x) -> np.ndarray:
        """Energy change of flipping each bit of ``x`` individually."""
        x = self._check(x)
        return (1.0 - 2.0 * x) * self.local_fields(x)

    def scaled(self, factor: float) -> "Qubo":
        return Qubo(
            self.registry,
            self.linear * factor,
            self.rows,
            self.cols,
            self.values * factor,
            self.offset * factor,
        )

    def coefficient_magnitudes(self) -> np.ndarray:
        mags = np.abs(np.concatenate([self.linear, self.values]))
        return mags[mags > 0]

    # ---- text serialisation -------------------------------------------------

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# variables {self.num_variables}\n")
        buf.write(f"c {self.offset!r}\n")
        for i in np.flatnonzero(self.linear):
            buf.write(f"l {i} {float(self.linear[i])!r}\n")
        for i, j, v in zip(self.rows, self.cols, self.values):
            buf.write(f"q {i} {j} {float(v)!r}\n")
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text: str, registry: VariableRegistry | None = None) -> "Qubo":
        offset = 0.0
        lin: dict[int, float] = defaultdict(float)
        rows, cols, vals = [], [], []
        declared = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "variables":
                    declared = int(parts[1])
                continue
            parts = line.split()
            try:
                if parts[0] == "c" and len(parts) == 2:
                    offset += float(parts[1])
                elif parts[0] == "l" and len(parts) == 3:
                    lin[int(parts[1])] += float(parts[2])
                elif parts[0] == "q" and len(parts) == 4:
                    rows.append(int(parts[1]))
                    cols.append(int(parts[2]))
                    vals.append(float(parts[3]))
                else:
                    raise ValueError
            except ValueError:
                raise ValueError(f"line {lineno}: cannot parse {raw!r}") from None
        used = max([*lin.keys(), *rows, *cols], default=-1) + 1
        n = declared if declared is not None else used
        if registry is None:
            registry = VariableRegistry(range(n))
        elif len(registry) < used:
            raise DimensionError("registry smaller than the indices in the file")
        linear = np.zeros(len(registry))
        for i, c in lin.items():
            linear[i] = c
        return cls(registry, linear, rows, cols, vals, offset)

    @classmethod
    def load(cls, path, registry: VariableRegistry | None = None) -> "Qubo":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), registry)

    def __repr__(self) -> str:
        return (
            f"Qubo({self.num_variables} variables, {self.num_interactions} interactions, "
            f"offset={self.offset:g})"
        )


def combine(parts: Iterable[tuple[float, Qubo]]) -> Qubo:
    """Weighted sum of models that share one registry."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to combine")
    registry = parts[0][1].registry
    for _, q in parts:
        if q.registry is not registry:
            raise RegistryError("models must share a registry to be combined")
    linear = sum(w * q.linear for w, q in parts)
    rows = np.concatenate([q.rows for _, q in parts])
    cols = np.concatenate([q.cols for _, q in parts])
    vals = np.concatenate([w * q.values for w, q in parts])
    offset = sum(w * q.offset for w, q in parts)
    return Qubo(registry, linear, rows, cols, vals, offset)
