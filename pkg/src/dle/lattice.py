"""Massless scalar field on a tube-topology 2D spacetime lattice.

Each time slice is a closed loop of vertices; spacelike edges join
vertices of one slice and timelike edges join neighbouring slices.
Slices with fewer vertices than the widest one are padded with virtual
vertices, which carry no edges.  The action is a weighted sum of squared
field differences over edges and is split into per-step contributions by
halving the weight of every spacelike edge on an inner slice.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import _frozen
from .timestep import TimeStepSystem, ValidationError


class EdgeKind(str, enum.Enum):
    INTERIOR_SPACELIKE = "interior_spacelike"
    INTERIOR_TIMELIKE = "interior_timelike"
    BOUNDARY_SPACELIKE = "boundary_spacelike"
    BOUNDARY_TIMELIKE = "boundary_timelike"


_WEIGHTS = {
    EdgeKind.INTERIOR_SPACELIKE: 1.0,
    EdgeKind.INTERIOR_TIMELIKE: -2.0,
    EdgeKind.BOUNDARY_SPACELIKE: 0.5,
    EdgeKind.BOUNDARY_TIMELIKE: -1.0,
}

_SPLIT_KINDS = (EdgeKind.INTERIOR_TIMELIKE, EdgeKind.BOUNDARY_SPACELIKE)


def edge_weight(kind, split=True):
    """Weight of an edge: dual area over squared length, in lattice units.

    With ``split=True`` (per-step lattices) only interior timelike (-2) and
    boundary spacelike (1/2) edges exist.  The other two kinds are only
    meaningful for an unsplit multi-step lattice.
    """
    kind = EdgeKind(kind)
    if split and kind not in _SPLIT_KINDS:
        raise ValueError(f"{kind.value} edges do not occur in a split tube lattice")
    return _WEIGHTS[kind]


@dataclass(frozen=True)
class LatticeSpec:
    """Vertices per slice and the two edge families.

    `slices[n]` lists vertex ids of slice n in local order; `virtual`
    holds the ids that are padding.  Spacelike edges are ``(n, i, j)``
    with both ids in slice n, timelike edges ``(n, i, j)`` with i in
    slice n and j in slice n+1.  Repeated edges are allowed and their
    weights add up.
    """

    slices: tuple
    spacelike: tuple = ()
    timelike: tuple = ()
    virtual: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "slices", tuple(tuple(int(v) for v in s) for s in self.slices))
        object.__setattr__(self, "spacelike", tuple(tuple(int(v) for v in e) for e in self.spacelike))
        object.__setattr__(self, "timelike", tuple(tuple(int(v) for v in e) for e in self.timelike))
        object.__setattr__(self, "virtual", frozenset(int(v) for v in self.virtual))
        self._validate()

    def _validate(self):
        if not self.slices:
            raise ValidationError("lattice has no slices")
        where = {}
        for n, sl in enumerate(self.slices):
            for v in sl:
                if v <= 0:
                    raise ValidationError(f"vertex id {v} in slice {n} is not a positive integer")
                if v in where:
                    raise ValidationError(f"vertex id {v} appears more than once")
                where[v] = n
        unknown = self.virtual - where.keys()
        if unknown:
            raise ValidationError(f"virtual ids {sorted(unknown)} are not in any slice")

        def check(kind, edge, dn):
            if len(edge) != 3:
                raise ValidationError(f"{kind} edge {list(edge)} must have 3 entries")
            n, i, j = edge
            if not 0 <= n < len(self.slices) - dn:
                raise ValidationError(f"{kind} edge {list(edge)}: slice {n} out of range")
            if i == j:
                raise ValidationError(f"{kind} edge {list(edge)} connects a vertex to itself")
            for v, m in ((i, n), (j, n + dn)):
                if where.get(v) != m:
                    raise ValidationError(f"{kind} edge {list(edge)}: vertex {v} is not in slice {m}")
                if v in self.virtual:
                    raise ValidationError(f"{kind} edge {list(edge)} touches virtual vertex {v}")

        for e in self.spacelike:
            check("spacelike", e, 0)
        for e in self.timelike:
            check("timelike", e, 1)

    @property
    def t(self):
        return len(self.slices) - 1

    @property
    def q(self):
        return max(len(s) for s in self.slices)

    @property
    def N(self):
        return self.q * (self.t + 1)

    def index(self, n, vertex):
        """Global index of a vertex given its slice."""
        return n * self.q + self.slices[n].index(vertex)

    def index_map(self):
        """``{vertex id: global index}`` for all listed vertices."""
        return {v: n * self.q + k for n, sl in enumerate(self.slices) for k, v in enumerate(sl)}

    def weighted_edges(self):
        """``(i, j, w)`` with global indices, using unsplit weights."""
        out = []
        for n, i, j in self.spacelike:
            kind = EdgeKind.BOUNDARY_SPACELIKE if n in (0, self.t) else EdgeKind.INTERIOR_SPACELIKE
            out.append((self.index(n, i), self.index(n, j), edge_weight(kind, split=False)))
        for n, i, j in self.timelike:
            out.append((self.index(n, i), self.index(n + 1, j), edge_weight(EdgeKind.INTERIOR_TIMELIKE)))
        return out

    def step_edges(self, n):
        """Edges of the isolated step lattice between slices n and n+1, split weights."""
        out = []
        w_s = edge_weight(EdgeKind.BOUNDARY_SPACELIKE)
        for m, i, j in self.spacelike:
            if m in (n, n + 1):
                out.append((self.index(m, i), self.index(m, j), w_s))
        w_t = edge_weight(EdgeKind.INTERIOR_TIMELIKE)
        for m, i, j in self.timelike:
            if m == n:
                out.append((self.index(n, i), self.index(n + 1, j), w_t))
        return out


@dataclass(frozen=True)
class DynamicalMatrix:
    K: np.ndarray
    index: dict

    @property
    def N(self):
        return self.K.shape[0]


def _assemble(N, edges):
    K = np.zeros((N, N))
    for i, j, w in edges:
        K[i, i] += w
        K[j, j] += w
        K[i, j] -= w
        K[j, i] -= w
    return K


def build_dynamical_matrix(spec: LatticeSpec) -> DynamicalMatrix:
    """``K`` with ``S = 1/2 phi^T K phi``; zero row sums, zero virtual rows."""
    return DynamicalMatrix(_frozen(_assemble(spec.N, spec.weighted_edges())), spec.index_map())


def step_matrix(spec: LatticeSpec, n):
    """Dynamical matrix of the step lattice between slices n and n+1 (N x N)."""
    return _assemble(spec.N, spec.step_edges(n))


def split_into_steps(spec: LatticeSpec):
    """One TimeStepSystem per step: ``L = K+_(n)``, ``R = K_(n,n+1)``, ``Rbar = -K-_(n+1)``."""
    if spec.t < 1:
        raise ValidationError("need >= 2 slices")
    q = spec.q
    steps = []
    for n in range(spec.t):
        Ks = step_matrix(spec, n)
        a, b, c = n * q, (n + 1) * q, (n + 2) * q
        steps.append(TimeStepSystem(L=Ks[a:b, a:b], R=Ks[a:b, b:c], Rbar=0.0 - Ks[b:c, b:c]))
    return steps


def total_action(spec: LatticeSpec, phi):
    """Edge sum ``1/2 sum w_ij (phi_i - phi_j)^2``."""
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.size != spec.N:
        raise ValidationError(f"field has length {phi.size}, expected {spec.N}")
    return 0.5 * sum(w * (phi[i] - phi[j]) ** 2 for i, j, w in spec.weighted_edges())


def slice_fields(spec: LatticeSpec, phi):
    """Split a global field vector into per-slice q-vectors."""
    phi = np.asarray(phi, dtype=float).reshape(spec.t + 1, spec.q)
    return list(phi)


# -- construction helpers -------------------------------------------------

def loop_edges(n, ids):
    """Spacelike edges closing `ids` into a loop; two vertices get a doubled edge."""
    k = len(ids)
    if k < 2:
        return []
    if k == 2:
        return [(n, ids[0], ids[1]), (n, ids[1], ids[0])]
    return [(n, ids[i], ids[(i + 1) % k]) for i in range(k)]


def strip_edges(n, lower, upper, moves):
    """Timelike edges of a triangulated strip between two loops.

    `moves` is a sequence of ``"L"``/``"U"`` advancing the lower or upper
    pointer, containing each letter as many times as the loop length.
    Duplicate edges (from loops of length one or two) are dropped.
    """
    a, b = len(lower), len(upper)
    if sorted(moves) != sorted("L" * a + "U" * b):
        raise ValueError("moves must advance each loop exactly once around")
    i = j = 0
    seen = {(0, 0)}
    order = [(0, 0)]
    for m in moves:
        if m == "L":
            i = (i + 1) % a
        else:
            j = (j + 1) % b
        if (i, j) not in seen:
            seen.add((i, j))
            order.append((i, j))
    return [(n, lower[i], upper[j]) for i, j in order]


def random_tube_lattice(rng, t=None, max_size=5, max_steps=4):
    """Random tube lattice with slices of 1..max_size real vertices."""
    t = int(rng.integers(1, max_steps + 1)) if t is None else t
    sizes = [int(rng.integers(1, max_size + 1)) for _ in range(t + 1)]
    q = max(sizes)
    slices, virtual, real = [], set(), []
    next_id = 1
    for k in sizes:
        ids = list(range(next_id, next_id + q))
        next_id += q
        real.append(ids[:k])
        virtual.update(ids[k:])
        slices.append(ids)
    spacelike, timelike = [], []
    for n, ids in enumerate(real):
        spacelike += loop_edges(n, ids)
    for n in range(t):
        moves = list("L" * len(real[n]) + "U" * len(real[n + 1]))
        rng.shuffle(moves)
        timelike += strip_edges(n, real[n], real[n + 1], moves)
    return LatticeSpec(slices=slices, spacelike=spacelike, timelike=timelike, virtual=virtual)


# -- JSON -----------------------------------------------------------------

_LATTICE_KEYS = {"slices", "spacelike", "timelike"}


def lattice_from_json(doc) -> LatticeSpec:
    """Build a LatticeSpec from the parsed JSON document."""
    if not isinstance(doc, dict):
        raise ValidationError("lattice document must be a JSON object")
    extra = set(doc) - _LATTICE_KEYS
    if extra:
        raise ValidationError(f"unknown key(s) in lattice document: {sorted(extra)}")
    if "slices" not in doc:
        raise ValidationError("lattice document is missing key 'slices'")
    if not isinstance(doc["slices"], list):
        raise ValidationError("key 'slices' must be an array")
    slices, virtual = [], set()
    for n, sl in enumerate(doc["slices"]):
        if not isinstance(sl, list):
            raise ValidationError(f"slices[{n}] must be an array")
        ids = []
        for v in sl:
            if isinstance(v, dict):
                if set(v) - {"id", "virtual"} or "id" not in v:
                    raise ValidationError(f"slices[{n}]: bad vertex object {v}")
                vid = v["id"]
                if v.get("virtual", False):
                    virtual.add(vid)
            else:
                vid = v
            if not isinstance(vid, int) or isinstance(vid, bool):
                raise ValidationError(f"slices[{n}]: vertex id {vid!r} is not an integer")
            ids.append(vid)
        slices.append(ids)
    for key in ("spacelike", "timelike"):
        if not isinstance(doc.get(key, []), list):
            raise ValidationError(f"key {key!r} must be an array")
        for e in doc.get(key, []):
            if not (isinstance(e, list) and all(isinstance(x, int) and not isinstance(x, bool) for x in e)):
                raise ValidationError(f"{key} entry {e!r} must be an array of integers")
    return LatticeSpec(
        slices=slices,
        spacelike=doc.get("spacelike", []),
        timelike=doc.get("timelike", []),
        virtual=virtual,
    )


def lattice_to_json(spec: LatticeSpec):
    return {
        "slices": [[{"id": v, "virtual": True} if v in spec.virtual else v for v in sl] for sl in spec.slices],
        "spacelike": [list(e) for e in spec.spacelike],
        "timelike": [list(e) for e in spec.timelike],
    }


def load_lattice(path) -> LatticeSpec:
    with open(Path(path), encoding="utf-8") as fh:
        return lattice_from_json(json.load(fh))
