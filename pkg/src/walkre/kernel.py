"""Marginalized random-walk kernel between annotated candidates.

The kernel value between two graph views is the expected number of matching
walk pairs under per-step termination probability ``gamma``:

    K(G, G') = <S, X>   with   (I - T) X = Q

over the product space of vertex pairs (row-major, pair (i, j') at position
``i * |V'| + j``).  S holds start probabilities times the vertex kernel, Q
the termination probabilities, and T the transition probabilities times the
vertex and edge kernels.  Every row sum of T is at most ``(1 - gamma)**2``,
so both the direct solve and the fixed-point iteration are well posed.

Vertex and edge kernels are gated: vertices only match when their
``is_entity`` and ``in_sp`` flags agree, edges when their labels are equal
and their ``in_sp`` flags agree.  The three views FGK (full graph), SPK
(induced shortest-path subgraph), and NSPK (full graph with shortest-path
flags erased) can be combined by summing, optionally after cosine
normalization of each component.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvergenceError,
    EmptyGraphError,
    InvalidInputError,
    InvalidParameterError,
)
from .graphs import Candidate

VARIANTS = ("FGK", "SPK", "NSPK")

N_FEATURE_SLOTS = 5

# Product spaces up to this size are solved by direct factorization; larger
# ones fall back to fixed-point iteration.
DENSE_STATE_LIMIT = 4096

SOLVERS = ("auto", "dense", "fixed_point")


@dataclass(frozen=True)
class WalkParams:
    """Termination probability and solver configuration."""

    gamma: float = 0.1
    solver: str = "auto"
    fp_tolerance: float = 1e-10
    fp_max_iters: int = 10000

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise InvalidParameterError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.solver not in SOLVERS:
            raise InvalidParameterError(
                f"solver must be one of {SOLVERS}, got {self.solver!r}"
            )
        if self.fp_tolerance <= 0.0:
            raise InvalidParameterError("fp_tolerance must be positive")
        if self.fp_max_iters < 1:
            raise InvalidParameterError("fp_max_iters must be at least 1")


@dataclass(frozen=True)
class KernelSpec:
    """Which kernel variants to sum, and whether to normalize each one."""

    components: tuple[str, ...] = ("SPK", "NSPK")
    normalize_each: bool = True

    def __post_init__(self):
        if not self.components:
            raise InvalidParameterError("kernel spec needs at least one component")
        for c in self.components:
            if c not in VARIANTS:
                raise InvalidParameterError(f"unknown kernel variant {c!r}")
        if len(set(self.components)) != len(self.components):
            raise InvalidParameterError("duplicate kernel variants are forbidden")

    def label(self) -> str:
        return "+".join(self.components)

    @classmethod
    def from_string(cls, text: str, normalize_each: bool = True) -> "KernelSpec":
        parts = tuple(p.strip() for p in text.split("+") if p.strip())
        return cls(components=parts, normalize_each=normalize_each)


@dataclass(frozen=True, eq=False)
class GraphView:
    """Array form of one candidate under one kernel variant."""

    features: np.ndarray  # (n, 5) strings
    is_entity: np.ndarray  # (n,) bool
    in_sp_vertex: np.ndarray  # (n,) bool
    edge_src: np.ndarray  # (E,) int
    edge_dst: np.ndarray  # (E,) int
    edge_labels: np.ndarray  # (E,) strings
    in_sp_edge: np.ndarray  # (E,) bool

    @property
    def n_vertices(self) -> int:
        return self.features.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_src.shape[0]


def variant_view(candidate: Candidate, variant: str) -> GraphView:
    """Project an annotated candidate onto a kernel variant's graph view.

    FGK keeps everything; SPK keeps exactly the in_sp-flagged vertices and
    edges (reindexed, ascending original order); NSPK keeps the full graph
    but forces every in_sp flag false.
    """
    if variant not in VARIANTS:
        raise InvalidParameterError(f"unknown kernel variant {variant!r}")
    graph = candidate.graph
    feats = np.array(
        [f.as_tuple() for f in graph.features()], dtype=np.str_
    ).reshape(graph.n_vertices, N_FEATURE_SLOTS)
    is_entity = np.array(candidate.is_entity, dtype=bool)
    in_sp_v = np.array(candidate.in_sp_vertex, dtype=bool)
    src = np.array([e.head for e in graph.edges], dtype=np.int64)
    dst = np.array([e.dependent for e in graph.edges], dtype=np.int64)
    labels = np.array([e.label for e in graph.edges], dtype=np.str_)
    in_sp_e = np.array(candidate.in_sp_edge, dtype=bool)

    if variant == "FGK":
        return GraphView(feats, is_entity, in_sp_v, src, dst, labels, in_sp_e)
    if variant == "NSPK":
        return GraphView(
            feats,
            is_entity,
            np.zeros_like(in_sp_v),
            src,
            dst,
            labels,
            np.zeros_like(in_sp_e),
        )
    # SPK: induced shortest-path subgraph
    keep_v = np.flatnonzero(in_sp_v)
    remap = {int(old): new for new, old in enumerate(keep_v)}
    keep_e = np.flatnonzero(in_sp_e)
    return GraphView(
        feats[keep_v],
        is_entity[keep_v],
        in_sp_v[keep_v],
        np.array([remap[int(s)] for s in src[keep_e]], dtype=np.int64),
        np.array([remap[int(d)] for d in dst[keep_e]], dtype=np.int64),
        labels[keep_e],
        in_sp_e[keep_e],
    )


def walk_distributions(
    view: GraphView, gamma: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform start, termination, and transition probabilities.

    Start probability is 1/|V| everywhere.  Vertices with outgoing edges
    terminate with probability ``gamma`` and spread ``1 - gamma`` uniformly
    over their outgoing edges; sinks terminate with probability 1.
    """
    n = view.n_vertices
    if n == 0:
        raise EmptyGraphError("graph view has no vertices")
    p_s = np.full(n, 1.0 / n)
    outdeg = np.bincount(view.edge_src, minlength=n)
    p_q = np.where(outdeg > 0, gamma, 1.0)
    if view.n_edges:
        p_t = (1.0 - gamma) / outdeg[view.edge_src]
    else:
        p_t = np.zeros(0)
    return p_s, p_q, p_t


def vertex_kernel(view1: GraphView, i: int, view2: GraphView, j: int) -> float:
    """Gated normalized count of equal feature slots, in [0, 1].

    Zero whenever the in_sp or is_entity flags disagree.  Each vertex has
    exactly 5 feature slots, so the self-kernel normalizer is constant.
    """
    if (
        view1.in_sp_vertex[i] != view2.in_sp_vertex[j]
        or view1.is_entity[i] != view2.is_entity[j]
    ):
        return 0.0
    common = int(np.sum(view1.features[i] == view2.features[j]))
    return common / N_FEATURE_SLOTS


def edge_kernel(view1: GraphView, e: int, view2: GraphView, e2: int) -> float:
    """1 iff the labels are equal and the in_sp flags agree, else 0."""
    if view1.in_sp_edge[e] != view2.in_sp_edge[e2]:
        return 0.0
    return 1.0 if view1.edge_labels[e] == view2.edge_labels[e2] else 0.0


def _vertex_kernel_matrix(view1: GraphView, view2: GraphView) -> np.ndarray:
    counts = (view1.features[:, None, :] == view2.features[None, :, :]).sum(axis=2)
    gate = (view1.in_sp_vertex[:, None] == view2.in_sp_vertex[None, :]) & (
        view1.is_entity[:, None] == view2.is_entity[None, :]
    )
    return np.where(gate, counts / N_FEATURE_SLOTS, 0.0)


def assemble_matrices(
    view1: GraphView, view2: GraphView, params: WalkParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Build the S and Q vectors and the T matrix over vertex pairs.

    Parallel edges between the same vertex pair accumulate into one T entry.
    """
    n1, n2 = view1.n_vertices, view2.n_vertices
    if n1 == 0 or n2 == 0:
        raise EmptyGraphError("graph view has no vertices")
    ps1, pq1, pt1 = walk_distributions(view1, params.gamma)
    ps2, pq2, pt2 = walk_distributions(view2, params.gamma)
    kv = _vertex_kernel_matrix(view1, view2)

    S = (np.outer(ps1, ps2) * kv).ravel()
    Q = np.outer(pq1, pq2).ravel()
    m = n1 * n2
    T = np.zeros((m, m))
    if view1.n_edges and view2.n_edges:
        ke = (view1.edge_labels[:, None] == view2.edge_labels[None, :]) & (
            view1.in_sp_edge[:, None] == view2.in_sp_edge[None, :]
        )
        w = np.outer(pt1, pt2) * kv[view1.edge_dst[:, None], view2.edge_dst[None, :]]
        w = np.where(ke, w, 0.0)
        rows = (view1.edge_src[:, None] * n2 + view2.edge_src[None, :]).ravel()
        cols = (view1.edge_dst[:, None] * n2 + view2.edge_dst[None, :]).ravel()
        np.add.at(T, (rows, cols), w.ravel())
    return S, Q, T


def _fixed_point_solve(
    Q: np.ndarray, T: np.ndarray, tolerance: float, max_iters: int
) -> tuple[np.ndarray, int]:
    X = Q.copy()
    delta = np.inf
    for iteration in range(1, max_iters + 1):
        X_next = Q + T @ X
        delta = float(np.max(np.abs(X_next - X))) if X.size else 0.0
        X = X_next
        if delta < tolerance:
            return X, iteration
    raise ConvergenceError(
        f"fixed-point solver did not reach {tolerance} within {max_iters} "
        f"iterations (last step {delta})",
        iterations=max_iters,
        residual=delta,
    )


def solve_walk_system(
    S: np.ndarray, Q: np.ndarray, T: np.ndarray, params: WalkParams
) -> float:
    """<S, X> with (I - T) X = Q, by direct factorization or fixed point."""
    m = S.shape[0]
    solver = params.solver
    if solver == "auto":
        solver = "dense" if m <= DENSE_STATE_LIMIT else "fixed_point"
    if solver == "dense":
        X = np.linalg.solve(np.eye(m) - T, Q)
    else:
        X, _ = _fixed_point_solve(Q, T, params.fp_tolerance, params.fp_max_iters)
    return float(S @ X)


def _pair_kernel(view1: GraphView, view2: GraphView, params: WalkParams) -> float:
    S, Q, T = assemble_matrices(view1, view2, params)
    return solve_walk_system(S, Q, T, params)


def rw_kernel(
    c1: Candidate, c2: Candidate, variant: str, params: WalkParams = WalkParams()
) -> float:
    """Random-walk kernel between two candidates under one variant."""
    return _pair_kernel(variant_view(c1, variant), variant_view(c2, variant), params)


def combined_kernel(
    c1: Candidate, c2: Candidate, spec: KernelSpec, params: WalkParams = WalkParams()
) -> float:
    """Sum of component kernels, each cosine-normalized when requested.

    The normalized value is K(x,y)/sqrt(K(x,x)K(y,y)), defined as 0 when
    either self-kernel vanishes.
    """
    total = 0.0
    for variant in spec.components:
        value = rw_kernel(c1, c2, variant, params)
        if spec.normalize_each:
            d1 = rw_kernel(c1, c1, variant, params)
            d2 = rw_kernel(c2, c2, variant, params)
            value = value / np.sqrt(d1 * d2) if d1 > 0.0 and d2 > 0.0 else 0.0
        total += value
    return total


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Symmetric matrix of combined kernel values over a candidate list."""

    n: int
    values: np.ndarray
    spec: KernelSpec
    params: WalkParams


def _annotate_pair_error(exc: ConvergenceError, i: int, j: int) -> ConvergenceError:
    return ConvergenceError(
        f"candidate pair ({i}, {j}): {exc}",
        iterations=exc.iterations,
        residual=exc.residual,
        pair=(i, j),
    )


def _pair_values(pairs, views_a, views_b, params, threads):
    def compute(pair):
        i, j = pair
        try:
            return _pair_kernel(views_a[i], views_b[j], params)
        except ConvergenceError as exc:
            raise _annotate_pair_error(exc, i, j) from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(compute, pairs))
    return [compute(p) for p in pairs]


def _normalize_square(K: np.ndarray) -> np.ndarray:
    diag = np.diag(K).copy()
    positive = diag > 0.0
    mask = positive[:, None] & positive[None, :]
    denom = np.ones_like(K)
    np.sqrt(np.outer(diag, diag), where=mask, out=denom)
    out = np.where(mask, K / denom, 0.0)
    # exact unit diagonal for nonzero self-kernels
    np.fill_diagonal(out, np.where(positive, 1.0, 0.0))
    return out


def _variant_gram(
    candidates: list[Candidate], variant: str, params: WalkParams, threads: int
) -> np.ndarray:
    n = len(candidates)
    views = [variant_view(c, variant) for c in candidates]
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    values = _pair_values(pairs, views, views, params, threads)
    K = np.zeros((n, n))
    for (i, j), v in zip(pairs, values):
        K[i, j] = v
        K[j, i] = v
    return K


def gram_matrix(
    candidates: list[Candidate],
    spec: KernelSpec,
    params: WalkParams = WalkParams(),
    threads: int = 1,
) -> GramMatrix:
    """Combined-kernel Gram matrix over all unordered candidate pairs.

    Each unordered pair is computed exactly once, so the result is exactly
    symmetric and independent of the thread count.
    """
    n = len(candidates)
    if n == 0:
        raise InvalidInputError("cannot build a Gram matrix over zero candidates")
    total = np.zeros((n, n))
    for variant in spec.components:
        K = _variant_gram(candidates, variant, params, threads)
        if spec.normalize_each:
            K = _normalize_square(K)
        total += K
    return GramMatrix(n=n, values=total, spec=spec, params=params)


def kernel_rows(
    test_candidates: list[Candidate],
    train_candidates: list[Candidate],
    spec: KernelSpec,
    params: WalkParams = WalkParams(),
    threads: int = 1,
) -> np.ndarray:
    """Combined kernel values of every test candidate against every training
    candidate, shape (len(test), len(train))."""
    if not test_candidates or not train_candidates:
        raise InvalidInputError("kernel_rows needs nonempty candidate lists")
    n_test, n_train = len(test_candidates), len(train_candidates)
    total = np.zeros((n_test, n_train))
    for variant in spec.components:
        views_test = [variant_view(c, variant) for c in test_candidates]
        views_train = [variant_view(c, variant) for c in train_candidates]
        pairs = [(i, j) for i in range(n_test) for j in range(n_train)]
        values = _pair_values(pairs, views_test, views_train, params, threads)
        R = np.array(values).reshape(n_test, n_train)
        if spec.normalize_each:
            d_test = np.array(
                [_pair_kernel(v, v, params) for v in views_test]
            )
            d_train = np.array(
                [_pair_kernel(v, v, params) for v in views_train]
            )
            mask = (d_test[:, None] > 0.0) & (d_train[None, :] > 0.0)
            denom = np.sqrt(np.outer(d_test, d_train), where=mask, out=np.ones_like(R))
            R = np.where(mask, R / denom, 0.0)
        total += R
    return total


# ---------------------------------------------------------------------------
# file formats

GRAM_MAGIC = "walkre-gram v1"
ROWS_MAGIC = "walkre-rows v1"


def _format_values(row: np.ndarray) -> str:
    return " ".join("%.17g" % v for v in row)


def write_gram_file(path, gram: GramMatrix) -> None:
    normalized = 1 if gram.spec.normalize_each else 0
    lines = [
        f"{GRAM_MAGIC} n={gram.n} spec={gram.spec.label()} "
        f"gamma={gram.params.gamma!r} normalized={normalized}"
    ]
    lines.extend(_format_values(row) for row in gram.values)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_header(line: str, magic: str) -> dict:
    if not line.startswith(magic + " "):
        raise InvalidInputError(f"expected header starting with {magic!r}")
    meta = {}
    for part in line[len(magic) :].split():
        key, _, value = part.partition("=")
        meta[key] = value
    return meta


def read_gram_file(path) -> tuple[np.ndarray, dict]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        meta = _parse_header(header, GRAM_MAGIC)
        n = int(meta["n"])
        values = np.array(
            [[float(x) for x in fh.readline().split()] for _ in range(n)]
        ).reshape(n, n) if n else np.zeros((0, 0))
    if values.shape != (n, n):
        raise InvalidInputError(f"gram file body does not match n={n}")
    meta["n"] = n
    meta["gamma"] = float(meta["gamma"])
    meta["normalized"] = bool(int(meta["normalized"]))
    return values, meta


def write_rows_file(
    path, values: np.ndarray, spec: KernelSpec, params: WalkParams
) -> None:
    rows, cols = values.shape
    normalized = 1 if spec.normalize_each else 0
    lines = [
        f"{ROWS_MAGIC} rows={rows} cols={cols} spec={spec.label()} "
        f"gamma={params.gamma!r} normalized={normalized}"
    ]
    lines.extend(_format_values(row) for row in values)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_rows_file(path) -> tuple[np.ndarray, dict]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        meta = _parse_header(header, ROWS_MAGIC)
        rows, cols = int(meta["rows"]), int(meta["cols"])
        values = np.array(
            [[float(x) for x in fh.readline().split()] for _ in range(rows)]
        ).reshape(rows, cols) if rows else np.zeros((0, cols))
    if values.shape != (rows, cols):
        raise InvalidInputError(f"rows file body does not match {rows}x{cols}")
    meta["rows"], meta["cols"] = rows, cols
    meta["gamma"] = float(meta["gamma"])
    meta["normalized"] = bool(int(meta["normalized"]))
    return values, meta


def write_sidecar(path, identifiers: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ident in identifiers:
            fh.write(ident + "\n")


def read_sidecar(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]
