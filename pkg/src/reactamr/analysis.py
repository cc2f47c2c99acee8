"""Active-cell traces and Wasserstein k-means over their decay shapes."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TRACE_LINE = re.compile(
    r"^Level (?P<level>\d+), FAB (?P<fab>\d+), t = (?P<t>\S+), step = (?P<step>\d+), "
    r"n_cells = (?P<n_cells>\d+), n_active = (?P<n_active>\d+)$"
)


@dataclass
class ActivityTrace:
    level: int
    fab_id: int
    n_cells: int
    counts: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.size and (self.counts.min() < 0 or self.counts[0] > self.n_cells):
            raise ValueError("trace counts must lie in [0, n_cells]")
        if np.any(np.diff(self.counts) > 0):
            raise ValueError("trace counts must be non-increasing")

    def lines(self) -> list[str]:
        """Instrumentation lines, one per integration step."""
        return [
            f"Level {self.level}, FAB {self.fab_id}, t = {self.time!r}, step = {i}, "
            f"n_cells = {self.n_cells}, n_active = {int(c)}"
            for i, c in enumerate(self.counts)
        ]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ActivityTrace):
            return NotImplemented
        return (
            (self.level, self.fab_id, self.n_cells, self.time)
            == (other.level, other.fab_id, other.n_cells, other.time)
            and np.array_equal(self.counts, other.counts)
        )


def format_traces(traces: Iterable[ActivityTrace]) -> str:
    return "".join(line + "\n" for tr in traces for line in tr.lines())


def parse_traces(text: str) -> list[ActivityTrace]:
    """Group instrumentation lines into one trace per (time, level, fab)."""
    groups: dict[tuple[str, int, int], dict] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = TRACE_LINE.match(line)
        if m is None:
            raise ValueError(f"line {lineno}: malformed activity line: {raw!r}")
        key = (m["t"], int(m["level"]), int(m["fab"]))
        try:
            t = float(m["t"])
        except ValueError:
            raise ValueError(f"line {lineno}: bad time value {m['t']!r}") from None
        g = groups.setdefault(key, {"n_cells": int(m["n_cells"]), "steps": {}, "t": t})
        if int(m["n_cells"]) != g["n_cells"]:
            raise ValueError(f"line {lineno}: n_cells changed within one trace")
        step = int(m["step"])
        if step in g["steps"]:
            raise ValueError(f"line {lineno}: duplicate step {step}")
        g["steps"][step] = int(m["n_active"])
    traces = []
    for (_, level, fab), g in groups.items():
        steps = sorted(g["steps"])
        if steps != list(range(len(steps))):
            raise ValueError(f"trace Level {level}, FAB {fab} has gaps in its step sequence")
        counts = [g["steps"][s] for s in steps]
        traces.append(ActivityTrace(level, fab, g["n_cells"], counts, g["t"]))
    return traces


def pad_traces(traces: Sequence[ActivityTrace] | Sequence[Sequence[float]]) -> np.ndarray:
    """Right zero-pad traces into a (G, i_max) matrix."""
    if not traces:
        raise ValueError("need at least one trace")
    rows = [np.asarray(t.counts if isinstance(t, ActivityTrace) else t, dtype=float) for t in traces]
    width = max(r.size for r in rows)
    out = np.zeros((len(rows), width))
    for i, r in enumerate(rows):
        out[i, : r.size] = r
    return out


def wasserstein_1d(a: np.ndarray, b: np.ndarray) -> float:
    """W1 between unit-mass normalizations of ``a`` and ``b`` on the index axis.

    A zero-mass vector is only at distance 0 from another zero-mass vector
    and at the full support length from anything else.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = max(a.size, b.size)
    a = np.pad(a, (0, n - a.size))
    b = np.pad(b, (0, n - b.size))
    sa, sb = a.sum(), b.sum()
    if sa <= 0 or sb <= 0:
        return 0.0 if sa <= 0 and sb <= 0 else float(n)
    return float(np.abs(np.cumsum(a / sa) - np.cumsum(b / sb)).sum())


def _distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """(G, k) matrix of W1 distances between rows of X and rows of C."""
    cx = np.cumsum(X / X.sum(axis=1, keepdims=True), axis=1)
    mass = C.sum(axis=1, keepdims=True)
    cc = np.cumsum(np.divide(C, mass, out=np.zeros_like(C), where=mass > 0), axis=1)
    return np.abs(cx[:, None, :] - cc[None, :, :]).sum(axis=2)


def _barycenter(M: np.ndarray, n_quantiles: int = 256) -> np.ndarray:
    """1D Wasserstein barycenter of normalized rows via quantile averaging."""
    P = M / M.sum(axis=1, keepdims=True)
    cdf = np.cumsum(P, axis=1)
    qs = (np.arange(n_quantiles) + 0.5) / n_quantiles
    idx = np.array([np.searchsorted(c, qs, side="left") for c in cdf])
    avg = idx.mean(axis=0)
    out = np.zeros(M.shape[1])
    # spread each averaged quantile location over its two neighbouring bins
    lo = np.floor(avg).astype(int)
    frac = avg - lo
    np.add.at(out, lo, 1 - frac)
    np.add.at(out, np.minimum(lo + 1, M.shape[1] - 1), frac)
    return out * (M.sum(axis=1).mean() / n_quantiles)


@dataclass
class ClusterResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_history: list[float] = field(default_factory=list)
    distances: np.ndarray | None = None  # member-to-centroid distance per trace
    inactive_cluster: int | None = None


def kmeans_wasserstein(
    X: np.ndarray,
    k: int = 15,
    max_iter: int = 100,
    seed: int = 0,
    centroid: str = "mean",
) -> ClusterResult:
    """Lloyd iterations with W1 assignment.

    Rows with zero mass go to a reserved last cluster with a zero centroid;
    the remaining ``k - 1`` clusters (or ``k`` if no such rows) are fit on
    the active rows.  A cluster's new centroid is kept only if it does not
    raise that cluster's cost, so the total inertia never increases.
    """
    X = np.asarray(X, dtype=float)
    G = X.shape[0]
    if G < k:
        raise ValueError(f"need at least k={k} traces, got {G}")
    if centroid not in ("mean", "barycenter"):
        raise ValueError(f"unknown centroid rule {centroid!r}")
    if np.any(X < 0):
        raise ValueError("traces must be non-negative")
    rng = np.random.default_rng(seed)
    zero = X.sum(axis=1) <= 0
    active = np.flatnonzero(~zero)
    k_fit = k - 1 if zero.any() else k
    assignments = np.full(G, k - 1, dtype=np.int64)
    dist_out = np.zeros(G)
    centroids = np.zeros((k, X.shape[1]))
    history: list[float] = []

    if k_fit > 0 and active.size:
        A = X[active]
        C = _farthest_point_init(A, min(k_fit, A.shape[0]), rng)
        if C.shape[0] < k_fit:
            C = np.vstack([C, np.zeros((k_fit - C.shape[0], X.shape[1]))])
        labels = None
        for _ in range(max_iter):
            D = _distances(A, C)
            new = np.argmin(D, axis=1)
            d_own = D[np.arange(A.shape[0]), new]
            history.append(float(d_own.sum()))
            if labels is not None and np.array_equal(new, labels):
                break
            labels = new
            for j in range(k_fit):
                members = labels == j
                if not members.any():
                    far = int(np.argmax(d_own))
                    if d_own[far] <= 0:
                        continue
                    C[j] = A[far]
                    labels[far] = j
                    d_own[far] = 0.0
                    continue
                M = A[members]
                cand = M.mean(axis=0) if centroid == "mean" else _barycenter(M)
                cur = _distances(M, C[j : j + 1]).sum()
                if _distances(M, cand[None, :]).sum() <= cur:
                    C[j] = cand
        D = _distances(A, C)
        labels = np.argmin(D, axis=1)
        d_own = D[np.arange(A.shape[0]), labels]
        if not history or d_own.sum() != history[-1]:
            history.append(float(d_own.sum()))
        assignments[active] = labels
        dist_out[active] = d_own
        centroids[:k_fit] = C
    inertia = float(dist_out.sum())
    return ClusterResult(
        assignments,
        centroids,
        inertia,
        history,
        dist_out,
        k - 1 if zero.any() else None,
    )


def _farthest_point_init(A: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded farthest-point selection of ``k`` distinct rows."""
    first = int(rng.integers(A.shape[0]))
    chosen = [first]
    dmin = _distances(A, A[[first]])[:, 0]
    while len(chosen) < k:
        nxt = int(np.argmax(dmin))
        if dmin[nxt] <= 0:
            # fewer distinct shapes than clusters: fall back to unused rows
            rest = np.setdiff1d(np.arange(A.shape[0]), chosen)
            nxt = int(rest[0])
        chosen.append(nxt)
        dmin = np.minimum(dmin, _distances(A, A[[nxt]])[:, 0])
    return A[chosen].copy()
