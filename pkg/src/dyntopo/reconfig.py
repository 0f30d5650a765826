"""Reconfiguration cost between topologies and the metric graph over a set.

Switching from topology i to topology j re-runs network auto-configuration
in both, and that effort is proportional to each topology's spanning-tree
height g. The transition cost is

    d(i, j) = 0                          if i == j
    d(i, j) = weight * (g_i + g_j)       otherwise

which is positive, symmetric, and satisfies the triangle inequality, so the
complete graph over a feasible set with these edge weights is a metric
space. ``verify_metric`` checks the axioms exhaustively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateSetError(ValueError):
    """A metric graph needs at least two topologies."""


@dataclass(frozen=True)
class ReconfigModel:
    """Transition-cost model: conversion weight plus cached tree heights.

    Attributes:
        weight: Converts configuration effort into operation-cost units (> 0).
        heights: Spanning-tree height per topology index (each >= 1).
    """

    weight: float
    heights: tuple[int, ...]

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("weight must be > 0")
        if any(h < 1 for h in self.heights):
            raise ValueError("heights must be >= 1")


@dataclass(frozen=True)
class MetricGraph:
    """Complete undirected weighted graph over topology indices."""

    weights: np.ndarray  # (N, N), symmetric, zero diagonal

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def weight(self, i: int, j: int) -> float:
        return float(self.weights[i, j])


@dataclass(frozen=True)
class MetricReport:
    """Outcome of a metric-axiom check; carries the first counterexample."""

    passed: bool
    axiom: str | None = None
    witness: tuple[int, ...] | None = None
    detail: str | None = None


def reconfig_cost(model: ReconfigModel, i: int, j: int) -> float:
    """Transition cost between topology indices i and j (0 when i == j)."""
    if i == j:
        return 0.0
    return model.weight * (model.heights[i] + model.heights[j])


def build_metric_graph(model: ReconfigModel) -> MetricGraph:
    """Complete metric graph over the whole set.

    Raises:
        DegenerateSetError: fewer than two topologies.
    """
    n = len(model.heights)
    if n < 2:
        raise DegenerateSetError("need at least 2 topologies for a metric graph")
    h = np.asarray(model.heights, dtype=float)
    w = model.weight * (h[:, None] + h[None, :])
    np.fill_diagonal(w, 0.0)
    return MetricGraph(weights=w)


def verify_metric(g: MetricGraph) -> MetricReport:
    """Check positivity, reflexivity, symmetry, and the triangle inequality.

    All pairs and all triples are examined; the first violation found is
    reported as a counterexample.
    """
    w = g.weights
    n = g.size
    diag = np.diagonal(w)
    bad = np.nonzero(diag != 0)[0]
    if bad.size:
        i = int(bad[0])
        return MetricReport(False, "reflexivity", (i,), f"d({i},{i}) = {diag[i]}")
    bad_pairs = np.nonzero(w < 0)
    if bad_pairs[0].size:
        i, j = int(bad_pairs[0][0]), int(bad_pairs[1][0])
        return MetricReport(False, "positivity", (i, j), f"d({i},{j}) = {w[i, j]}")
    asym = np.nonzero(w != w.T)
    if asym[0].size:
        i, j = int(asym[0][0]), int(asym[1][0])
        return MetricReport(
            False, "symmetry", (i, j), f"d({i},{j}) = {w[i, j]} != {w[j, i]}"
        )
    for k in range(n):
        slack = w[:, k, None] + w[None, k, :] - w
        viol = np.nonzero(slack < 0)
        if viol[0].size:
            i, j = int(viol[0][0]), int(viol[1][0])
            return MetricReport(
                False,
                "triangle",
                (i, k, j),
                f"d({i},{k}) + d({k},{j}) = {w[i, k] + w[k, j]} < d({i},{j}) = {w[i, j]}",
            )
    return MetricReport(True)


def metric_to_csv(g: MetricGraph, path) -> None:
    """Write the upper triangle as ``i,j,weight`` rows."""
    with open(path, "w") as fh:
        fh.write("i,j,weight\n")
        for i in range(g.size):
            for j in range(i + 1, g.size):
                fh.write(f"{i},{j},{g.weights[i, j]!r}\n")
