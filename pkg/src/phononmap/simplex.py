"""Nelder-Mead downhill simplex minimisation with an evaluation budget."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

REFLECT, EXPAND, CONTRACT, SHRINK = 1.0, 2.0, 0.5, 0.5


@dataclass
class SearchOptions:
    step: float = 0.1
    tol_x: float = 1e-8
    tol_f: float = 1e-10
    max_evals: int = 20000


@dataclass
class SearchResult:
    x: np.ndarray
    f: float
    n_evals: int
    reason: str
    trace: list[float] = field(default_factory=list)

    @property
    def budget_exhausted(self) -> bool:
        return self.reason == "budget"


class _Budget(Exception):
    pass


def direct_search(
    f: Callable[[np.ndarray], float],
    x0,
    opts: SearchOptions | None = None,
) -> SearchResult:
    """Minimise ``f`` from ``x0`` with the standard Nelder-Mead moves.

    The starting point is always evaluated; every further evaluation counts
    against ``opts.max_evals``. Stops when the simplex diameter (max-norm
    distance of any vertex from the best one) drops below ``tol_x``, when the
    spread of vertex values drops below ``tol_f``, or when the budget is spent.
    ``trace[i]`` is the best value seen after evaluation i + 1.
    """
    opts = opts or SearchOptions()
    x0 = np.array(x0, dtype=float)
    dim = x0.size
    trace: list[float] = []
    best = [np.inf, x0.copy()]

    def call(x):
        if len(trace) >= max(opts.max_evals, 1):
            raise _Budget
        val = float(f(x))
        if val < best[0]:
            best[0], best[1] = val, x.copy()
        trace.append(best[0])
        return val

    call(x0)
    if opts.max_evals <= 1 or dim == 0:
        return SearchResult(best[1], best[0], len(trace), "budget", trace)

    simplex = np.empty((dim + 1, dim))
    values = np.empty(dim + 1)
    simplex[0] = x0
    values[0] = trace[0]
    reason = "budget"
    try:
        for i in range(dim):
            v = x0.copy()
            v[i] += opts.step
            simplex[i + 1] = v
            values[i + 1] = call(v)

        while True:
            order = np.argsort(values, kind="stable")
            simplex, values = simplex[order], values[order]
            if values[-1] - values[0] < opts.tol_f:
                reason = "tol_f"
                break
            if np.max(np.abs(simplex[1:] - simplex[0])) < opts.tol_x:
                reason = "tol_x"
                break

            centroid = simplex[:-1].mean(axis=0)
            worst = simplex[-1]
            xr = centroid + REFLECT * (centroid - worst)
            fr = call(xr)
            if fr < values[0]:
                xe = centroid + EXPAND * (xr - centroid)
                fe = call(xe)
                if fe < fr:
                    simplex[-1], values[-1] = xe, fe
                else:
                    simplex[-1], values[-1] = xr, fr
                continue
            if fr < values[-2]:
                simplex[-1], values[-1] = xr, fr
                continue
            if fr < values[-1]:
                xc = centroid + CONTRACT * (xr - centroid)
                fc = call(xc)
                if fc <= fr:
                    simplex[-1], values[-1] = xc, fc
                    continue
            else:
                xc = centroid + CONTRACT * (worst - centroid)
                fc = call(xc)
                if fc < values[-1]:
                    simplex[-1], values[-1] = xc, fc
                    continue
            for i in range(1, dim + 1):
                simplex[i] = simplex[0] + SHRINK * (simplex[i] - simplex[0])
                values[i] = call(simplex[i])
    except _Budget:
        reason = "budget"
    return SearchResult(best[1], best[0], len(trace), reason, trace)
