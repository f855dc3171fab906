"""Exact inference: variable elimination with evidence-based pruning,
plus prior forward sampling.

Factor products and sums run in linear domain; a separate log scale is
carried and folded in only at the boundary, so deep products on large
components cannot overflow or underflow.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .model import Assignment, BayesianNetwork, Cpt, MapProblem, Variable

_RESCALE_HI = 1e100
_RESCALE_LO = 1e-100


class ImpossibleContextError(ValueError):
    """The conditioning context has probability zero."""


class InconsistentEvidenceError(ValueError):
    """p(E) = 0: no assignment is compatible with the evidence."""


@dataclass
class Factor:
    """Nonnegative table over `scope`; true values are `values * exp(log_scale)`.

    `values` is shaped by the scope variables' cardinalities in scope order,
    so the flat (C-order) layout has the last scope variable varying fastest.
    """

    scope: Tuple[int, ...]
    values: np.ndarray
    log_scale: float = 0.0

    def total(self) -> float:
        return float(self.values.sum())

    def log_total(self) -> float:
        t = self.total()
        return -math.inf if t == 0.0 else math.log(t) + self.log_scale


def _cpt_factor(net: BayesianNetwork, var_id: int, evidence: Assignment) -> Factor:
    """CPT of `var_id` as a factor, with evidence axes selected out."""
    cpt = net.cpts[var_id]
    scope = list(cpt.parents) + [var_id]
    shape = tuple(net.cardinality(v) for v in scope)
    values = np.asarray(cpt.table, dtype=float).reshape(shape)
    kept: List[int] = []
    index: List[object] = []
    for v in scope:
        if v in evidence:
            index.append(evidence[v])
        else:
            index.append(slice(None))
            kept.append(v)
    return Factor(tuple(kept), values[tuple(index)])


def _align(factor: Factor, scope: Tuple[int, ...], cards: Dict[int, int]) -> np.ndarray:
    """View of factor.values broadcastable to the axis order of `scope`."""
    present = [v for v in scope if v in factor.scope]
    perm = [factor.scope.index(v) for v in present]
    arr = np.transpose(factor.values, perm)
    shape = tuple(cards[v] if v in factor.scope else 1 for v in scope)
    return arr.reshape(shape)


def _product(factors: Sequence[Factor], cards: Dict[int, int]) -> Factor:
    scope: List[int] = []
    for f in factors:
        for v in f.scope:
            if v not in scope:
                scope.append(v)
    scope_t = tuple(scope)
    out = np.ones(tuple(cards[v] for v in scope_t), dtype=float)
    log_scale = 0.0
    for f in factors:
        out = out * _align(f, scope_t, cards)
        log_scale += f.log_scale
    result = Factor(scope_t, out, log_scale)
    _rescale(result)
    return result


def _rescale(f: Factor) -> None:
    m = float(f.values.max()) if f.values.size else 0.0
    if m > _RESCALE_HI or (0.0 < m < _RESCALE_LO):
        f.values = f.values / m
        f.log_scale += math.log(m)


def _sum_out(f: Factor, var: int) -> Factor:
    axis = f.scope.index(var)
    return Factor(tuple(v for v in f.scope if v != var),
                  f.values.sum(axis=axis), f.log_scale)


def _min_fill_order(scopes: Iterable[Tuple[int, ...]], elim: Set[int],
                    tie_break: str) -> List[int]:
    """Elimination order over `elim` by the min-fill heuristic.

    tie_break "low" picks the lowest variable id among equals; "high" the
    highest (used only to check order-independence of results).
    """
    adjacency: Dict[int, Set[int]] = {}
    for scope in scopes:
        for v in scope:
            adjacency.setdefault(v, set())
        for a in scope:
            for b in scope:
                if a != b:
                    adjacency[a].add(b)
    remaining = set(elim)
    order: List[int] = []
    while remaining:
        best_v, best_fill = -1, None
        candidates = sorted(remaining, reverse=(tie_break == "high"))
        for v in candidates:
            nbrs = [u for u in adjacency.get(v, ()) if u in adjacency]
            fill = 0
            for i in range(len(nbrs)):
                for j in range(i + 1, len(nbrs)):
                    if nbrs[j] not in adjacency[nbrs[i]]:
                        fill += 1
            if best_fill is None or fill < best_fill:
                best_v, best_fill = v, fill
        order.append(best_v)
        nbrs = [u for u in adjacency.get(best_v, ()) if u in adjacency]
        for i in range(len(nbrs)):
            for j in range(i + 1, len(nbrs)):
                adjacency[nbrs[i]].add(nbrs[j])
                adjacency[nbrs[j]].add(nbrs[i])
        for u in nbrs:
            adjacency[u].discard(best_v)
        adjacency.pop(best_v, None)
        remaining.discard(best_v)
    return order


def eliminate(net: BayesianNetwork, keep: Sequence[int], evidence: Assignment,
              tie_break: str = "low") -> Factor:
    """Unnormalized f(keep) = sum over the rest of the CPT product, with
    evidence rows selected. Scope order of the result follows `keep`."""
    keep_t = tuple(keep)
    overlap = set(keep_t) & set(evidence.keys())
    if overlap:
        raise ValueError(f"keep and evidence overlap on {sorted(overlap)}")
    cards = {v.id: v.cardinality for v in net.variables}
    factors = [_cpt_factor(net, v.id, evidence) for v in net.variables]
    elim = set(cards) - set(keep_t) - set(evidence.keys())
    order = _min_fill_order((f.scope for f in factors), elim, tie_break)
    for v in order:
        related = [f for f in factors if v in f.scope]
        factors = [f for f in factors if v not in f.scope]
        if not related:
            continue
        factors.append(_sum_out(_product(related, cards), v))
    result = _product(factors, cards) if factors else Factor((), np.float64(1.0))
    # reorder axes to the requested keep order
    perm = [result.scope.index(v) for v in keep_t]
    values = np.transpose(result.values, perm) if keep_t else result.values
    if not keep_t:
        values = np.asarray(values, dtype=float).reshape(())
    return Factor(keep_t, np.ascontiguousarray(values), result.log_scale)


def conditional(net: BayesianNetwork, target: int, context: Assignment) -> np.ndarray:
    """Normalized p(target | context), marginalizing everything else.

    Raises ImpossibleContextError when p(context) = 0.
    """
    if target in context:
        raise ValueError(f"target variable {target} is bound in the context")
    f = eliminate(net, (target,), context)
    total = f.total()
    if total <= 0.0:
        raise ImpossibleContextError(
            f"context has probability zero (variable {net.var(target).name!r})")
    return f.values / total


def map_posterior(net: BayesianNetwork, x: Assignment, evidence: Assignment,
                  log_p_evidence: Optional[float] = None) -> float:
    """ln p(x | evidence) with the non-MAP variables summed out.

    `log_p_evidence` may carry a precomputed ln p(E) to avoid recomputing it
    in scoring loops.
    """
    if log_p_evidence is None:
        log_p_evidence = eliminate(net, (), evidence).log_total()
    if log_p_evidence == -math.inf:
        raise InconsistentEvidenceError("evidence has probability zero")
    joint = eliminate(net, (), evidence.merged(x)).log_total()
    return joint - log_p_evidence


def forward_sample(net: BayesianNetwork, rng: random.Random) -> Assignment:
    """One draw from the network prior, sampling in topological order."""
    out = Assignment()
    for v in net.order():
        row = net.cpts[v].table[net.row_index(v, out)]
        u = rng.random()
        acc = 0.0
        state = len(row) - 1
        for i, p in enumerate(row):
            acc += p
            if u < acc:
                state = i
                break
        out.set(v, state)
    return out


# -- evidence-based pruning --------------------------------------------------

@dataclass(frozen=True)
class Component:
    """An independent sub-problem: re-indexed sub-network, its MAP query,
    and the map from sub-network ids back to original ids."""

    net: BayesianNetwork
    problem: MapProblem
    orig_ids: Tuple[int, ...]  # orig_ids[new_id] = original id

    def to_original(self, sub: Assignment) -> Assignment:
        return Assignment({self.orig_ids[v]: s for v, s in sub.items()})


@dataclass(frozen=True)
class PrunedNetwork:
    components: Tuple[Component, ...]
    dropped: Tuple[int, ...]


def _subnetwork(net: BayesianNetwork, ids: Sequence[int]) -> Tuple[BayesianNetwork, Tuple[int, ...]]:
    orig = tuple(sorted(ids))
    remap = {old: new for new, old in enumerate(orig)}
    variables = [Variable(remap[old], net.var(old).name, net.var(old).states)
                 for old in orig]
    cpts = [Cpt(remap[old], tuple(remap[p] for p in net.cpts[old].parents),
                net.cpts[old].table) for old in orig]
    return BayesianNetwork(net.name, variables, cpts), orig


def prune(net: BayesianNetwork, problem: MapProblem) -> PrunedNetwork:
    """Barren-node removal plus decomposition into weakly-connected components;
    components without MAP variables are discarded (their contribution to
    p(X|E) cancels in the normalization)."""
    problem.validate_for(net)
    protected = set(problem.map_vars) | set(problem.evidence.keys())
    alive = set(range(len(net)))
    children: Dict[int, Set[int]] = {v: set(net.children(v)) for v in alive}
    changed = True
    while changed:
        changed = False
        for v in sorted(alive):
            if v not in protected and not children[v]:
                alive.discard(v)
                for p in net.parents(v):
                    children[p].discard(v)
                changed = True
    dropped = tuple(sorted(set(range(len(net))) - alive))

    # weakly-connected components of the surviving DAG
    seen: Set[int] = set()
    groups: List[List[int]] = []
    for start in sorted(alive):
        if start in seen:
            continue
        stack, group = [start], []
        seen.add(start)
        while stack:
            v = stack.pop()
            group.append(v)
            for u in list(net.parents(v)) + list(children[v]):
                if u in alive and u not in seen:
                    seen.add(u)
                    stack.append(u)
        groups.append(sorted(group))

    components: List[Component] = []
    for group in groups:
        gset = set(group)
        gmap = [v for v in problem.map_vars if v in gset]
        if not gmap:
            continue
        subnet, orig = _subnetwork(net, group)
        remap = {old: new for new, old in enumerate(orig)}
        sub_problem = MapProblem(
            tuple(remap[v] for v in gmap),
            Assignment({remap[v]: s for v, s in problem.evidence.items() if v in gset}),
        )
        components.append(Component(subnet, sub_problem, orig))
    return PrunedNetwork(tuple(components), dropped)
