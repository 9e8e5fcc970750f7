"""Log-linear model over a junction tree: fitting, marginals, and sampling.

Fitting minimizes the weighted squared error between noisy measurements and
the model's marginals (scaled to the estimated record count) by mirror
descent on the clique log-potentials: each step moves the potentials along
the marginal-space gradient and recomputes marginals by belief propagation,
with Armijo backtracking so the loss never increases.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .dataset import Clique, Marginal, Measurement, clique_cells
from .domain import Domain
from .errors import (
    ConsistencyError,
    InfeasibleCondition,
    InvalidArgument,
    InvalidConfiguration,
    UnsupportedQuery,
)
from .junction_tree import JunctionTree, build_junction_tree

_NEG_INF = -np.inf


def _logsumexp(a: np.ndarray, axis) -> np.ndarray:
    hi = np.max(a, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(hi), hi, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - safe), axis=axis))
    return out + safe.reshape(out.shape)


def _embed(tensor: np.ndarray, src: Clique, dst: Clique) -> np.ndarray:
    """Broadcast a tensor over src attrs into the axis layout of dst.

    Cliques are sorted tuples everywhere, so src's axes already appear in
    dst order and a reshape suffices.
    """
    shape = tuple(tensor.shape[src.index(a)] if a in src else 1 for a in dst)
    return tensor.reshape(shape)


def _project(tensor: np.ndarray, src: Clique, dst: Clique, log: bool) -> np.ndarray:
    """Marginalize a tensor over src attrs down to dst (a sorted subset)."""
    axes = tuple(i for i, a in enumerate(src) if a not in dst)
    if not axes:
        return tensor
    if log:
        return _logsumexp(tensor, axis=axes)
    return tensor.sum(axis=axes)


@dataclass(frozen=True)
class PGModel:
    """Fitted generator: tree, per-node log potentials, calibrated marginals."""

    tree: JunctionTree
    domain: Domain
    potentials: tuple[np.ndarray, ...]
    total_records: float
    clique_potentials: dict
    node_marginals: tuple[np.ndarray, ...]

    def node_shape(self, i: int) -> tuple[int, ...]:
        return self.domain.shape(self.tree.nodes[i])


def _node_potentials(
    tree: JunctionTree, domain: Domain, clique_theta: dict[Clique, np.ndarray]
) -> list[np.ndarray]:
    pots = [np.zeros(domain.shape(node)) for node in tree.nodes]
    for cl, theta in clique_theta.items():
        host = tree.node_containing(cl)
        if host is None:
            raise ConsistencyError(f"clique {cl} not covered by the junction tree")
        pots[host] = pots[host] + _embed(theta, cl, tree.nodes[host])
    return pots


def _calibrate(
    tree: JunctionTree, domain: Domain, pots: Sequence[np.ndarray], total: float
) -> list[np.ndarray]:
    """Two-pass message passing; returns per-node marginals in count scale."""
    n = len(tree.nodes)
    nbrs: dict[int, list[tuple[int, Clique]]] = {i: [] for i in range(n)}
    for u, v, sep in tree.edges:
        nbrs[u].append((v, sep))
        nbrs[v].append((u, sep))

    # BFS orientation from node 0 (tree is connected by construction).
    order: list[tuple[int, int, Clique]] = []  # (child, parent, sep)
    seen = {0}
    frontier = [0]
    while frontier:
        u = frontier.pop()
        for v, sep in nbrs[u]:
            if v not in seen:
                seen.add(v)
                order.append((v, u, sep))
                frontier.append(v)

    messages: dict[tuple[int, int], np.ndarray] = {}

    def send(src: int, dst: int, sep: Clique) -> None:
        t = pots[src].copy()
        for w, wsep in nbrs[src]:
            if w != dst and (w, src) in messages:
                t = t + _embed(messages[(w, src)], wsep, tree.nodes[src])
        msg = _project(t, tree.nodes[src], sep, log=True)
        hi = msg.max() if msg.size else 0.0
        if np.isfinite(hi):
            msg = msg - hi
        messages[(src, dst)] = msg

    for child, parent, sep in reversed(order):
        send(child, parent, sep)
    for child, parent, sep in order:
        send(parent, child, sep)

    marginals = []
    for i in range(n):
        belief = pots[i].copy()
        for w, wsep in nbrs[i]:
            belief = belief + _embed(messages[(w, i)], wsep, tree.nodes[i])
        z = _logsumexp(belief.reshape(-1), axis=0)
        if not np.isfinite(z):
            raise InvalidConfiguration("model has no probability mass left")
        marginals.append(np.exp(belief - z) * total)
    return marginals


def estimate_total(measurements: Sequence[Measurement]) -> float:
    """Inverse-variance weighted mean of the measurement totals, floored at 1."""
    num = 0.0
    den = 0.0
    for m in measurements:
        var = m.sigma**2 * m.marginal.counts.size
        num += m.marginal.total() / var
        den += 1.0 / var
    if den == 0.0:
        return 1.0
    return max(1.0, num / den)


def marginal_loss(
    measurements: Sequence[Measurement], mu: dict[Clique, np.ndarray]
) -> tuple[float, dict[Clique, np.ndarray]]:
    """Weighted squared loss between measurements and the clique marginals mu,
    together with its gradient with respect to mu."""
    loss = 0.0
    grad = {cl: np.zeros_like(m) for cl, m in mu.items()}
    for m in measurements:
        cl = m.marginal.clique
        diff = mu[cl] - m.marginal.counts.reshape(mu[cl].shape)
        w = m.weight / m.sigma**2
        loss += w * float(np.sum(diff * diff))
        grad[cl] += 2.0 * w * diff
    return loss, grad


def fit_potentials(
    measurements: Sequence[Measurement],
    domain: Domain,
    iters: int = 1000,
    step: Optional[float] = None,
    init: Optional[dict] = None,
    total_records: Optional[float] = None,
    loss_callback=None,
) -> PGModel:
    """Fit clique potentials to noisy measurements by mirror descent."""
    if not measurements:
        raise InvalidArgument("at least one measurement required")
    if iters < 1:
        raise InvalidArgument("iters must be positive")
    cliques = sorted({m.marginal.clique for m in measurements})
    tree = build_junction_tree(domain, cliques)
    total = estimate_total(measurements) if total_records is None else total_records

    theta: dict[Clique, np.ndarray] = {
        cl: np.zeros(domain.shape(cl)) for cl in cliques
    }
    if init:
        for cl, t in init.items():
            if cl in theta:
                theta[cl] = np.array(t, dtype=float)

    hosts = {cl: tree.node_containing(cl) for cl in cliques}

    def marginals_of(th: dict) -> tuple[list[np.ndarray], dict[Clique, np.ndarray]]:
        node_m = _calibrate(tree, domain, _node_potentials(tree, domain, th), total)
        mu = {
            cl: _project(node_m[hosts[cl]], tree.nodes[hosts[cl]], cl, log=False)
            for cl in cliques
        }
        return node_m, mu

    def loss_and_grad(mu: dict) -> tuple[float, dict[Clique, np.ndarray]]:
        return marginal_loss(measurements, mu)

    alpha = step if step is not None else 2.0 / total
    node_m, mu = marginals_of(theta)
    loss, grad = loss_and_grad(mu)
    if loss_callback is not None:
        loss_callback(loss)
    for _ in range(iters):
        improved = False
        while alpha > 1e-20:
            cand = {cl: theta[cl] - alpha * grad[cl] for cl in cliques}
            node_c, mu_c = marginals_of(cand)
            loss_c, grad_c = loss_and_grad(mu_c)
            decrease = sum(
                float(np.sum(grad[cl] * (mu[cl] - mu_c[cl]))) for cl in cliques
            )
            if loss_c <= loss - 0.5 * alpha * decrease or loss_c < loss:
                improved = abs(loss - loss_c) > 1e-9 * max(1.0, abs(loss))
                theta, node_m, mu = cand, node_c, mu_c
                loss, grad = loss_c, grad_c
                alpha *= 1.01
                break
            alpha *= 0.5
        else:
            break
        if loss_callback is not None:
            loss_callback(loss)
        if not improved:
            break

    return PGModel(
        tree=tree,
        domain=domain,
        potentials=tuple(_node_potentials(tree, domain, theta)),
        total_records=total,
        clique_potentials=theta,
        node_marginals=tuple(node_m),
    )


def model_marginal(model: PGModel, clique: Sequence[int]) -> Marginal:
    """Exact marginal of a clique contained in a single tree node."""
    cl = tuple(sorted(set(int(a) for a in clique)))
    host = model.tree.node_containing(cl)
    if host is None:
        raise UnsupportedQuery(f"clique {cl} spans no single junction-tree node")
    counts = _project(model.node_marginals[host], model.tree.nodes[host], cl, log=False)
    return Marginal(clique=cl, counts=counts.reshape(-1).copy())


def _chain_factors(model: PGModel) -> list[tuple[Clique, np.ndarray]]:
    """Chain-rule factorization from the calibrated tree.

    Root node carries its joint probability; every child carries its
    conditional given the separator, so the product over factors is the model
    distribution.  All values lie in [0, 1], safe for plain-space elimination.
    """
    total = model.total_records
    nbrs: dict[int, list[tuple[int, Clique]]] = {i: [] for i in range(len(model.tree.nodes))}
    for u, v, sep in model.tree.edges:
        nbrs[u].append((v, sep))
        nbrs[v].append((u, sep))
    factors: list[tuple[Clique, np.ndarray]] = []
    seen = {0}
    stack = [(0, None)]
    while stack:
        v, sep = stack.pop()
        node = model.tree.nodes[v]
        prob = model.node_marginals[v] / total
        if sep is not None:
            sep_m = _embed(_project(prob, node, sep, log=False), sep, node)
            with np.errstate(divide="ignore", invalid="ignore"):
                prob = np.where(sep_m > 0.0, prob / sep_m, 0.0)
        factors.append((node, prob))
        for w, wsep in nbrs[v]:
            if w not in seen:
                seen.add(w)
                stack.append((w, wsep))
    return factors


def project_clique(model: PGModel, clique: Sequence[int]) -> Marginal:
    """Marginal of an arbitrary clique, via variable elimination if needed."""
    cl = tuple(sorted(set(int(a) for a in clique)))
    if model.tree.node_containing(cl) is not None:
        return model_marginal(model, cl)
    factors = _chain_factors(model)
    elim = set(range(len(model.domain))) - set(cl)
    while elim:
        # Greedy: eliminate the attribute whose combined factor is smallest.
        best_a, best_cost, best_union = None, None, None
        for a in sorted(elim):
            union = set()
            for attrs, _ in factors:
                if a in attrs:
                    union |= set(attrs)
            cost = clique_cells(model.domain, tuple(union))
            if best_cost is None or cost < best_cost:
                best_a, best_cost, best_union = a, cost, tuple(sorted(union))
        a, union = best_a, best_union
        touching = [f for f in factors if a in f[0]]
        factors = [f for f in factors if a not in f[0]]
        if not touching:
            elim.discard(a)
            continue
        acc = np.ones(model.domain.shape(union))
        for attrs, t in touching:
            acc = acc * _embed(t, attrs, union)
        reduced = tuple(x for x in union if x != a)
        factors.append((reduced, acc.sum(axis=union.index(a))))
        elim.discard(a)

    # Everything outside the clique is eliminated: remaining attrs are in cl.
    acc = np.ones(model.domain.shape(cl))
    for attrs, t in factors:
        acc = acc * _embed(t, attrs, cl)
    z = acc.sum()
    if z <= 0:
        raise InvalidConfiguration("model has no probability mass left")
    counts = acc * (model.total_records / z)
    return Marginal(clique=cl, counts=counts.reshape(-1))


def _as_code_sets(evidence: dict, domain: Domain) -> dict[int, set[int]]:
    out: dict[int, set[int]] = {}
    for col, allowed in (evidence or {}).items():
        idx = col if isinstance(col, int) else domain.index_of(col)
        codes = allowed if isinstance(allowed, (set, frozenset, list, tuple)) else [allowed]
        codes = {int(c) for c in codes}
        card = domain.cardinalities[idx]
        if not codes or any(c < 0 or c >= card for c in codes):
            raise InvalidArgument(f"evidence for column {idx} has invalid codes")
        out[idx] = codes
    return out


def sample(
    model: PGModel,
    n: int,
    evidence: Optional[dict] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Forward-sample n rows from the tree; evidence is clamped per clique.

    Evidence maps a column (index or name) to an allowed code or set of
    codes; every output row satisfies it exactly.
    """
    if n < 0:
        raise InvalidArgument("n must be non-negative")
    rng = rng if rng is not None else np.random.default_rng()
    ev = _as_code_sets(evidence, model.domain)

    beliefs = []
    for i, node in enumerate(model.tree.nodes):
        with np.errstate(divide="ignore"):
            b = np.log(np.maximum(model.node_marginals[i], 0.0))
        b = np.where(model.node_marginals[i] > 0.0, b, _NEG_INF)
        for col, codes in ev.items():
            if col in node:
                axis = node.index(col)
                mask = np.full(b.shape[axis], False)
                for c in codes:
                    mask[c] = True
                sl = [slice(None)] * b.ndim
                sl[axis] = ~mask
                b[tuple(sl)] = _NEG_INF
        beliefs.append(b)

    d = len(model.domain)
    out = np.zeros((n, d), dtype=np.int64)
    if n == 0:
        return out

    nbrs: dict[int, list[tuple[int, Clique]]] = {i: [] for i in range(len(model.tree.nodes))}
    for u, v, sep in model.tree.edges:
        nbrs[u].append((v, sep))
        nbrs[v].append((u, sep))

    root = 0
    root_b = beliefs[root].reshape(-1)
    probs = _normalize(root_b)
    if probs is None:
        raise InfeasibleCondition("evidence has zero probability under the model")
    cells = rng.choice(probs.size, size=n, p=probs)
    coords = np.unravel_index(cells, beliefs[root].shape)
    for k, a in enumerate(model.tree.nodes[root]):
        out[:, a] = coords[k]

    seen = {root}
    frontier = [root]
    while frontier:
        u = frontier.pop()
        for v, sep in nbrs[u]:
            if v in seen:
                continue
            seen.add(v)
            frontier.append(v)
            _sample_child(model, beliefs[v], v, sep, out, rng)
    return out


def _normalize(log_weights: np.ndarray) -> Optional[np.ndarray]:
    hi = log_weights.max()
    if not np.isfinite(hi):
        return None
    w = np.exp(log_weights - hi)
    s = w.sum()
    if s <= 0:
        return None
    return w / s


def _sample_child(
    model: PGModel,
    belief: np.ndarray,
    v: int,
    sep: Clique,
    out: np.ndarray,
    rng: np.random.Generator,
) -> None:
    node = model.tree.nodes[v]
    free = tuple(a for a in node if a not in sep)
    if not free:
        return
    # Re-order axes to (sep..., free...) and flatten both blocks.
    perm = [node.index(a) for a in sep] + [node.index(a) for a in free]
    b = np.transpose(belief, perm)
    sep_shape = tuple(model.domain.cardinalities[a] for a in sep)
    free_shape = tuple(model.domain.cardinalities[a] for a in free)
    b2 = b.reshape(int(np.prod(sep_shape)) if sep else 1, -1)

    n = out.shape[0]
    if sep:
        sep_idx = np.ravel_multi_index(tuple(out[:, a] for a in sep), sep_shape)
    else:
        sep_idx = np.zeros(n, dtype=np.int64)

    for s in np.unique(sep_idx):
        rows = np.nonzero(sep_idx == s)[0]
        probs = _normalize(b2[s])
        if probs is None:
            raise InfeasibleCondition(
                "evidence has zero probability under the model"
            )
        cells = rng.choice(probs.size, size=rows.size, p=probs)
        coords = np.unravel_index(cells, free_shape)
        for k, a in enumerate(free):
            out[rows, a] = coords[k]


def apply_structural_zeros(model: PGModel, zeros: dict) -> PGModel:
    """Force listed cells to exactly zero probability in every hosting node."""
    zero_sets = _as_code_sets(zeros, model.domain)
    pots = [p.copy() for p in model.potentials]
    for col, codes in zero_sets.items():
        card = model.domain.cardinalities[col]
        if len(codes) >= card:
            raise InvalidConfiguration(
                f"column {model.domain.columns[col].name!r} would have every cell zeroed"
            )
        for i, node in enumerate(model.tree.nodes):
            if col in node:
                axis = node.index(col)
                sl = [slice(None)] * pots[i].ndim
                for c in codes:
                    sl[axis] = c
                    pots[i][tuple(sl)] = _NEG_INF
    node_m = _calibrate(model.tree, model.domain, pots, model.total_records)
    return replace(
        model, potentials=tuple(pots), node_marginals=tuple(node_m)
    )
