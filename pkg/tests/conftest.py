"""Shared instance factories for the test suite."""

import numpy as np
import pytest

from homrf.decomposition import build_monotonic_chains
from homrf.model import build_model, close_j


def random_instance(rng, n_nodes=None, max_labels=3, n_extra=None, max_arity=4, nested=False):
    """Random model: unary factors on every node plus higher-order factors
    with all singleton marginalization edges.  With `nested`, some factors of
    arity >= 3 also get an explicit sub-pair factor and edge."""
    n = n_nodes if n_nodes is not None else int(rng.integers(3, 9))
    labels = [int(x) for x in rng.integers(2, max_labels + 1, size=n)]

    scopes = []
    seen = {(v,) for v in range(n)}
    k = n_extra if n_extra is not None else int(rng.integers(2, max(3, n)))
    for _ in range(40):
        if k == 0:
            break
        arity = int(rng.integers(2, min(max_arity, n) + 1))
        scope = tuple(sorted(rng.choice(n, size=arity, replace=False).tolist()))
        if scope in seen:
            continue
        seen.add(scope)
        scopes.append(scope)
        k -= 1

    pair_edges = []
    if nested:
        for scope in list(scopes):
            if len(scope) >= 3 and rng.random() < 0.8:
                i = int(rng.integers(0, len(scope) - 1))
                pair = (scope[i], scope[i + 1])
                if pair not in seen:
                    seen.add(pair)
                    scopes.append(pair)
                pair_edges.append((scope, pair))

    factors = [((v,), rng.uniform(-2, 2, size=labels[v])) for v in range(n)]
    for scope in scopes:
        size = int(np.prod([labels[v] for v in scope]))
        factors.append((scope, rng.uniform(-2, 2, size=size)))
    model = build_model(labels, factors)

    edges = set()
    for fid, scope in enumerate(model.scopes):
        if len(scope) >= 2:
            for v in scope:
                edges.add((fid, model.factor_id((v,))))
    for owner, pair in pair_edges:
        edges.add((model.factor_id(owner), model.factor_id(pair)))
    return model, close_j(model.scopes, edges)


def random_decomposed(rng, **kwargs):
    model, js = random_instance(rng, **kwargs)
    return build_monotonic_chains(model, js)


def path_instance(rng, n_nodes=6, max_labels=3, arity=2):
    """Chain-structured model along increasing node ids; a single chain
    covers it under the natural order.  The node count snaps down so the
    overlapping factors cover every node."""
    step = arity - 1
    n_nodes = arity + step * max(0, (n_nodes - arity) // step)
    labels = [int(x) for x in rng.integers(2, max_labels + 1, size=n_nodes)]
    factors = [((v,), rng.uniform(-2, 2, size=labels[v])) for v in range(n_nodes)]
    for start in range(0, n_nodes - arity + 1, step):
        scope = tuple(range(start, start + arity))
        size = int(np.prod([labels[v] for v in scope]))
        factors.append((scope, rng.uniform(-2, 2, size=size)))
    model = build_model(labels, factors)
    edges = set()
    for fid, scope in enumerate(model.scopes):
        if len(scope) >= 2:
            for v in scope:
                edges.add((fid, model.factor_id((v,))))
    return model, close_j(model.scopes, edges)


def submodular_grid(rng, width, height):
    """Binary pairwise grid with submodular pairwise tables and singleton
    marginalization edges."""
    n = width * height
    labels = [2] * n
    factors = [((v,), rng.uniform(0, 2, size=2)) for v in range(n)]
    pairs = []
    for y in range(height):
        for x in range(width):
            v = y * width + x
            if x + 1 < width:
                pairs.append((v, v + 1))
            if y + 1 < height:
                pairs.append((v, v + width))
    for u, v in pairs:
        t = rng.uniform(0, 2, size=(2, 2))
        slack = t[0, 0] + t[1, 1] - t[0, 1] - t[1, 0]
        if slack > 0:
            t[0, 1] += slack / 2 + 1e-3
            t[1, 0] += slack / 2 + 1e-3
        factors.append(((u, v), t.ravel()))
    model = build_model(labels, factors)
    edges = set()
    for fid, scope in enumerate(model.scopes):
        if len(scope) == 2:
            for v in scope:
                edges.add((fid, model.factor_id((v,))))
    return model, close_j(model.scopes, edges)


def figure_chain_instance(rng=None):
    """Three overlapping factors abc, bcd, de with an explicit bc separator,
    all singleton edges, and edges from both covering factors into bc."""
    labels = [2, 2, 2, 2, 2]
    rng = rng or np.random.default_rng(0)
    factors = [((v,), rng.uniform(-1, 1, size=2)) for v in range(5)]
    factors.append(((0, 1, 2), rng.uniform(-1, 1, size=8)))
    factors.append(((1, 2, 3), rng.uniform(-1, 1, size=8)))
    factors.append(((3, 4), rng.uniform(-1, 1, size=4)))
    factors.append(((1, 2), rng.uniform(-1, 1, size=4)))
    model = build_model(labels, factors)
    abc = model.factor_id((0, 1, 2))
    bcd = model.factor_id((1, 2, 3))
    de = model.factor_id((3, 4))
    bc = model.factor_id((1, 2))
    edges = set()
    for fid in (abc, bcd, de, bc):
        for v in model.scope(fid):
            edges.add((fid, model.factor_id((v,))))
    edges.add((abc, bc))
    edges.add((bcd, bc))
    return model, close_j(model.scopes, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
