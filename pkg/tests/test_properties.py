"""Hypothesis properties over randomly structured models."""

import numpy as np
from hypothesis import given, settings, strategies as st

from homrf.decomposition import build_monotonic_chains, validate_decomposition
from homrf.model import build_model, close_j, energy, message_edges, reparameterized_costs
from homrf.trws import chain_state_init, trws_chain_pass


@st.composite
def small_models(draw):
    n = draw(st.integers(min_value=2, max_value=5))
    labels = [draw(st.integers(min_value=2, max_value=3)) for _ in range(n)]
    value = st.floats(min_value=-5, max_value=5, allow_nan=False, width=32)
    factors = [((v,), [draw(value) for _ in range(labels[v])]) for v in range(n)]
    seen = {(v,) for v in range(n)}
    for _ in range(draw(st.integers(min_value=1, max_value=3))):
        arity = draw(st.integers(min_value=2, max_value=min(3, n)))
        scope = tuple(sorted(draw(
            st.lists(st.integers(0, n - 1), min_size=arity, max_size=arity, unique=True)
        )))
        if scope in seen:
            continue
        seen.add(scope)
        size = int(np.prod([labels[v] for v in scope]))
        factors.append((scope, [draw(value) for _ in range(size)]))
    model = build_model(labels, factors)
    edges = set()
    for fid, scope in enumerate(model.scopes):
        if len(scope) >= 2:
            for v in scope:
                edges.add((fid, model.factor_id((v,))))
    return model, close_j(model.scopes, edges)


@given(small_models())
@settings(max_examples=40, deadline=None)
def test_closure_is_idempotent_and_keeps_partition(case):
    model, js = case
    again = close_j(js.scopes, js.closed_edges)
    assert again.closed_edges == js.closed_edges
    assert again.outer == js.outer


@given(small_models(), st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_messages_never_change_energies(case, seed):
    model, js = case
    rng = np.random.default_rng(seed)
    msgs = {
        (a, b): rng.uniform(-2, 2, size=model.table(b).shape)
        for a, b in message_edges(js)
    }
    out = reparameterized_costs(model, js, msgs)
    for _ in range(5):
        lab = [int(rng.integers(0, c)) for c in model.label_counts]
        want = energy(model, lab)
        got = sum(
            out[fid][tuple(lab[v] for v in model.scope(fid))]
            for fid in range(len(model.factors))
        )
        assert abs(got - want) <= 1e-9


@given(small_models())
@settings(max_examples=25, deadline=None)
def test_built_decompositions_validate_and_bound_monotonically(case):
    model, js = case
    d = build_monotonic_chains(model, js)
    assert validate_decomposition(d.model, d.jstructure, d).ok
    st_ = chain_state_init(d)
    prev = None
    for _ in range(4):
        phi = trws_chain_pass(d, st_, reuse="after")
        if prev is not None:
            assert phi >= prev - 1e-9
        prev = phi
