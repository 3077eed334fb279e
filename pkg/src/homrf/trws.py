"""Sequential block-coordinate dual ascent over junction-chain decompositions.

Three equivalent formulations are provided.  The general sweep works on
explicit per-subproblem tables and brings each separator to exact
min-marginals before averaging it.  The chain sweep exploits the separator
windows so that one message per subproblem suffices.  The message-form sweep
stores only the cumulative reparameterization as messages on
outer-to-separator edges plus cached separator tables, and is the production
path; it also supports the two nested-separator reuse shortcuts.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from ._tables import accumulate, embed, reduce_min, table_shape
from .errors import (
    FactorNotInTree,
    InvalidEdge,
    NotASeparator,
    ReuseOrderViolation,
    StaleMessage,
    StateNotInitialized,
)


class TreeParams:
    """Per-subproblem cost tables.  Factors outside a subproblem are zero.

    `cells` counts the joint states enumerated by message minimizations on
    this parameter vector (the message-effort measure).
    """

    def __init__(self, tables):
        self.tables = tables
        self.cells = 0

    def copy(self):
        out = TreeParams([{f: t.copy() for f, t in d.items()} for d in self.tables])
        out.cells = self.cells
        return out


def init_tree_params(decomp):
    """Uniform split: each factor's cost over its appearance probability."""
    out = []
    for t in range(len(decomp.chains)):
        out.append(
            {
                fid: decomp.model.table(fid) / decomp.rho_factor[fid]
                for fid in sorted(decomp.tree_factors[t])
            }
        )
    return TreeParams(out)


def cumulative_tables(decomp, params):
    """Probability-weighted sum of the per-subproblem tables, per factor."""
    out = [np.zeros_like(f.table) for f in decomp.model.factors]
    for t in range(len(decomp.chains)):
        for fid, tbl in params.tables[t].items():
            out[fid] = out[fid] + decomp.rho[t] * tbl
    return out


def nu_table(decomp, params, t, fid):
    """Local sum at a factor: its own table plus all nested local tables."""
    js = decomp.jstructure
    scope = js.scope(fid)
    pairs = [(js.scope(c), params.tables[t][c]) for c in sorted(js.locals[fid])]
    return accumulate(pairs, scope, decomp.model.label_counts)


def send_message(decomp, params, t, src, dst):
    """Shift cost from `src` to `dst` so the edge holds a valid message.

    The shift is the gap between the source's min-marginal over the target
    scope and the target's local sum; afterwards the two agree for every
    target state.  The subproblem's energy function is unchanged.
    """
    js = decomp.jstructure
    if (src, dst) not in js.closed_edges:
        raise InvalidEdge(f"({src}, {dst}) is not a closed marginalization edge")
    if src not in decomp.tree_factors[t] or dst not in decomp.tree_factors[t]:
        raise FactorNotInTree(f"edge ({src}, {dst}) leaves subproblem {t}")
    scope_s, scope_d = js.scope(src), js.scope(dst)
    nu_s = nu_table(decomp, params, t, src)
    nu_d = nu_table(decomp, params, t, dst)
    params.cells += nu_s.size
    delta = reduce_min(nu_s, scope_s, scope_d) - nu_d
    params.tables[t][src] = params.tables[t][src] - embed(delta, scope_d, scope_s)
    params.tables[t][dst] = params.tables[t][dst] + delta
    return delta


def _joint_separator(decomp, t, i):
    # separator factor shared by chain members i and i+1
    return decomp.sep_plus[decomp.chains[t][i]]


def tree_min_marginal(decomp, params, t, target):
    """Reparameterize subproblem `t` so the target's local sum is the exact
    min-marginal of the subproblem energy, and return that table.

    Messages are sent inward along the chain toward a member containing the
    target, then once from that member to the target itself.
    """
    if target not in decomp.tree_factors[t]:
        raise FactorNotInTree(f"factor {target} is not in subproblem {t}")
    js = decomp.jstructure
    chain = decomp.chains[t]
    root_idx = next(i for i, a in enumerate(chain) if target in js.locals[a])
    for i in range(root_idx):
        send_message(decomp, params, t, chain[i], _joint_separator(decomp, t, i))
    for i in range(len(chain) - 1, root_idx, -1):
        send_message(decomp, params, t, chain[i], _joint_separator(decomp, t, i - 1))
    root = chain[root_idx]
    if root != target:
        send_message(decomp, params, t, root, target)
    return nu_table(decomp, params, t, target)


def collect_local_sums(decomp, params, b):
    return {t: nu_table(decomp, params, t, b) for t in decomp.trees_of.get(b, ())}


def average_factor(decomp, params, b, sums=None):
    """Replace each subproblem's local sum at a separator by their
    probability-weighted mean, shifting only the separator's own table."""
    if b not in decomp.jstructure.separators:
        raise NotASeparator(f"factor {b} is not a separator")
    if sums is None:
        sums = collect_local_sums(decomp, params, b)
    if not sums:
        return None
    avg = sum(decomp.rho[t] * nu for t, nu in sums.items()) / decomp.rho_factor[b]
    for t, nu in sums.items():
        params.tables[t][b] = params.tables[t][b] + (avg - nu)
    return avg


def _chain_dp(decomp, params, t, want_argmin=False):
    """Exact minimization of one subproblem by sweeping its chain.

    Every local table is folded into the first chain member that covers it;
    the running intersection property guarantees a node never reappears after
    it has been minimized out.  Returns (value, labeling or None, cells).
    """
    js = decomp.jstructure
    chain = decomp.chains[t]
    counts = decomp.model.label_counts
    attributed = set()
    stages = []
    for a in chain:
        pairs = []
        for c in sorted(js.locals[a]):
            if c in attributed:
                continue
            attributed.add(c)
            pairs.append((js.scope(c), params.tables[t][c]))
        stages.append(accumulate(pairs, js.scope(a), counts))

    cells = 0
    carry = None
    hs = []
    for i, a in enumerate(chain):
        scope = js.scope(a)
        h = stages[i]
        if carry is not None:
            h = h + embed(carry[1], carry[0], scope)
        cells += h.size
        hs.append(h)
        if i + 1 < len(chain):
            s_scope = js.scope(_joint_separator(decomp, t, i))
            carry = (s_scope, reduce_min(h, scope, s_scope))
    value = float(hs[-1].min())
    if not want_argmin:
        return value, None, cells

    labeling = {}
    for i in reversed(range(len(chain))):
        scope = js.scope(chain[i])
        idx = []
        free = []
        for j, v in enumerate(scope):
            if v in labeling:
                idx.append(labeling[v])
            else:
                idx.append(slice(None))
                free.append(v)
        sub = hs[i][tuple(idx)]
        if free:
            coords = np.unravel_index(int(np.argmin(sub)), sub.shape)
            for v, c in zip(free, coords):
                labeling[v] = int(c)
    return value, labeling, cells


def tree_minimum(decomp, params, t):
    return _chain_dp(decomp, params, t)[0]


def tree_argmin(decomp, params, t):
    """Exact minimum of one subproblem with a minimizing node assignment."""
    value, labeling, _ = _chain_dp(decomp, params, t, want_argmin=True)
    return value, labeling


def bound(decomp, params):
    """Lower bound: probability-weighted sum of exact subproblem minima."""
    return float(
        sum(decomp.rho[t] * tree_minimum(decomp, params, t) for t in range(len(decomp.chains)))
    )


def _bound_cells(decomp, params):
    total, cells = 0.0, 0
    for t in range(len(decomp.chains)):
        v, _, c = _chain_dp(decomp, params, t)
        total += decomp.rho[t] * v
        cells += c
    return float(total), cells


def trws_general_pass(decomp, params, order=None, monitor=None):
    """One full sweep of min-marginal averaging over the separators.

    Every separator is brought to exact min-marginals in every subproblem
    containing it before being averaged, so the bound cannot decrease at any
    single averaging.  `monitor(b, before, after)` sees the bound around each
    averaging when supplied.  Returns the bound after the sweep.
    """
    if order is None:
        order = decomp.separator_order
    for b in order:
        sums = {}
        for t in decomp.trees_of.get(b, ()):
            sums[t] = tree_min_marginal(decomp, params, t, b)
        before = bound(decomp, params) if monitor is not None else None
        average_factor(decomp, params, b, sums=sums)
        if monitor is not None:
            monitor(b, before, bound(decomp, params))
    return bound(decomp, params)


@dataclass
class ExplicitChainState:
    """Chain sweep bookkeeping over explicit per-subproblem tables."""

    params: TreeParams
    child: dict
    direction: str = "forward"
    pass_index: int = 0


def explicit_chain_init(decomp, params=None):
    if params is None:
        params = init_tree_params(decomp)
    child = {a: decomp.sep_minus[a] for a in decomp.jstructure.outer}
    return ExplicitChainState(params=params, child=child)


def trws_explicit_pass(decomp, state, direction=None, on_average=None, check_invariants=False):
    """Chain sweep with one message per separator and subproblem.

    Each chain tracks its current member; each outer factor remembers its last
    message target, which stays valid across steps, so a single send per
    subproblem restores exact min-marginals at the separator being averaged
    (from the second sweep onward).  `on_average` receives
    (pass_index, direction, separator, {subproblem: local sum}) right before
    each averaging.
    """
    if direction is None:
        direction = state.direction
    forward = direction == "forward"
    js = decomp.jstructure
    order = decomp.separator_order if forward else tuple(reversed(decomp.separator_order))
    cur = {
        t: (chain[0] if forward else chain[-1]) for t, chain in enumerate(decomp.chains)
    }

    for b in order:
        for t in decomp.trees_of.get(b, ()):
            a = cur[t]
            if check_invariants:
                assert b in decomp.local_separators[a], (b, a)
                chain = decomp.chains[t]
                k = chain.index(a)
                for j, other in enumerate(chain):
                    if decomp.sep_minus[other] is None:
                        continue
                    if j < k:
                        assert state.child[other] == decomp.sep_plus[other]
                    elif j > k:
                        assert state.child[other] == decomp.sep_minus[other]
            if state.child[a] != b:
                send_message(decomp, state.params, t, a, b)
                state.child[a] = b
            edge_sep = decomp.sep_plus[a] if forward else decomp.sep_minus[a]
            if b == edge_sep:
                chain = decomp.chains[t]
                k = chain.index(a)
                nxt = k + 1 if forward else k - 1
                if 0 <= nxt < len(chain):
                    cur[t] = chain[nxt]
        sums = collect_local_sums(decomp, state.params, b)
        if on_average is not None:
            on_average(state.pass_index, direction, b, sums)
        average_factor(decomp, state.params, b, sums=sums)

    state.pass_index += 1
    state.direction = "backward" if forward else "forward"
    return bound(decomp, state.params)


@dataclass
class ChainSolverState:
    """Message-form solver state: messages on outer-to-separator window edges
    plus cached reparameterized separator tables."""

    messages: dict
    theta_sep: dict
    direction: str = "forward"
    pass_index: int = 0
    valid_child: dict = field(default_factory=dict)
    cur: dict = field(default_factory=dict)
    meff: int = 0
    diag_cells: int = 0
    msg_ops_last_pass: int = 0
    pending_noop: set = field(default_factory=set)
    ready: bool = False


def chain_state_init(decomp):
    """Zero messages; separator caches start at the original costs."""
    js = decomp.jstructure
    counts = decomp.model.label_counts
    messages = {
        (a, b): np.zeros(table_shape(js.scope(b), counts))
        for (a, b) in decomp.message_edges
    }
    theta_sep = {b: decomp.model.table(b).copy() for b in js.separators}
    return ChainSolverState(
        messages=messages,
        theta_sep=theta_sep,
        valid_child={a: None for a in js.outer},
        ready=True,
    )


def _eq20_message(decomp, state, a, b):
    """Fresh message on an edge: minimize the source cost net of its other
    outgoing messages plus the weighted separator costs the target lacks."""
    js = decomp.jstructure
    scope_a = js.scope(a)
    bracket = decomp.model.table(a).copy()
    for c in decomp.local_separators[a]:
        if c == b:
            continue
        bracket -= embed(state.messages[(a, c)], js.scope(c), scope_a)
    ra = decomp.rho_factor[a]
    for c in decomp.eq20_extra[(a, b)]:
        bracket += (ra / decomp.rho_factor[c]) * embed(
            state.theta_sep[c], js.scope(c), scope_a
        )
    state.meff += bracket.size
    return reduce_min(bracket, scope_a, js.scope(b))


def reuse_after(decomp, state, a, p, b, check=True):
    """Message increment toward a separator nested in the one just processed,
    scanning only the superset's states.

    Valid when the edge to the superset holds the current message; with the
    usual normalization the offsets cancel and the result matches the direct
    update exactly.
    """
    js = decomp.jstructure
    scope_p, scope_b = js.scope(p), js.scope(b)
    if not set(scope_b) < set(scope_p):
        raise ReuseOrderViolation(f"factor {b} is not nested inside {p}")
    if check and state.valid_child.get(a) != p:
        raise StaleMessage(f"edge ({a}, {p}) does not hold the current message")
    ra = decomp.rho_factor[a]
    total = np.zeros(table_shape(scope_p, decomp.model.label_counts))
    for c in sorted(js.locals[p]):
        if c in js.locals[b]:
            continue
        total += (ra / decomp.rho_factor[c]) * embed(
            state.theta_sep[c], js.scope(c), scope_p
        )
    state.meff += total.size
    return reduce_min(total, scope_p, scope_b)


def reuse_before(decomp, state, a, p, b, normalize=True):
    """Message toward a separator nested in the next one to be processed,
    obtained by preemptively refreshing the superset's message.

    The later sweep step for the superset edge becomes a no-op (only the
    normalization still applies), and the superset's cached table is left
    stale until the superset itself is processed.
    """
    js = decomp.jstructure
    scope_p, scope_b = js.scope(p), js.scope(b)
    if not set(scope_b) < set(scope_p):
        raise ReuseOrderViolation(f"factor {b} is not nested inside {p}")
    window = decomp.local_separators[a]
    fwd = state.direction == "forward"
    seq = window if fwd else tuple(reversed(window))
    i = seq.index(b)
    if i + 1 >= len(seq) or seq[i + 1] != p:
        raise ReuseOrderViolation(f"factor {p} is not processed right after {b}")

    m_old_p = state.messages[(a, p)]
    m_new_p = _eq20_message(decomp, state, a, p)
    delta_ap = m_new_p - m_old_p

    ra = decomp.rho_factor[a]
    total = delta_ap.copy()
    for c in sorted(js.locals[p]):
        if c in js.locals[b]:
            continue
        total += (ra / decomp.rho_factor[c]) * embed(
            state.theta_sep[c], js.scope(c), scope_p
        )
    state.meff += total.size
    delta = reduce_min(total, scope_p, scope_b)

    m_b = state.messages[(a, b)] + delta
    applied = delta
    if normalize:
        gamma = float(m_b.min())
        m_b = m_b - gamma
        applied = delta - gamma
    state.messages[(a, b)] = m_b
    state.messages[(a, p)] = m_new_p - embed(applied, scope_b, scope_p)
    state.pending_noop.add((a, p))
    return m_b, state.messages[(a, p)]


def trws_chain_pass(decomp, state, direction=None, reuse="none", normalize=True):
    """One message-form sweep over the separators.

    Each separator's cache is rebuilt from the original cost plus all incoming
    messages; an edge's message is refreshed unless the separator is the edge's
    trailing bound for this direction, whose message stays valid from the
    previous sweep.  Returns the bound after the sweep.
    """
    if not isinstance(state, ChainSolverState) or not state.ready:
        raise StateNotInitialized("chain solver state must come from chain_state_init")
    if direction is None:
        direction = state.direction
    state.direction = direction
    forward = direction == "forward"
    js = decomp.jstructure
    order = decomp.separator_order if forward else tuple(reversed(decomp.separator_order))
    state.cur = {
        t: (chain[0] if forward else chain[-1]) for t, chain in enumerate(decomp.chains)
    }

    ops = 0
    for b in order:
        theta_b = decomp.model.table(b).copy()
        for a in decomp.sep_in_edges[b]:
            key = (a, b)
            skip_sep = decomp.sep_minus[a] if forward else decomp.sep_plus[a]
            if b != skip_sep:
                window = decomp.local_separators[a]
                seq = window if forward else tuple(reversed(window))
                i = seq.index(b)
                pred = seq[i - 1] if i > 0 else None
                succ = seq[i + 1] if i + 1 < len(seq) else None
                scope_b = set(js.scope(b))
                if key in state.pending_noop:
                    state.pending_noop.discard(key)
                    if normalize:
                        m = state.messages[key]
                        state.messages[key] = m - float(m.min())
                elif (
                    reuse in ("after", "before-after")
                    and pred is not None
                    and scope_b < set(js.scope(pred))
                    and state.valid_child.get(a) == pred
                ):
                    inc = reuse_after(decomp, state, a, pred, b)
                    m = state.messages[key] + inc
                    if normalize:
                        m = m - float(m.min())
                    state.messages[key] = m
                    ops += 1
                elif (
                    reuse == "before-after"
                    and succ is not None
                    and scope_b < set(js.scope(succ))
                    and (a, succ) not in state.pending_noop
                ):
                    reuse_before(decomp, state, a, succ, b, normalize=normalize)
                    ops += 1
                else:
                    m = _eq20_message(decomp, state, a, b)
                    if normalize:
                        m = m - float(m.min())
                    state.messages[key] = m
                    ops += 1
                state.valid_child[a] = b
            theta_b += state.messages[key]
        state.theta_sep[b] = theta_b

        for t in decomp.trees_of.get(b, ()):
            a = state.cur.get(t)
            if a is None or decomp.sep_minus[a] is None:
                continue
            edge_sep = decomp.sep_plus[a] if forward else decomp.sep_minus[a]
            if b == edge_sep:
                chain = decomp.chains[t]
                k = chain.index(a)
                nxt = k + 1 if forward else k - 1
                if 0 <= nxt < len(chain):
                    state.cur[t] = chain[nxt]

    assert not state.pending_noop, "preemptive messages left unconsumed"
    assert ops <= len(decomp.message_edges), "more than one message operation per edge"
    state.msg_ops_last_pass = ops
    state.pass_index += 1
    state.direction = "backward" if forward else "forward"

    params = chain_state_tree_params(decomp, state)
    phi, cells = _bound_cells(decomp, params)
    state.diag_cells += cells
    return phi


def chain_state_factor_tables(decomp, state):
    """Current reparameterized cost of every factor under the stored messages."""
    js = decomp.jstructure
    out = []
    for fid in range(len(decomp.model.factors)):
        if fid in js.outer:
            t = decomp.model.table(fid).copy()
            for c in decomp.local_separators[fid]:
                t -= embed(state.messages[(fid, c)], js.scope(c), js.scope(fid))
            out.append(t)
        else:
            out.append(state.theta_sep[fid].copy())
    return out


def chain_state_tree_params(decomp, state):
    """Per-subproblem view of the message-form state (cumulative over
    appearance probability)."""
    tables = chain_state_factor_tables(decomp, state)
    out = []
    for t in range(len(decomp.chains)):
        out.append(
            {
                fid: tables[fid] / decomp.rho_factor[fid]
                for fid in sorted(decomp.tree_factors[t])
            }
        )
    return TreeParams(out)


@dataclass
class TraceRow:
    pass_index: int
    direction: str
    method: str
    bound: float
    meff: int
    ms: float


@dataclass
class SolveResult:
    rows: list
    state: object
    bound: float


def solve_trws(decomp, passes=500, eps=1e-7, reuse="after", normalize=True, method="trws"):
    """Alternate forward and backward message sweeps until the relative
    per-pass bound improvement drops below `eps` or the pass budget runs out."""
    state = chain_state_init(decomp)
    rows = []
    prev = None
    phi = None
    for k in range(passes):
        t0 = time.perf_counter()
        direction = state.direction
        phi = trws_chain_pass(decomp, state, reuse=reuse, normalize=normalize)
        rows.append(
            TraceRow(k, direction, method, phi, state.meff, (time.perf_counter() - t0) * 1e3)
        )
        if prev is not None and abs(phi - prev) <= eps * max(1.0, abs(phi)):
            break
        prev = phi
    return SolveResult(rows=rows, state=state, bound=phi)
