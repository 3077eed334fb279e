"""Monotonic junction-chain decompositions.

Outer factors are covered by ordered chains whose consecutive members overlap
in a separator factor, with every node of the earlier factor's private part
preceding the separator and the separator preceding the later factor's private
part under a fixed total node order.  The node order is extended to a total
order on separator factors; each outer factor then owns a contiguous window of
separators that the solvers sweep.
"""

from dataclasses import dataclass, field

import numpy as np

from ._tables import table_shape
from .errors import MissingSeparatorFactor
from .model import Factor, Model, close_j


def sigma_key(scope, pos):
    """Sort key for factor scopes: (min, max, remaining nodes ascending)."""
    ranks = sorted(pos[v] for v in scope)
    if len(ranks) == 1:
        return (ranks[0], ranks[0])
    return (ranks[0], ranks[-1], *ranks[1:-1])


def extend_order_to_separators(jstructure, node_order):
    """Total order on separator factors extending the node order.

    Separators are sorted lexicographically by (min, max, rest); comparing
    first on min and then on max guarantees that windows of consecutive chain
    factors meet exactly at their shared separator.
    """
    pos = _node_pos(node_order)
    seps = sorted(jstructure.separators, key=lambda f: sigma_key(jstructure.scope(f), pos))
    return tuple(seps)


def _node_pos(node_order):
    pos = {v: i for i, v in enumerate(node_order)}
    if len(pos) != len(node_order):
        raise ValueError("node order repeats a node")
    return pos


def sep_bounds(jstructure, node_order, chain, outer_factor):
    """Left and right separators of an outer factor within its chain.

    Interior chain members use the intersection with their neighbor; the first
    and last fall back to the singleton of their minimal / maximal node.
    """
    pos = _node_pos(node_order)
    i = list(chain).index(outer_factor)
    scope = jstructure.scope(outer_factor)
    index = {jstructure.scope(f): f for f in range(len(jstructure.scopes))}

    def lookup(s, side):
        fid = index.get(s)
        if fid is None:
            raise MissingSeparatorFactor(f"{side} separator {s} of factor {outer_factor} is absent")
        return fid

    if len(scope) == 1:
        return None, None
    if i > 0:
        left = tuple(sorted(set(jstructure.scope(chain[i - 1])) & set(scope)))
    else:
        left = (min(scope, key=lambda v: pos[v]),)
    if i < len(chain) - 1:
        right = tuple(sorted(set(scope) & set(jstructure.scope(chain[i + 1]))))
    else:
        right = (max(scope, key=lambda v: pos[v]),)
    return lookup(left, "left"), lookup(right, "right")


def local_separator_window(decomposition, outer_factor):
    """Separators of an outer factor's locals that fall inside its bounds."""
    d = decomposition
    lo = d.sep_minus.get(outer_factor)
    hi = d.sep_plus.get(outer_factor)
    if lo is None:
        return ()
    rank = d.sep_rank
    members = [
        b
        for b in d.jstructure.locals[outer_factor]
        if b in d.jstructure.separators and rank[lo] <= rank[b] <= rank[hi]
    ]
    return tuple(sorted(members, key=rank.__getitem__))


def _eq15_holds(prev_scope, next_scope, pos):
    """Every private node of the earlier factor precedes the shared nodes,
    which precede the private nodes of the later factor."""
    shared = set(prev_scope) & set(next_scope)
    if not shared:
        return False
    if shared == set(prev_scope) or shared == set(next_scope):
        return False
    left = max(pos[v] for v in set(prev_scope) - shared)
    lo = min(pos[v] for v in shared)
    hi = max(pos[v] for v in shared)
    right = min(pos[v] for v in set(next_scope) - shared)
    return left < lo and hi < right


def _rip_preserved(chain_scopes, new_scope):
    """Running intersection on the chain extended by `new_scope`."""
    scopes = list(chain_scopes) + [new_scope]
    last = set(new_scope)
    for i in range(len(scopes) - 1):
        inter = set(scopes[i]) & last
        for j in range(i + 1, len(scopes) - 1):
            if not inter <= set(scopes[j]):
                return False
    return True


@dataclass
class Decomposition:
    """A chain cover of the outer factors plus everything derived from it."""

    model: Model
    jstructure: object
    node_order: tuple
    chains: tuple
    rho: tuple
    rho_factor: dict
    sep_minus: dict
    sep_plus: dict
    local_separators: dict
    separator_order: tuple
    augmented_factors: tuple = ()

    sep_rank: dict = field(default_factory=dict, repr=False)
    tree_of: dict = field(default_factory=dict, repr=False)
    trees_of: dict = field(default_factory=dict, repr=False)
    tree_factors: tuple = ()
    tree_nodes: tuple = ()
    message_edges: tuple = ()
    sep_in_edges: dict = field(default_factory=dict, repr=False)
    eq20_extra: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        js = self.jstructure
        self.sep_rank = {b: i for i, b in enumerate(self.separator_order)}
        self.tree_of = {a: t for t, chain in enumerate(self.chains) for a in chain}
        self.tree_factors = tuple(
            frozenset().union(*(js.locals[a] for a in chain)) for chain in self.chains
        )
        trees_of = {}
        for t, fs in enumerate(self.tree_factors):
            for c in fs:
                trees_of.setdefault(c, []).append(t)
        self.trees_of = {c: tuple(ts) for c, ts in trees_of.items()}
        self.tree_nodes = tuple(
            tuple(sorted({v for a in chain for v in js.scope(a)}))
            for chain in self.chains
        )
        pos = _node_pos(self.node_order)
        sig = {a: sigma_key(js.scope(a), pos) for a in js.outer}
        edges = []
        sep_in = {b: [] for b in self.separator_order}
        for a in sorted(js.outer, key=lambda f: sig[f]):
            for b in self.local_separators.get(a, ()):
                edges.append((a, b))
                sep_in[b].append(a)
        self.message_edges = tuple(edges)
        self.sep_in_edges = {b: tuple(sorted(srcs, key=lambda f: sig[f])) for b, srcs in sep_in.items()}
        extra = {}
        for a, b in edges:
            fb = js.locals[b]
            extra[(a, b)] = tuple(
                sorted(c for c in js.locals[a] if c in js.separators and c not in fb)
            )
        self.eq20_extra = extra

    @property
    def node_pos(self):
        return _node_pos(self.node_order)


def build_monotonic_chains(model, jstructure, node_order=None):
    """Cover the outer factors with monotonic chains.

    Missing singleton factors, missing chain-intersection factors and the
    corresponding marginalization edges are added with zero cost tables before
    the closure is recomputed; zero additions leave every labeling's cost and
    the existing constraints untouched.  Outer factors are visited in scope
    order and appended to the first open chain whose tail admits them; a
    factor no chain admits opens a new one.  Chain probabilities are uniform.
    """
    if node_order is None:
        node_order = tuple(range(model.node_count))
    node_order = tuple(int(v) for v in node_order)
    pos = _node_pos(node_order)
    if sorted(node_order) != list(range(model.node_count)):
        raise ValueError("node order is not a permutation of the nodes")

    scopes = list(model.scopes)
    tables = [f.table for f in model.factors]
    index = {s: i for i, s in enumerate(scopes)}
    edges = set(jstructure.edges)
    added = []

    def ensure_factor(scope):
        fid = index.get(scope)
        if fid is None:
            fid = len(scopes)
            scopes.append(scope)
            tables.append(np.zeros(table_shape(scope, model.label_counts)))
            index[scope] = fid
            added.append(scope)
        return fid

    for v in range(model.node_count):
        ensure_factor((v,))
    for fid, s in enumerate(list(scopes)):
        if len(s) >= 2:
            for v in s:
                edges.add((fid, index[(v,)]))

    js = close_j(scopes, edges)

    sig = {a: sigma_key(js.scope(a), pos) for a in js.outer}
    chains = []
    for a in sorted(js.outer, key=lambda f: sig[f]):
        scope_a = js.scope(a)
        placed = False
        for chain in chains:
            tail = js.scope(chain[-1])
            if _eq15_holds(tail, scope_a, pos) and _rip_preserved(
                [js.scope(f) for f in chain], scope_a
            ):
                chain.append(a)
                placed = True
                break
        if not placed:
            chains.append([a])

    for chain in chains:
        for i in range(len(chain) - 1):
            s = tuple(sorted(set(js.scope(chain[i])) & set(js.scope(chain[i + 1]))))
            fid = ensure_factor(s)
            edges.add((chain[i], fid))
            edges.add((chain[i + 1], fid))

    if len(scopes) != len(model.scopes) or edges != set(jstructure.edges):
        model = Model(
            model.label_counts,
            [Factor(s, np.ascontiguousarray(t)) for s, t in zip(scopes, tables)],
        )
        js = close_j(scopes, edges)

    chains = tuple(tuple(c) for c in chains)
    separator_order = extend_order_to_separators(js, node_order)

    sep_minus, sep_plus, windows = {}, {}, {}
    rank = {b: i for i, b in enumerate(separator_order)}
    for chain in chains:
        for a in chain:
            lo, hi = sep_bounds(js, node_order, chain, a)
            sep_minus[a] = lo
            sep_plus[a] = hi
            if lo is None:
                windows[a] = ()
            else:
                members = [
                    b
                    for b in js.locals[a]
                    if b in js.separators and rank[lo] <= rank[b] <= rank[hi]
                ]
                windows[a] = tuple(sorted(members, key=rank.__getitem__))

    rho = tuple([1.0 / len(chains)] * len(chains)) if chains else ()
    tree_factors = [frozenset().union(*(js.locals[a] for a in chain)) for chain in chains]
    rho_factor = {}
    for t, fs in enumerate(tree_factors):
        for c in fs:
            rho_factor[c] = rho_factor.get(c, 0.0) + rho[t]

    return Decomposition(
        model=model,
        jstructure=js,
        node_order=node_order,
        chains=chains,
        rho=rho,
        rho_factor=rho_factor,
        sep_minus=sep_minus,
        sep_plus=sep_plus,
        local_separators=windows,
        separator_order=separator_order,
        augmented_factors=tuple(added),
    )


@dataclass
class Violation:
    code: str
    detail: str


@dataclass
class ValidationReport:
    violations: list

    @property
    def ok(self):
        return not self.violations

    def codes(self):
        return sorted({v.code for v in self.violations})


def validate_decomposition(model, jstructure, decomposition):
    """Check every structural requirement of a chain decomposition.

    Violations are reported, not raised, so a deliberately broken structure
    can be inspected.  Covers the chain-cover requirements, the derived facts
    about nested locals and window coverage, and the probability bookkeeping.
    """
    d = decomposition
    js = jstructure
    pos = _node_pos(d.node_order)
    index = {js.scope(f): f for f in range(len(js.scopes))}
    out = []

    def bad(code, detail):
        out.append(Violation(code, detail))

    # each subproblem is the union of its outer factors' locals
    for t, chain in enumerate(d.chains):
        want = frozenset().union(*(js.locals[a] for a in chain))
        if d.tree_factors[t] != want:
            bad("tree-factors", f"chain {t} stores a factor set differing from its locals union")

    # running intersection along each chain
    for t, chain in enumerate(d.chains):
        scopes = [set(js.scope(a)) for a in chain]
        for i in range(len(chain)):
            for j in range(i + 2, len(chain)):
                inter = scopes[i] & scopes[j]
                for k in range(i + 1, j):
                    if not inter <= scopes[k]:
                        bad(
                            "running-intersection",
                            f"chain {t}: {chain[i]} and {chain[j]} intersect outside {chain[k]}",
                        )

    # consecutive intersections are factors known to both neighbors
    for t, chain in enumerate(d.chains):
        for i in range(len(chain) - 1):
            a, b = chain[i], chain[i + 1]
            s = tuple(sorted(set(js.scope(a)) & set(js.scope(b))))
            fid = index.get(s)
            if fid is None:
                bad("neighbor-separator", f"chain {t}: intersection {s} of {a},{b} is not a factor")
                continue
            if fid not in js.locals[a] or fid not in js.locals[b]:
                bad("neighbor-separator", f"chain {t}: factor {fid} not local to both {a} and {b}")

    # singleton locals everywhere
    for fid, scope in enumerate(js.scopes):
        for v in scope:
            single = index.get((v,))
            if single is None or (single != fid and single not in js.locals[fid]):
                bad("singleton-local", f"factor {fid} lacks the singleton of node {v}")

    # every outer factor in exactly one chain
    seen = {}
    for t, chain in enumerate(d.chains):
        for a in chain:
            seen[a] = seen.get(a, 0) + 1
    for a in js.outer:
        if seen.get(a, 0) != 1:
            bad("outer-cover", f"outer factor {a} appears in {seen.get(a, 0)} chains")
    for a, k in seen.items():
        if a not in js.outer:
            bad("outer-cover", f"chain member {a} is not an outer factor")

    # monotonicity of consecutive members
    for t, chain in enumerate(d.chains):
        for i in range(len(chain) - 1):
            if not _eq15_holds(js.scope(chain[i]), js.scope(chain[i + 1]), pos):
                bad("monotonicity", f"chain {t}: {chain[i]} -> {chain[i + 1]} breaks the node order")

    # separator order extends the node order
    sep = list(d.separator_order)
    for i, a in enumerate(sep):
        for b in sep[i + 1 :]:
            sa, sb = js.scope(a), js.scope(b)
            mina, maxa = min(pos[v] for v in sa), max(pos[v] for v in sa)
            minb, maxb = min(pos[v] for v in sb), max(pos[v] for v in sb)
            if mina > minb and maxa > maxb:
                bad("order-extension", f"separators {a} before {b} contradict the node order")
            if maxa > maxb and mina >= minb:
                bad("order-extension", f"separator {a} should follow {b}")

    # nested members of one subproblem are locals of each other
    for t in range(len(d.chains)):
        fs = sorted(d.tree_factors[t])
        for a in fs:
            for b in fs:
                if a != b and set(js.scope(b)) < set(js.scope(a)) and b not in js.locals[a]:
                    bad("nested-local", f"chain {t}: {b} inside {a} but not local to it")

    # windows of a chain's factors cover exactly its separators
    for t, chain in enumerate(d.chains):
        union = set()
        for a in chain:
            union |= set(d.local_separators.get(a, ()))
        want = {c for c in d.tree_factors[t] if c in js.separators}
        if union != want:
            bad("window-cover", f"chain {t}: windows cover {sorted(union)} != {sorted(want)}")

    # window bounds are increasing and consecutive windows share their joint
    rank = d.sep_rank
    for t, chain in enumerate(d.chains):
        if len(js.scope(chain[0])) == 1:
            continue
        prev_hi = None
        for a in chain:
            lo, hi = d.sep_minus[a], d.sep_plus[a]
            if rank[lo] > rank[hi]:
                bad("window-bounds", f"factor {a}: left separator after right one")
            if prev_hi is not None:
                if lo != prev_hi:
                    bad("window-bounds", f"factor {a}: left separator is not the previous right one")
                if rank[prev_hi] >= rank[hi]:
                    bad("window-bounds", f"factor {a}: right separator does not advance")
            prev_hi = hi

    # probability bookkeeping
    if d.chains and abs(sum(d.rho) - 1.0) > 1e-12:
        bad("probabilities", f"chain probabilities sum to {sum(d.rho)}")
    for c, ts in d.trees_of.items():
        want = sum(d.rho[t] for t in ts)
        if abs(d.rho_factor.get(c, 0.0) - want) > 1e-12:
            bad("probabilities", f"factor {c}: appearance probability {d.rho_factor.get(c)} != {want}")
    for b in js.separators:
        if not d.trees_of.get(b):
            bad("separator-cover", f"separator {b} belongs to no chain")

    return ValidationReport(out)
