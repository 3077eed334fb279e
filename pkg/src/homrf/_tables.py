"""Dense table arithmetic over sorted node scopes.

Tables are C-ordered numpy arrays with one axis per scope node, axes sorted by
node id.  Because a subset of a sorted scope is again sorted, a table over
B <= A maps onto A's axes by inserting length-1 axes, and numpy broadcasting
does the rest.
"""

import itertools

import numpy as np


def table_shape(scope, label_counts):
    return tuple(label_counts[v] for v in scope)


def embed(table, scope, target_scope):
    """View of `table` (over `scope`) broadcastable against a `target_scope` table."""
    if scope == target_scope:
        return table
    pos = {v: i for i, v in enumerate(scope)}
    shape = tuple(table.shape[pos[v]] if v in pos else 1 for v in target_scope)
    return table.reshape(shape)


def reduce_min(table, scope, keep_scope):
    """Minimize out the axes of `scope` that are not in `keep_scope`."""
    axes = tuple(i for i, v in enumerate(scope) if v not in keep_scope)
    if not axes:
        return table.copy()
    return table.min(axis=axes)


def accumulate(pairs, target_scope, label_counts):
    """Sum tables over sub-scopes of `target_scope` into one dense table."""
    out = np.zeros(table_shape(target_scope, label_counts))
    for scope, table in pairs:
        out += embed(table, scope, target_scope)
    return out


def assignments(scope, label_counts):
    """Iterate joint states of `scope` in row-major (lowest-index-first) order."""
    return itertools.product(*(range(label_counts[v]) for v in scope))


def restrict(labeling, scope):
    """Joint state of `scope` under a full labeling (index tuple for its table)."""
    return tuple(labeling[v] for v in scope)
