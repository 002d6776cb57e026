"""AP selection, sparse effective channels and user clusters.

Indices are zero-based throughout the code; user ``k`` is column ``k``.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class APSelection:
    """Per-user AP subsets, ``sets[k]`` sorted by decreasing ``zeta``."""

    sets: tuple
    L: int

    def mask(self, n_aps):
        """Boolean ``(N, K)`` support mask."""
        m = np.zeros((n_aps, len(self.sets)), dtype=bool)
        for k, s in enumerate(self.sets):
            m[list(s), k] = True
        return m

    def to_dict(self):
        return {"L": self.L, "sets": [list(map(int, s)) for s in self.sets]}


@dataclass(frozen=True)
class SparseChannel:
    g_bar: np.ndarray
    support: APSelection


@dataclass(frozen=True)
class ClusterPlan:
    """User clusters used by the reduced-dimension precoder.

    ``selection_matrices[k]`` has one row per member of ``user_sets[k]`` (in
    ascending user order) and ``index_map[k]`` is the row that picks user k.
    """

    user_sets: tuple
    selection_matrices: tuple
    index_map: tuple
    shared_threshold: int

    def to_dict(self):
        sizes = [len(s) for s in self.user_sets]
        return {
            "N_a": self.shared_threshold,
            "cluster_sizes": sizes,
            "mean_cluster_size": float(np.mean(sizes)),
            "index_map": list(map(int, self.index_map)),
        }


def select_aps(zeta, L):
    """The ``L`` APs with the largest ``zeta`` for every user.

    Ties are broken toward the lowest AP index.
    """
    zeta = np.asarray(zeta, dtype=float)
    n_aps, n_users = zeta.shape
    if not 1 <= L <= n_aps:
        raise ValueError(f"L must lie in [1, {n_aps}], got {L}")
    sets = []
    for k in range(n_users):
        # stable sort on -zeta keeps lower indices first among equal values
        order = np.argsort(-zeta[:, k], kind="stable")
        sets.append(tuple(int(n) for n in order[:L]))
    return APSelection(tuple(sets), int(L))


def sparse_channel(g_hat, sel):
    g_hat = np.asarray(g_hat)
    if len(sel.sets) != g_hat.shape[1]:
        raise ValueError("selection and channel disagree on the number of users")
    g_bar = np.where(sel.mask(g_hat.shape[0]), g_hat, 0.0)
    return SparseChannel(g_bar, sel)


def build_clusters(sel, n_shared):
    """Group with user k every user sharing at least ``n_shared`` APs with it."""
    if not 0 <= n_shared <= sel.L:
        raise ValueError(f"N_a must lie in [0, {sel.L}], got {n_shared}")
    n_users = len(sel.sets)
    ap_sets = [set(s) for s in sel.sets]
    user_sets, mats, qs = [], [], []
    for k in range(n_users):
        members = tuple(i for i in range(n_users)
                        if i == k or len(ap_sets[i] & ap_sets[k]) >= n_shared)
        U = np.zeros((len(members), n_users))
        U[np.arange(len(members)), members] = 1.0
        user_sets.append(members)
        mats.append(U)
        qs.append(members.index(k))
    return ClusterPlan(tuple(user_sets), tuple(mats), tuple(qs), int(n_shared))


def reduced_channel(g_hat, plan, k):
    """``U_k G_hat^T``: the cluster's rows of the ``K x N`` channel."""
    return plan.selection_matrices[k] @ np.asarray(g_hat).T
