"""MAP labeling over the multiscale graph by expansion-move graph cuts.

The energy couples a per-node data term derived from classification risks
with a pairwise smoothness term over weighted graph edges.  Each expansion
move is solved exactly by a min-cut; a vectorized exhaustive minimizer is
provided as an oracle for small instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, LabelSet
from .maxflow import FlowNetwork, max_flow


def interaction_function(a: int, b: int, labels: LabelSet,
                         psi_c: float, psi_r: float) -> float:
    """Pairwise label transition penalty on the extended label set.

    Zero on agreement, ``psi_r`` when either side is the reject label,
    ``psi_c`` between distinct classes of one superclass, 1 otherwise.
    """
    if a == b:
        return 0.0
    if a == labels.reject_label or b == labels.reject_label:
        return psi_r
    if labels.same_superclass(a, b):
        return psi_c
    return 1.0


def interaction_table(labels: LabelSet, psi_c: float, psi_r: float) -> np.ndarray:
    """(N+1)x(N+1) table of the interaction function, index = label - 1."""
    m = labels.num_classes + 1
    t = np.empty((m, m))
    for a in range(1, m + 1):
        for b in range(1, m + 1):
            t[a - 1, b - 1] = interaction_function(a, b, labels, psi_c, psi_r)
    return t


def _triangle_ok(table: np.ndarray) -> bool:
    # psi(a,c) <= psi(a,b) + psi(b,c) for all triples, zero only on diagonal.
    m = table.shape[0]
    off = table[~np.eye(m, dtype=bool)]
    if off.size and off.min() <= 0.0:
        return False
    through = table[:, :, None] + table[None, :, :]   # [a,b,c] -> psi(a,b)+psi(b,c)
    return bool((table[:, None, :] <= through + 1e-15).all())


@dataclass(frozen=True)
class EnergyProblem:
    """Immutable energy instance: data terms, weighted edges, interaction.

    ``data_term`` rows are per-node vectors over the extended labels and are
    expected to be finite (build via :func:`data_term_from_risks` to apply
    the log floor).  ``edges`` holds global node index pairs, lower first.
    """

    data_term: np.ndarray            # (num_nodes, N+1)
    edges: np.ndarray                # (E, 2) int
    weights: np.ndarray              # (E,)
    labels: LabelSet
    psi_c: float
    psi_r: float
    alpha: float
    psi_table: np.ndarray = field(default=None)
    metric_ok: bool = field(default=None)

    def __post_init__(self):
        data = np.asarray(self.data_term, dtype=float)
        if data.ndim != 2 or data.shape[1] != self.labels.num_classes + 1:
            raise ConfigError("data_term must be (num_nodes, N+1)")
        if not np.isfinite(data).all():
            raise ConfigError("data_term entries must be finite")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if edges.shape[0] != weights.shape[0]:
            raise ConfigError("edges and weights disagree in length")
        if edges.size and (edges.min() < 0 or edges.max() >= data.shape[0]):
            raise ConfigError("edge endpoint out of range")
        if weights.size and (weights.min() < 0 or not np.isfinite(weights).all()):
            raise ConfigError("edge weights must be finite and >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha out of [0,1]")
        table = interaction_table(self.labels, self.psi_c, self.psi_r)
        object.__setattr__(self, "data_term", data)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "psi_table", table)
        object.__setattr__(self, "metric_ok", _triangle_ok(table))

    @property
    def num_nodes(self) -> int:
        return self.data_term.shape[0]

    @property
    def num_labels(self) -> int:
        return self.labels.num_classes + 1


def data_term_from_risks(risks: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """log of the risk table with a positivity floor so entries stay finite."""
    if not floor > 0.0:
        raise ConfigError("risk floor must be > 0")
    return np.log(np.maximum(np.asarray(risks, dtype=float), floor))


def energy(lab: np.ndarray, prob: EnergyProblem) -> float:
    """Total labeling energy: (1-alpha)*data + alpha*smoothness."""
    lab = np.asarray(lab, dtype=np.int64)
    if lab.shape != (prob.num_nodes,):
        raise ConfigError("labeling length does not match the problem")
    li = lab - 1
    data = prob.data_term[np.arange(prob.num_nodes), li].sum()
    if prob.edges.size:
        smooth = float(
            (prob.weights * prob.psi_table[li[prob.edges[:, 0]],
                                           li[prob.edges[:, 1]]]).sum())
    else:
        smooth = 0.0
    return (1.0 - prob.alpha) * float(data) + prob.alpha * smooth


def energy_batch(labs: np.ndarray, prob: EnergyProblem) -> np.ndarray:
    """Energies of many labelings at once; rows of ``labs`` are labelings."""
    labs = np.asarray(labs, dtype=np.int64)
    li = labs - 1
    data = prob.data_term[np.arange(prob.num_nodes)[None, :], li].sum(axis=1)
    smooth = np.zeros(labs.shape[0])
    if prob.edges.size:
        psi = prob.psi_table[li[:, prob.edges[:, 0]], li[:, prob.edges[:, 1]]]
        smooth = psi @ prob.weights
    return (1.0 - prob.alpha) * data + prob.alpha * smooth


def argmin_data_labeling(prob: EnergyProblem) -> np.ndarray:
    """Per-node argmin of the data term; ties go to the smallest label."""
    return np.argmin(prob.data_term, axis=1).astype(np.int64) + 1


def expansion_move(lab: np.ndarray, move_label: int,
                   prob: EnergyProblem) -> np.ndarray:
    """Optimal one-label expansion: each node keeps its label or switches.

    Builds the standard binary cut graph for the move and solves it exactly,
    so the returned labeling minimizes the energy over the whole move space.
    """
    if not prob.metric_ok:
        raise ConfigError("interaction function is not metric; "
                          "expansion moves are not applicable")
    if not 1 <= move_label <= prob.num_labels:
        raise ConfigError(f"move label {move_label} out of range")
    lab = np.asarray(lab, dtype=np.int64)
    n = prob.num_nodes
    dat = 1.0 - prob.alpha
    mi = move_label - 1
    cur = lab - 1

    # Binary variable x: 0 = keep current label, 1 = switch to move_label.
    theta0 = dat * prob.data_term[np.arange(n), cur]
    theta1 = dat * prob.data_term[:, mi]

    src, snk = n, n + 1
    net = FlowNetwork(n + 2)
    psi = prob.psi_table
    aw = prob.alpha * prob.weights
    for (i, j), vw in zip(prob.edges, aw):
        if vw == 0.0:
            continue
        a = vw * psi[cur[i], cur[j]]   # keep, keep
        b = vw * psi[cur[i], mi]       # keep, switch
        c = vw * psi[mi, cur[j]]       # switch, keep
        # switch, switch costs zero.
        theta1[i] += c - a
        theta1[j] += -c
        ncap = b + c - a
        if ncap < 0.0:
            # Metric interactions make this nonnegative; tolerate rounding.
            if ncap < -1e-9:
                raise ConfigError("non-submodular move despite metric check")
            ncap = 0.0
        if ncap > 0.0:
            net.add_edge(int(i), int(j), ncap)

    # Terminal links; only the difference of the two sides matters.
    base = np.minimum(theta0, theta1)
    for i in range(n):
        c1 = theta1[i] - base[i]
        c0 = theta0[i] - base[i]
        if c1 > 0.0:
            net.add_edge(src, i, c1)
        if c0 > 0.0:
            net.add_edge(i, snk, c0)

    result = max_flow(net, src, snk)
    out = lab.copy()
    keep = np.zeros(n, dtype=bool)
    for v in result.source_side:
        if v < n:
            keep[v] = True
    out[~keep] = move_label
    return out


def alpha_expansion(prob: EnergyProblem, init: np.ndarray = None,
                    max_cycles: int = 10) -> np.ndarray:
    """Cycle expansion moves over all labels until no move lowers the energy.

    Starts from the per-node data argmin by default, which makes the
    context-free reduction (alpha = 0) exact from the first cycle.  Moves
    are accepted only on a strict energy decrease, so the output never churns
    between equal-energy labelings and the energy sequence is non-increasing.
    """
    if not prob.metric_ok:
        raise ConfigError("interaction function is not metric; "
                          "alpha-expansion is not applicable")
    lab = argmin_data_labeling(prob) if init is None else \
        np.asarray(init, dtype=np.int64).copy()
    best = energy(lab, prob)
    order = list(range(1, prob.labels.num_classes + 1)) + [prob.labels.reject_label]
    for _ in range(max_cycles):
        improved = False
        for move in order:
            cand = expansion_move(lab, move, prob)
            e = energy(cand, prob)
            if e < best:
                lab, best, improved = cand, e, True
        if not improved:
            break
    return lab


_BRUTE_FORCE_CAP = 10 ** 7


def brute_force_map(prob: EnergyProblem) -> np.ndarray:
    """Globally optimal labeling by exhaustive enumeration (small instances).

    Ties resolve to the lexicographically smallest labeling.  Refuses when
    the label-space size exceeds 10^7.
    """
    m = prob.num_labels
    n = prob.num_nodes
    total = m ** n
    if total > _BRUTE_FORCE_CAP:
        raise ConfigError(
            f"brute force refused: {m}^{n} labelings exceed {_BRUTE_FORCE_CAP}")
    place = m ** np.arange(n - 1, -1, -1, dtype=np.int64)
    best_e = np.inf
    best = None
    chunk = 1 << 16
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        labs = (idx[:, None] // place[None, :]) % m + 1
        energies = energy_batch(labs, prob)
        k = int(np.argmin(energies))
        # Strict improvement keeps the lexicographically smallest optimum,
        # because enumeration order is lexicographic.
        if energies[k] < best_e:
            best_e = energies[k]
            best = labs[k].copy()
    return best.astype(np.int64)
