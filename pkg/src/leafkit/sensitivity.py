"""How far did the filters move from their initialization?

Each filter's magnitude frequency response is a sampled Gaussian, so after
normalization it reads as a probability mass function over a fixed frequency
grid.  Movement between two snapshots is then the Jensen-Shannon distance

    D_JS(P, Q) = sqrt( (D_KL(P||M) + D_KL(Q||M)) / 2 ),   M = (P + Q) / 2

with base-2 logs, a true metric bounded by [0, 1].  Trajectories stack the
per-filter distance from the epoch-0 snapshot across training epochs.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, SnapshotError, SpecError, SupportError
from .filterbank import GaborFilterbank, analytic_freq_response
from .utils import fmt_float

DEFAULT_BINS = 1024


@dataclass(frozen=True)
class FilterPmf:
    """Probability mass over `bins` uniform bin centres spanning [0, Nyquist]."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=np.float64))
        if self.probs.ndim != 1 or len(self.probs) < 2:
            raise SpecError("FilterPmf needs a 1-D vector of at least 2 bins")
        if np.any(self.probs < 0) or abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise SpecError("FilterPmf entries must be nonnegative and sum to 1")

    @property
    def bins(self) -> int:
        return len(self.probs)


def grid_centres(bins: int) -> np.ndarray:
    """Bin centres of the uniform normalized-frequency grid."""
    return (np.arange(bins) + 0.5) / bins


def filter_pmf(eta: float, sigma_bw: float, bins: int = DEFAULT_BINS,
               use_power: bool = False) -> FilterPmf:
    """Sample the analytic response on the grid and normalize to sum 1.

    `use_power` squares the magnitude envelope first (config switch; the
    default follows the sampled-Gaussian reading of the response).
    """
    if bins < 64:
        raise SpecError("bins must be >= 64")
    response = analytic_freq_response(eta, sigma_bw, grid_centres(bins))
    if use_power:
        response = response**2
    total = response.sum()
    if total <= 0.0:
        raise SpecError("filter response vanishes on the whole grid")
    return FilterPmf(response / total)


def _check_same_grid(a: FilterPmf, b: FilterPmf):
    if a.bins != b.bins:
        raise SpecError(f"pmf grids differ: {a.bins} vs {b.bins} bins")


def kl_divergence(a: FilterPmf, b: FilterPmf) -> float:
    """sum A(x) log2(A(x)/B(x)) with the 0 log 0 := 0 convention, in bits."""
    _check_same_grid(a, b)
    pa, pb = a.probs, b.probs
    support = pa > 0.0
    if np.any(pb[support] == 0.0):
        raise SupportError("KL undefined: A has mass where B has none")
    ratio = pa[support] / pb[support]
    return float(np.sum(pa[support] * np.log2(ratio)))


def _kl_against_mixture(a: np.ndarray, b: np.ndarray) -> float:
    """KL(A || (A+B)/2) in bits via the ratio 2A/(A+B).

    Written this way the denominator can never underflow below A, so the
    mixture support always covers A even for subnormal tail probabilities.
    """
    support = a > 0.0
    ratio = 2.0 * a[support] / (a[support] + b[support])
    return float(np.sum(a[support] * np.log2(ratio)))


def jsd(p: FilterPmf, q: FilterPmf) -> float:
    """Jensen-Shannon distance at base 2; always defined, always in [0, 1]."""
    _check_same_grid(p, q)
    divergence = 0.5 * (
        _kl_against_mixture(p.probs, q.probs) + _kl_against_mixture(q.probs, p.probs)
    )
    return float(np.sqrt(max(divergence, 0.0)))


@dataclass
class JsdTrajectory:
    """Per-epoch, per-filter distance from the initialization snapshot."""

    distances: np.ndarray  # (epochs, N); row 0 is identically 0
    mean_per_epoch: np.ndarray

    @property
    def n_epochs(self):
        return self.distances.shape[0]

    @property
    def n_filters(self):
        return self.distances.shape[1]


def trajectory(snapshots, bins: int = DEFAULT_BINS, use_power: bool = False) -> JsdTrajectory:
    """Distance of every filter in every snapshot from snapshot 0."""
    snapshots = list(snapshots)
    if not snapshots:
        raise SnapshotError("need at least one snapshot")
    n = snapshots[0].n_filters
    for i, snap in enumerate(snapshots):
        if not isinstance(snap, GaborFilterbank) or snap.n_filters != n:
            raise SnapshotError(f"snapshot {i} has inconsistent filter count")

    init = snapshots[0]
    init_pmfs = [filter_pmf(init.eta[k], init.sigma_bw[k], bins, use_power) for k in range(n)]
    rows = np.zeros((len(snapshots), n))
    for e, snap in enumerate(snapshots):
        if e == 0:
            continue
        for k in range(n):
            current = filter_pmf(snap.eta[k], snap.sigma_bw[k], bins, use_power)
            rows[e, k] = jsd(init_pmfs[k], current)
    return JsdTrajectory(rows, rows.mean(axis=1))


def summarize(traj: JsdTrajectory) -> dict:
    """Final mean, per-filter final distances, and the most-moved filter."""
    if traj.n_epochs < 1:
        raise SnapshotError("empty trajectory")
    last = traj.distances[-1]
    return {
        "final_mean": float(last.mean()),
        "final_per_filter": last.copy(),
        "max_moving_filter": int(np.argmax(last)),
    }


# ---------------------------------------------------------------------------
# CSV export


def trajectory_to_csv(traj: JsdTrajectory) -> str:
    out = io.StringIO()
    out.write("epoch,filter_index,jsd\n")
    for e in range(traj.n_epochs):
        for k in range(traj.n_filters):
            out.write(f"{e},{k},{fmt_float(traj.distances[e, k])}\n")
    return out.getvalue()


def trajectory_from_csv(text: str) -> JsdTrajectory:
    triples = []
    header_seen = False
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != "epoch,filter_index,jsd":
                raise FormatError(f"unexpected trajectory CSV header: {line!r}")
            header_seen = True
            continue
        e, k, v = line.split(",")
        triples.append((int(e), int(k), float(v)))
    if not triples:
        raise FormatError("trajectory CSV has no rows")
    n_epochs = max(t[0] for t in triples) + 1
    n_filters = max(t[1] for t in triples) + 1
    rows = np.zeros((n_epochs, n_filters))
    for e, k, v in triples:
        rows[e, k] = v
    return JsdTrajectory(rows, rows.mean(axis=1))


def summary_to_csv(traj: JsdTrajectory) -> str:
    summary = summarize(traj)
    out = io.StringIO()
    out.write(f"# mean_final_jsd = {fmt_float(summary['final_mean'])}\n")
    out.write(f"# max_moving_filter = {summary['max_moving_filter']}\n")
    out.write("filter_index,final_jsd\n")
    for k, v in enumerate(summary["final_per_filter"]):
        out.write(f"{k},{fmt_float(v)}\n")
    return out.getvalue()
