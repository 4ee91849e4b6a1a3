"""Evaluation protocol: counterfactual curves and AUC, MMD in-distribution
tests with a Gaussian earth-mover kernel, Top-K robustness, and the
random-perturbation baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .counterfactual import ExplanationRecord
from .diffusion import corrupt_adj
from .gcn import GcnClassifier
from .graphs import Graph
from .tensor import ContractError

MR_GRID = np.linspace(0.0, 0.3, 10)
CLUSTERING_BINS = 100
SPECTRUM_BINS = 100


@dataclass
class Histogram:
    edges: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        total = self.mass.sum()
        if total > 0:
            self.mass = self.mass / total

    @property
    def width(self) -> float:
        return float(self.edges[1] - self.edges[0])


# -- counterfactual metrics --------------------------------------------------


def cf_accuracy(records) -> float:
    if not records:
        raise ContractError("no records")
    return 1.0 - sum(r.y_new == r.y_orig for r in records) / len(records)


def fidelity(records) -> float:
    if not records:
        raise ContractError("no records")
    return float(np.mean([r.prob_drop() for r in records]))


def auc_over_mr(curve) -> float:
    """Trapezoidal area over the 10-point MR grid, normalized by 0.3."""
    curve = np.asarray(curve, dtype=np.float64)
    if curve.shape != MR_GRID.shape:
        raise ContractError(f"curve must have {len(MR_GRID)} points")
    area = float(np.sum((curve[1:] + curve[:-1]) / 2.0 * np.diff(MR_GRID)))
    return area / (MR_GRID[-1] - MR_GRID[0])


def random_baseline(g: Graph, target_mr: float, classifier: GcnClassifier,
                    rng: np.random.Generator, graph_id=None) -> ExplanationRecord:
    """Flips a uniformly random set of ceil(target_mr * |E|) pairs."""
    pairs = g.n * (g.n - 1) // 2
    budget = min(int(np.ceil(target_mr * g.num_edges())), pairs)
    iu, ju = np.triu_indices(g.n, 1)
    pick = rng.choice(pairs, size=budget, replace=False) if budget else []
    out = g.copy()
    added, deleted = [], []
    scores = np.zeros((g.n, g.n))
    for k in pick:
        i, j = int(iu[k]), int(ju[k])
        scores[i, j] = scores[j, i] = 1.0
        if out.adj[i, j]:
            out.adj[i, j] = out.adj[j, i] = 0
            deleted.append([i, j])
        else:
            out.adj[i, j] = out.adj[j, i] = 1
            added.append([i, j])
    out.refresh_features()
    y_orig, p_orig = classifier.predict(g)
    y_new, p_new = classifier.predict(out)
    edges = g.num_edges()
    return ExplanationRecord(g, out, target_mr, budget / edges if edges else 0.0,
                             y_orig, p_orig, y_new, p_new, scores, added,
                             deleted, graph_id)


# -- graph statistics --------------------------------------------------------


def jacobi_eigenvalues(a: np.ndarray, tol: float = 1e-10,
                       max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if n == 1:
        return a.diagonal().copy()
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2)
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < tol / (n * n):
                    continue
                theta = 0.5 * np.arctan2(2 * a[p, q], a[q, q] - a[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
    return np.sort(a.diagonal())


def normalized_laplacian(adj: np.ndarray) -> np.ndarray:
    adj = adj.astype(np.float64)
    deg = adj.sum(axis=1)
    with np.errstate(divide="ignore"):
        d_inv_sqrt = np.where(deg > 0, deg ** -0.5, 0.0)
    return np.eye(adj.shape[0]) - d_inv_sqrt[:, None] * adj * d_inv_sqrt[None, :]


def local_clustering(adj: np.ndarray) -> np.ndarray:
    adj = adj.astype(np.float64)
    deg = adj.sum(axis=1)
    triangles = np.diag(adj @ adj @ adj) / 2.0
    denom = deg * (deg - 1) / 2.0
    return np.where(denom > 0, triangles / np.maximum(denom, 1), 0.0)


def graph_statistics(g: Graph, max_degree: int | None = None):
    """(degree, clustering, spectrum) histograms; spectrum over the
    symmetric normalized Laplacian eigenvalues in [0, 2]."""
    deg = g.adj.sum(axis=1).astype(int)
    dmax = max_degree if max_degree is not None else max(int(deg.max(initial=0)), 1)
    deg_edges = np.arange(dmax + 2, dtype=np.float64)
    deg_hist = Histogram(deg_edges,
                         np.bincount(np.minimum(deg, dmax), minlength=dmax + 1)
                         .astype(np.float64))
    clus = local_clustering(g.adj)
    c_hist, c_edges = np.histogram(clus, bins=CLUSTERING_BINS, range=(0.0, 1.0))
    eig = jacobi_eigenvalues(normalized_laplacian(g.adj))
    assert np.all((eig > -1e-8) & (eig < 2 + 1e-8)), "Laplacian spectrum out of [0,2]"
    s_hist, s_edges = np.histogram(np.clip(eig, 0.0, 2.0),
                                   bins=SPECTRUM_BINS, range=(0.0, 2.0))
    return (deg_hist,
            Histogram(c_edges, c_hist.astype(np.float64)),
            Histogram(s_edges, s_hist.astype(np.float64)))


# -- MMD with Gaussian-EMD kernel -------------------------------------------


def emd_1d(a: Histogram, b: Histogram) -> float:
    """1-D earth mover's distance between normalized histograms sharing bins."""
    if a.mass.shape != b.mass.shape or a.width != b.width:
        raise ContractError("histogram binning mismatch")
    return float(np.sum(np.abs(np.cumsum(a.mass) - np.cumsum(b.mass))) * a.width)


def mmd_gaussian_emd(set_a, set_b, sigma: float = 1.0) -> float:
    """sqrt of E k(a,a') + E k(b,b') - 2 E k(a,b), k = exp(-EMD^2 / 2 sigma^2)."""
    if not set_a or not set_b:
        raise ContractError("empty histogram set")

    def kernel_mean(xs, ys):
        total = 0.0
        for x in xs:
            for y in ys:
                total += np.exp(-emd_1d(x, y) ** 2 / (2 * sigma ** 2))
        return total / (len(xs) * len(ys))

    mmd2 = kernel_mean(set_a, set_a) + kernel_mean(set_b, set_b) \
        - 2 * kernel_mean(set_a, set_b)
    return float(np.sqrt(max(mmd2, 0.0)))


def mmd_suite(graphs_a, graphs_b, sigma: float = 1.0) -> dict:
    """Degree/clustering/spectrum MMD between two graph sets, plus the sum."""
    dmax = max(max(int(g.adj.sum(axis=1).max(initial=0)) for g in graphs_a),
               max(int(g.adj.sum(axis=1).max(initial=0)) for g in graphs_b), 1)
    stats_a = [graph_statistics(g, dmax) for g in graphs_a]
    stats_b = [graph_statistics(g, dmax) for g in graphs_b]
    out = {}
    for k, name in enumerate(("degree", "clustering", "spectrum")):
        out[name] = mmd_gaussian_emd([s[k] for s in stats_a],
                                     [s[k] for s in stats_b], sigma)
    out["sum"] = out["degree"] + out["clustering"] + out["spectrum"]
    return out


# -- robustness --------------------------------------------------------------


def _changed_pairs(record: ExplanationRecord):
    return {tuple(p) for p in record.added} | {tuple(p) for p in record.deleted}


def topk_robustness(explain, graphs, k: int, noise_levels,
                    rng: np.random.Generator, fixed_mr: float = 0.2):
    """Fraction of the K top-scored changed pairs that recur when the input is
    perturbed (each pair flipped with probability sigma).

    `explain` maps a Graph to an ExplanationRecord deterministically.
    Instances whose perturbed graph switches predicted label are skipped.
    Returns [(sigma, mean top-K accuracy)].
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if any(s > 0.1 for s in noise_levels):
        raise ValueError("noise levels above 0.1 are outside the protocol")
    base = [explain(g) for g in graphs]
    curve = []
    for sigma in noise_levels:
        accs = []
        for g, rec in zip(graphs, base):
            noisy = g.copy()
            noisy.adj = corrupt_adj(g.adj, sigma, rng)
            noisy.refresh_features()
            noisy_rec = explain(noisy)
            if noisy_rec.y_orig != rec.y_orig:
                continue
            changed = _changed_pairs(rec)
            if not changed:
                continue
            ranked = sorted(changed,
                            key=lambda p: (-rec.scores[p[0], p[1]], p[0], p[1]))
            top = ranked[:k]
            recur = _changed_pairs(noisy_rec)
            accs.append(sum(p in recur for p in top) / len(top))
        curve.append((float(sigma), float(np.mean(accs)) if accs else 0.0))
    return curve


# -- report ------------------------------------------------------------------


@dataclass
class MetricReport:
    mr_grid: np.ndarray = field(default_factory=lambda: MR_GRID.copy())
    cf_acc: np.ndarray | None = None
    fid: np.ndarray | None = None
    cf_acc_auc: float | None = None
    fid_auc: float | None = None
    baseline_cf_acc: np.ndarray | None = None
    baseline_auc: float | None = None
    mmd: dict | None = None
    mmd_baseline: dict | None = None
    mmd_sigma: float = 1.0
    robustness: list | None = None
    density_mean: float | None = None

    def write_csvs(self, prefix: str) -> list:
        written = []
        if self.cf_acc is not None:
            path = f"{prefix}_curve.csv"
            with open(path, "w") as fh:
                fh.write("mr,cf_acc,fidelity,baseline_cf_acc\n")
                for i, mr in enumerate(self.mr_grid):
                    base = (self.baseline_cf_acc[i]
                            if self.baseline_cf_acc is not None else float("nan"))
                    fh.write(f"{mr:.6f},{self.cf_acc[i]:.6f},"
                             f"{self.fid[i]:.6f},{base:.6f}\n")
            written.append(path)
        if self.mmd is not None:
            path = f"{prefix}_mmd.csv"
            with open(path, "w") as fh:
                fh.write("metric,mmd,baseline_mmd\n")
                for name in ("degree", "clustering", "spectrum", "sum"):
                    base = (self.mmd_baseline[name]
                            if self.mmd_baseline else float("nan"))
                    fh.write(f"{name},{self.mmd[name]:.6f},{base:.6f}\n")
            written.append(path)
        if self.robustness is not None:
            path = f"{prefix}_robustness.csv"
            with open(path, "w") as fh:
                fh.write("sigma,topk_acc\n")
                for sigma, acc in self.robustness:
                    fh.write(f"{sigma:.6f},{acc:.6f}\n")
            written.append(path)
        return written

    def write_text(self, path: str) -> None:
        lines = ["evaluation report", "=" * 17]
        if self.cf_acc_auc is not None:
            lines.append(f"cf_acc_auc (normalized over MR 0..0.3): {self.cf_acc_auc:.4f}")
        if self.fid_auc is not None:
            lines.append(f"fidelity_auc: {self.fid_auc:.4f}")
        if self.baseline_auc is not None:
            lines.append(f"random_baseline_cf_acc_auc: {self.baseline_auc:.4f}")
        if self.mmd is not None:
            lines.append(f"mmd (kernel sigma={self.mmd_sigma}): "
                         + ", ".join(f"{k}={v:.4f}" for k, v in self.mmd.items()))
        if self.mmd_baseline is not None:
            lines.append("mmd baseline: "
                         + ", ".join(f"{k}={v:.4f}" for k, v in self.mmd_baseline.items()))
        if self.robustness is not None:
            lines.append("robustness: "
                         + ", ".join(f"sigma={s:.2f}:{a:.3f}" for s, a in self.robustness))
        if self.density_mean is not None:
            lines.append(f"density_mean: {self.density_mean:.4f}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
