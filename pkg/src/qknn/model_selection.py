"""Penalty-parameter selection: degrees of freedom, BIC, SIC, K-fold CV.

The degrees of freedom of a fit is the number of fused constant pieces:
connected components of the graph after dropping every edge whose fitted
difference exceeds a small threshold kappa.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .graph import Dataset, KnnGraph, build_knn_graph, connected_components, incidence_apply, predict
from .objective import check_quantile_level, pinball_sum
from .solvers import FitConfig, fit_admm, fit_l2_baseline, fit_mm

CRITERIA = ("bic", "sic", "cv")
SOLVERS = ("admm", "mm", "l2")

DEFAULT_KAPPA = 1e-2
DEFAULT_FOLDS = 5


@dataclass
class SelectionReport:
    grid: np.ndarray
    criterion_values: np.ndarray
    dof_values: np.ndarray
    converged: np.ndarray
    chosen_lam: float
    criterion_id: str
    fits: list | None = None  # FitResult per lambda, in grid order

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lambda", "criterion", "dof", "converged"])
            for lam, crit, dof_, conv in zip(
                self.grid, self.criterion_values, self.dof_values, self.converged
            ):
                writer.writerow([f"{lam:.6g}", f"{crit:.6g}", int(dof_), int(conv)])


def dof(G: KnnGraph, theta: np.ndarray, kappa: float = DEFAULT_KAPPA) -> int:
    """Connected components after deactivating edges with |difference| > kappa."""
    if kappa <= 0:
        raise ParameterError(f"kappa={kappa} must be > 0")
    diffs = incidence_apply(G, theta)
    count, _ = connected_components(G, np.abs(diffs) <= kappa)
    return count


def bic(y: np.ndarray, theta: np.ndarray, tau: float, nu: int) -> float:
    """(2/sigma) * pinball loss + nu * log n, with sigma = (1 - |1-2 tau|)/2."""
    check_quantile_level(tau)
    if nu < 1:
        raise ParameterError(f"nu={nu} must be >= 1")
    y = np.asarray(y, dtype=float)
    sigma = (1.0 - abs(1.0 - 2.0 * tau)) / 2.0
    loss = pinball_sum(y - np.asarray(theta, dtype=float), tau)
    return (2.0 / sigma) * loss + nu * math.log(y.size)


def sic(y: np.ndarray, theta: np.ndarray, tau: float, nu: int) -> float:
    """log(mean pinball loss) + nu * log(n) / (2n); -inf on a zero-loss fit."""
    check_quantile_level(tau)
    if nu < 1:
        raise ParameterError(f"nu={nu} must be >= 1")
    y = np.asarray(y, dtype=float)
    n = y.size
    mean_loss = pinball_sum(y - np.asarray(theta, dtype=float), tau) / n
    if mean_loss <= 0.0:
        warnings.warn("sic: zero pinball loss, criterion is ill-conditioned")
        return -math.inf
    return math.log(mean_loss) + nu * math.log(n) / (2.0 * n)


def _fit(data, G, solver_id, cfg, init=None):
    if solver_id == "admm":
        return fit_admm(data, G, cfg, init=init)
    if solver_id == "mm":
        return fit_mm(data, G, cfg)
    if solver_id == "l2":
        return fit_l2_baseline(data, G, cfg.lam, tol=cfg.tol, max_iter=cfg.max_iter)
    raise ParameterError(f"unknown solver {solver_id!r}")


def _cv_losses(data, tau, grid, solver_id, base_cfg, k, folds, seed):
    """Mean held-out pinball loss per lambda over seeded K-fold splits."""
    n = data.n
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    fold_ids = np.empty(n, dtype=int)
    for f, chunk in enumerate(np.array_split(perm, folds)):
        fold_ids[chunk] = f
    losses = np.zeros(len(grid))
    for f in range(folds):
        test = fold_ids == f
        train = ~test
        train_data = Dataset(data.X[train], data.y[train])
        k_eff = min(k, train_data.n - 1)
        G_train = build_knn_graph(train_data.X, k_eff)
        init = None
        for gi, lam in enumerate(grid):
            cfg = _with_lam(base_cfg, tau, lam)
            res = _fit(train_data, G_train, solver_id, cfg, init=init)
            if solver_id in ("admm", "l2"):
                init = (res.theta, res.theta, np.zeros(train_data.n), res.dual)
            pred = predict(train_data.X, res.theta, data.X[test], min(k, train_data.n))
            losses[gi] += pinball_sum(data.y[test] - pred, tau) / test.sum()
    return losses / folds


def _with_lam(base_cfg, tau, lam):
    return FitConfig(
        tau=tau,
        lam=float(lam),
        r=base_cfg.r,
        tol=base_cfg.tol,
        max_iter=base_cfg.max_iter,
        eps_mm=base_cfg.eps_mm,
        seed=base_cfg.seed,
        prox_tol=base_cfg.prox_tol,
        prox_max_iter=base_cfg.prox_max_iter,
    )


def select_lambda(
    data: Dataset,
    G: KnnGraph,
    tau: float,
    grid,
    criterion_id: str = "bic",
    solver_id: str = "admm",
    kappa: float = DEFAULT_KAPPA,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    base_cfg: FitConfig | None = None,
) -> SelectionReport:
    """Fit along an ascending lambda grid and pick the criterion minimizer.

    Fits warm-start from the previous grid point; non-converged fits are
    flagged and excluded from the argmin.  Ties go to the smaller lambda.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ParameterError("lambda grid is empty")
    if np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise ParameterError("grid must be nonnegative and sorted ascending")
    if criterion_id not in CRITERIA:
        raise ParameterError(f"unknown criterion {criterion_id!r}")
    if solver_id not in SOLVERS:
        raise ParameterError(f"unknown solver {solver_id!r}")
    if base_cfg is None:
        base_cfg = FitConfig(tau=tau)

    fits = []
    dofs = np.zeros(grid.size, dtype=int)
    conv = np.zeros(grid.size, dtype=bool)
    crit = np.full(grid.size, np.inf)
    init = None
    for gi, lam in enumerate(grid):
        cfg = _with_lam(base_cfg, tau, lam)
        res = _fit(data, G, solver_id, cfg, init=init)
        if solver_id in ("admm", "l2"):
            init = (res.theta, res.theta, np.zeros(data.n), res.dual)
        fits.append(res)
        dofs[gi] = dof(G, res.theta, kappa)
        conv[gi] = res.converged
        if criterion_id == "bic":
            crit[gi] = bic(data.y, res.theta, tau, dofs[gi])
        elif criterion_id == "sic":
            crit[gi] = sic(data.y, res.theta, tau, dofs[gi])
    if criterion_id == "cv":
        crit = _cv_losses(data, tau, grid, solver_id, base_cfg, G.k, folds, seed)

    usable = np.nonzero(conv)[0]
    if usable.size == 0:
        usable = np.arange(grid.size)  # nothing converged: fall back to all
    # argmin over usable entries, ties to smaller lambda
    best = usable[np.argmin(crit[usable])]
    return SelectionReport(
        grid=grid,
        criterion_values=crit,
        dof_values=dofs,
        converged=conv,
        chosen_lam=float(grid[best]),
        criterion_id=criterion_id,
        fits=fits,
    )
