"""Inner numerical kernels.

fused_lasso_prox solves  min_z  0.5 ||v - z||^2 + gamma ||grad z||_1  by an
accelerated projected-gradient method on the dual (projection onto the
l-infinity ball of radius gamma), with warm starts across outer iterations.

weighted_laplacian_solve solves the SPD system
  (W + lam * grad^T diag(w_edge^2) grad) theta = W y
by conjugate gradients with diagonal preconditioning (dense direct solve for
small n).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, DimensionError, ParameterError
from .graph import KnnGraph

_DENSE_CUTOFF = 500  # below this, solve the Laplacian system densely


@dataclass
class ProxOptions:
    tol: float = 1e-8  # absolute KKT residual
    max_iter: int = 10000
    warm_start: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.tol <= 0:
            raise ParameterError(f"tol={self.tol} must be > 0")
        if self.max_iter < 1:
            raise ParameterError(f"max_iter={self.max_iter} must be >= 1")


def _kkt_residual(dz: np.ndarray, w: np.ndarray, gamma: float) -> float:
    """Max over edges of min(|dz_p|, |gamma*sign(dz_p) - w_p|).

    Zero exactly when w is a valid dual certificate for z: |w| <= gamma
    everywhere (enforced by projection) and w_p = gamma*sign(dz_p) wherever
    dz_p != 0.
    """
    if dz.size == 0:
        return 0.0
    viol = np.minimum(np.abs(dz), np.abs(gamma * np.sign(dz) - w))
    return float(viol.max())


def fused_lasso_prox(
    G: KnnGraph,
    v: np.ndarray,
    gamma: float,
    opts: ProxOptions | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Graph fused-lasso proximal operator; returns (z, dual) for warm starting.

    FISTA on the dual with gradient-based adaptive restart.  Raises
    ConvergenceError (carrying the final iterate) if the KKT residual is
    still above opts.tol after opts.max_iter iterations.
    """
    if opts is None:
        opts = ProxOptions()
    v = np.asarray(v, dtype=float)
    if v.shape != (G.n,):
        raise DimensionError(f"v has shape {v.shape}, expected ({G.n},)")
    if gamma < 0:
        raise ParameterError(f"gamma={gamma} must be >= 0")
    m = G.m
    if gamma == 0.0 or m == 0:
        return v.copy(), np.zeros(m)

    D = G.incidence()
    L = G.incidence_norm_sq() * 1.05
    step = 1.0 / L

    if opts.warm_start is not None:
        w = np.clip(np.asarray(opts.warm_start, dtype=float), -gamma, gamma)
        if w.shape != (m,):
            raise DimensionError(f"warm start has shape {w.shape}, expected ({m},)")
    else:
        w = np.zeros(m)
    w_prev = w.copy()
    acc = w.copy()
    t = 1.0

    Dv = D @ v
    z = v - D.T @ w
    kkt = _kkt_residual(D @ z, w, gamma)
    if kkt <= opts.tol:
        return z, w

    check_every = 8  # KKT evaluation costs as much as a gradient step
    for it in range(1, opts.max_iter + 1):
        grad = D @ (D.T @ acc) - Dv
        w = np.clip(acc - step * grad, -gamma, gamma)
        # restart momentum when it points against the descent direction
        if (acc - w) @ (w - w_prev) > 0:
            t = 1.0
            acc = w.copy()
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            acc = w + ((t - 1.0) / t_new) * (w - w_prev)
            t = t_new
        w_prev = w
        if it % check_every and it != opts.max_iter:
            continue
        z = v - D.T @ w
        kkt = _kkt_residual(D @ z, w, gamma)
        if kkt <= opts.tol:
            return z, w
        if kkt <= 10.0 * opts.tol:
            check_every = 1  # close: check every step to stop promptly
    z = v - D.T @ w
    kkt = _kkt_residual(D @ z, w, gamma)
    if kkt <= opts.tol:
        return z, w

    raise ConvergenceError(
        f"fused_lasso_prox: KKT residual {kkt:.3e} > tol {opts.tol:.3e} "
        f"after {opts.max_iter} iterations",
        residual=kkt,
        iterate=z,
        dual=w,
    )


def weighted_laplacian_solve(
    G: KnnGraph,
    w_node: np.ndarray,
    w_edge: np.ndarray,
    lam: float,
    y: np.ndarray,
    rtol: float = 1e-10,
) -> np.ndarray:
    """Solve (diag(w_node) + lam * grad^T diag(w_edge)^2 grad) theta = diag(w_node) y.

    Relative residual guaranteed <= rtol; CG falls back to a sparse direct
    solve if preconditioned CG stalls.
    """
    w_node = np.asarray(w_node, dtype=float)
    w_edge = np.asarray(w_edge, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = G.n, G.m
    if w_node.shape != (n,) or y.shape != (n,):
        raise DimensionError("node weight / rhs length mismatch")
    if w_edge.shape != (m,):
        raise DimensionError(f"edge weights have shape {w_edge.shape}, expected ({m},)")
    if np.any(w_node <= 0) or np.any(w_edge <= 0):
        raise ParameterError("weights must be strictly positive")
    if lam < 0:
        raise ParameterError(f"lam={lam} must be >= 0")
    if lam == 0.0 or m == 0:
        return y.copy()

    D = G.incidence()
    A = sp.diags(w_node) + lam * (D.T @ sp.diags(w_edge**2) @ D)
    A = A.tocsr()
    b = w_node * y
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)

    # residual in extended precision: near-interpolating weights make the
    # double-precision residual floor itself sit around 1e-10
    edges = G.edges
    w_node_ld = w_node.astype(np.longdouble)
    w_edge2_ld = (w_edge.astype(np.longdouble)) ** 2
    b_ld = w_node_ld * y.astype(np.longdouble)

    def residual_ld(t):
        t = t.astype(np.longdouble)
        d = t[edges[:, 0]] - t[edges[:, 1]]
        at = w_node_ld * t
        np.add.at(at, edges[:, 0], lam * w_edge2_ld * d)
        np.add.at(at, edges[:, 1], -lam * w_edge2_ld * d)
        return b_ld - at

    if n <= _DENSE_CUTOFF:
        dense = A.toarray()
        solve = lambda r: np.linalg.solve(dense, r)
        theta = solve(b)
    else:
        M = sp.diags(1.0 / A.diagonal())
        theta, info = spla.cg(A, b, rtol=rtol / 10, atol=0.0, M=M, maxiter=10 * n)
        lu = None
        if info != 0 or np.linalg.norm(residual_ld(theta).astype(float)) > rtol * bnorm:
            lu = spla.splu(A.tocsc())
            theta = lu.solve(b)
        solve = lu.solve if lu is not None else None
    if solve is not None:
        for _ in range(5):
            r = residual_ld(theta).astype(float)
            if np.linalg.norm(r) <= 0.5 * rtol * bnorm:
                break
            theta = theta + solve(r)
    res = float(np.linalg.norm(residual_ld(theta).astype(float))) / bnorm
    if res > rtol:
        raise ConvergenceError(
            f"weighted_laplacian_solve: relative residual {res:.3e} > {rtol:.3e}",
            residual=res,
            iterate=theta,
        )
    return theta
