"""Generative scenarios for benchmarking, with true conditional quantiles.

Four scenarios over the unit cube: a linear-boundary step function, a small
disc indicator under nonuniform sampling, a smooth quadratic, and a
higher-dimensional two-center step with heteroscedastic noise.  Errors come
from Gaussian, Cauchy, or Student-t distributions; theta* is computed from
the analytic error quantile so that P(y_i <= theta*_i) = tau exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ParameterError
from .objective import check_quantile_level

SCENARIOS = (1, 2, 3, 4)

# region weights for scenario 2: outer box, core, ring (they sum to one)
_S2_WEIGHTS = (0.2, 0.64, 0.16)


@dataclass
class ScenarioSample:
    X: np.ndarray
    y: np.ndarray
    theta_star: np.ndarray
    scenario_id: int
    error_id: str
    tau: float
    seed: int


def _rng(seed: int) -> np.random.Generator:
    # counter-based generator: identical streams on every platform
    return np.random.Generator(np.random.Philox(seed))


def scenario_dim(scenario_id: int) -> int:
    if scenario_id in (1, 2, 3):
        return 2
    if scenario_id == 4:
        return 5
    raise ParameterError(f"unknown scenario {scenario_id}")


def f0_eval(scenario_id: int, x: np.ndarray) -> np.ndarray:
    """True signal value(s); accepts a single point or an (n, d) array."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = scenario_dim(scenario_id)
    if x.shape[1] != d:
        raise ParameterError(
            f"scenario {scenario_id} expects d={d}, got {x.shape[1]}"
        )
    if scenario_id == 1:
        out = (1.25 * x[:, 0] + 0.75 * x[:, 1] > 1.0).astype(float)
    elif scenario_id == 2:
        out = (np.sum((x - 0.5) ** 2, axis=1) <= 2e-3).astype(float)
    elif scenario_id == 3:
        out = 0.4 * x[:, 0] ** 2 + 0.6 * x[:, 1] ** 2
    else:
        near = np.linalg.norm(x - 0.25, axis=1) < np.linalg.norm(x - 0.75, axis=1)
        out = np.where(near, 1.0, -1.0)
    return out if out.size > 1 else float(out[0])


def _sample_scenario2(n: int, rng: np.random.Generator) -> np.ndarray:
    """Mixture of uniforms on three nested regions of the unit square."""
    region = rng.choice(3, size=n, p=_S2_WEIGHTS)
    X = np.empty((n, 2))
    for i, r in enumerate(region):
        if r == 1:  # core [0.45, 0.55]^2
            X[i] = 0.45 + 0.1 * rng.uniform(0.0, 1.0, size=2)
            continue
        while True:
            if r == 0:  # unit square minus [0.4, 0.6]^2
                pt = rng.uniform(0.0, 1.0, size=2)
                if not np.all((0.4 <= pt) & (pt <= 0.6)):
                    break
            else:  # ring: [0.4, 0.6]^2 minus the core
                pt = 0.4 + 0.2 * rng.uniform(0.0, 1.0, size=2)
                if not np.all((0.45 <= pt) & (pt <= 0.55)):
                    break
        X[i] = pt
    return X


def sample_covariates(scenario_id: int, n: int, seed: int) -> np.ndarray:
    """i.i.d. draws from the scenario's covariate density."""
    if n < 1:
        raise ParameterError(f"n={n} must be >= 1")
    d = scenario_dim(scenario_id)
    rng = _rng(seed)
    if scenario_id == 2:
        return _sample_scenario2(n, rng)
    return rng.uniform(0.0, 1.0, size=(n, d))


def _parse_error_id(error_id: str):
    if error_id == "gaussian":
        return "gaussian", None
    if error_id == "cauchy":
        return "cauchy", None
    m = re.fullmatch(r"t(\d+)", error_id)
    if m:
        df = int(m.group(1))
        if df < 1:
            raise ParameterError(f"t degrees of freedom must be >= 1, got {df}")
        return "t", df
    raise ParameterError(f"unknown error distribution {error_id!r}")


def sample_errors(error_id: str, n: int, seed: int) -> np.ndarray:
    """i.i.d. unit-scale draws from the named error distribution."""
    if n < 1:
        raise ParameterError(f"n={n} must be >= 1")
    family, df = _parse_error_id(error_id)
    rng = _rng(seed)
    if family == "gaussian":
        return rng.standard_normal(n)
    if family == "cauchy":
        return np.tan(np.pi * (rng.uniform(0.0, 1.0, size=n) - 0.5))
    return rng.standard_t(df, size=n)


def error_quantile(error_id: str, tau: float) -> float:
    """Analytic tau-quantile of the error distribution."""
    check_quantile_level(tau)
    family, df = _parse_error_id(error_id)
    if tau == 0.5:
        return 0.0  # all three families are symmetric about zero
    if family == "gaussian":
        return float(stats.norm.ppf(tau))
    if family == "cauchy":
        return float(np.tan(np.pi * (tau - 0.5)))
    return float(stats.t.ppf(tau, df))


def gen_scenario(
    scenario_id: int, n: int, tau: float, error_id: str, seed: int
) -> ScenarioSample:
    """Draw (X, y, theta*) with y_i = f0(x_i) + scale_i * eps_i.

    scale_i is 1 except in scenario 4, where it is x_i' beta with
    beta = (1/d, ..., 1/d) (heteroscedastic noise).
    """
    check_quantile_level(tau)
    X = sample_covariates(scenario_id, n, seed)
    eps = sample_errors(error_id, n, seed + 1)
    f0 = np.atleast_1d(f0_eval(scenario_id, X))
    if scenario_id == 4:
        scale = X.mean(axis=1)  # x' beta with beta_i = 1/d
    else:
        scale = np.ones(n)
    y = f0 + scale * eps
    theta_star = f0 + scale * error_quantile(error_id, tau)
    return ScenarioSample(
        X=X,
        y=y,
        theta_star=theta_star,
        scenario_id=scenario_id,
        error_id=error_id,
        tau=tau,
        seed=seed,
    )


def save_sample_csv(sample: ScenarioSample, path) -> None:
    """CSV with columns x1..xd, y, theta_star and a metadata comment line."""
    d = sample.X.shape[1]
    header = ",".join([f"x{i + 1}" for i in range(d)] + ["y", "theta_star"])
    meta = (
        f"# scenario={sample.scenario_id} tau={sample.tau:g} "
        f"error={sample.error_id} seed={sample.seed} "
        f"s2_weights={':'.join(str(w) for w in _S2_WEIGHTS)}"
    )
    body = np.column_stack([sample.X, sample.y, sample.theta_star])
    with open(path, "w") as fh:
        fh.write(meta + "\n")
        fh.write(header + "\n")
        np.savetxt(fh, body, delimiter=",", fmt="%.17g")
