"""
Step 2: per-AP load estimation.

Each AP computes the smallest (fractional) number of subchannels N_l that serves
its users' demands from average channel gains, either with equal power per
subchannel (closed form) or by minimising sum(n_k) subject to
``n_k B log2(1 + P_k H_k / (n_k sigma^2)) >= R_k`` and ``sum(P_k) <= P_tot``.

The joint problem is solved with damped Newton-Raphson on its KKT system. The
system is written in dimensionless variables so that a single tolerance applies
to every equation::

    p_k  = P_k / P_tot          a_k = P_tot H_k / sigma^2
    nu_k = mu_k * C             c_k = C / R_k,  C = B log2(e)
    s_k  = a_k p_k / n_k        phi(s) = ln(1 + s) - s / (1 + s)

    A_k : 1 - nu_k phi(s_k)                            = 0   (dL/dn_k)
    R_k : c_k n_k ln(1 + s_k) - 1                      = 0   (rate, tight)
    P   : sum(p_k) - 1                                 = 0   (full power)
    Q_k : ln(nu_k a_k / (1 + s_k)) - ln(nu_1 a_1 / (1 + s_1)) = 0, k >= 2

with X ordered as [p_1..p_M, n_1..n_M, nu_1..nu_M].
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.special import lambertw

from smallcell.core.errors import ConvergenceError, ParameterError, SingularMatrixError
from smallcell.core.models import Association, KktState, LoadEstimate
from smallcell.utils.config import LoadEstimationConfig, LoadSolver

logger = structlog.get_logger(__name__)

LOG2E = 1.0 / math.log(2.0)

# Fraction of the distance to the positivity boundary a step may cover.
BOUNDARY_FRACTION = 0.99


def user_load_equal_power(rate, gain, p_tot: float, n_prbs: int, sigma2: float, bandwidth: float):
    """
    Subchannels a user needs when every subchannel carries ``P_tot / N``.

    Returns ``R / (B log2(1 + P_tot H / (N sigma^2)))``; vectorised over rate and gain.
    """
    rate = np.asarray(rate, dtype=float)
    gain = np.asarray(gain, dtype=float)
    if (rate <= 0).any() or (gain <= 0).any() or min(p_tot, n_prbs, sigma2, bandwidth) <= 0:
        raise ParameterError("equal-power load needs positive rate, gain and radio parameters")
    snr = p_tot * gain / (n_prbs * sigma2)
    n = rate / (bandwidth * np.log2(1.0 + snr))
    return float(n) if np.ndim(n) == 0 else n


def user_load_at_power(rate, gain, power, sigma2: float, bandwidth: float):
    """
    Subchannels a user needs when it radiates ``power`` in total.

    Solves ``n B log2(1 + P H / (n sigma^2)) = R`` in closed form through the
    lower branch of the Lambert W function. The load is infinite when even
    unlimited bandwidth cannot carry ``R``, that is when ``R >= B log2(e) P H / sigma^2``.
    """
    rate = np.asarray(rate, dtype=float)
    a = np.asarray(power, dtype=float) * np.asarray(gain, dtype=float) / sigma2
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = rate * math.log(2.0) / (a * bandwidth)
        reachable = (rate > 0) & (a > 0) & (kappa < 1.0)
        k = np.where(reachable, kappa, 0.5)
        # ln(1 + t) = kappa t with t = a / n, i.e. u = 1 + t solves u e^(-kappa u) = e^(-kappa)
        u = -lambertw(-k * np.exp(-k), k=-1).real / k
        n = np.where(reachable, a / (u - 1.0), np.inf)
    n = np.where(rate <= 0, 0.0, n)
    return float(n) if np.ndim(n) == 0 else n


def estimate_load_equal_power(
    demands: Sequence[float],
    gains: Sequence[float],
    p_tot: float,
    n_prbs: int,
    sigma2: float,
    bandwidth: float,
) -> LoadEstimate:
    """
    Equal-power load of one AP: O(M) divisions.

    Power is booked proportionally to load, ``P_k = P_tot n_k / sum(n)``.
    """
    n = np.atleast_1d(user_load_equal_power(demands, gains, p_tot, n_prbs, sigma2, bandwidth))
    if n.size == 0:
        raise ParameterError("load estimation needs at least one user")
    power = p_tot * n / n.sum()
    return LoadEstimate(n=n, power=power, solver=LoadSolver.EQUAL_POWER.value)


def _phi(s: np.ndarray) -> np.ndarray:
    return np.log1p(s) - s / (1.0 + s)


def _split(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = len(x) // 3
    return x[:m], x[m : 2 * m], x[2 * m :]


def kkt_residual(x: np.ndarray, a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """
    Scaled KKT system G(X).

    Args:
        x: [p, n, nu] in scaled units
        a: P_tot H_k / sigma^2 per user
        c: B log2(e) / R_k per user

    Returns:
        Residual vector of length 3M
    """
    p, n, nu = _split(np.asarray(x, dtype=float))
    s = a * p / n
    stationarity = 1.0 - nu * _phi(s)
    rate = c * n * np.log1p(s) - 1.0
    power = np.array([p.sum() - 1.0])
    level = np.log(nu) + np.log(a) - np.log1p(s)
    ratio = level[1:] - level[0]
    return np.concatenate((stationarity, rate, power, ratio))


def kkt_jacobian(x: np.ndarray, a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Analytic Jacobian of :func:`kkt_residual`, shape (3M, 3M)."""
    p, n, nu = _split(np.asarray(x, dtype=float))
    m = len(p)
    s = a * p / n
    phi = _phi(s)
    dphi = s / (1.0 + s) ** 2
    ds_dp = a / n
    ds_dn = -s / n

    jac = np.zeros((3 * m, 3 * m))
    idx = np.arange(m)
    ip, in_, inu = idx, m + idx, 2 * m + idx

    # stationarity in n_k
    jac[idx, ip] = -nu * dphi * ds_dp
    jac[idx, in_] = -nu * dphi * ds_dn
    jac[idx, inu] = -phi

    # tight rate constraints
    rows = m + idx
    jac[rows, ip] = c * ds_dp * n / (1.0 + s)
    jac[rows, in_] = c * phi

    # full power
    jac[2 * m, ip] = 1.0

    # equal multiplier levels, user 0 as reference
    dlevel_dp = -ds_dp / (1.0 + s)
    dlevel_dn = -ds_dn / (1.0 + s)
    dlevel_dnu = 1.0 / nu
    for k in range(1, m):
        row = 2 * m + k
        jac[row, ip[k]] += dlevel_dp[k]
        jac[row, in_[k]] += dlevel_dn[k]
        jac[row, inu[k]] += dlevel_dnu[k]
        jac[row, ip[0]] -= dlevel_dp[0]
        jac[row, in_[0]] -= dlevel_dn[0]
        jac[row, inu[0]] -= dlevel_dnu[0]
    return jac


def gauss_jordan_solve(matrix: np.ndarray, rhs: np.ndarray, rtol: float = 1e-13) -> np.ndarray:
    """
    Solve ``matrix @ x = rhs`` by Gauss-Jordan elimination with partial pivoting.

    Raises:
        SingularMatrixError: if a pivot vanishes relative to the matrix scale
    """
    a = np.array(matrix, dtype=float)
    b = np.array(rhs, dtype=float)
    size = a.shape[0]
    if a.shape != (size, size) or b.shape != (size,):
        raise ParameterError(f"incompatible system shapes {a.shape} and {b.shape}")
    aug = np.column_stack((a, b))
    scale = max(float(np.abs(a).max()), 1.0)

    for col in range(size):
        pivot = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[pivot, col]) <= rtol * scale:
            raise SingularMatrixError(f"singular Jacobian at column {col}")
        if pivot != col:
            aug[[col, pivot]] = aug[[pivot, col]]
        aug[col] /= aug[col, col]
        factors = aug[:, col].copy()
        factors[col] = 0.0
        aug -= np.outer(factors, aug[col])
    return aug[:, -1]


def _warm_start(
    demands: np.ndarray, gains: np.ndarray, p_tot: float, n_prbs: int, sigma2: float, bandwidth: float
) -> np.ndarray:
    eq = estimate_load_equal_power(demands, gains, p_tot, n_prbs, sigma2, bandwidth)
    p = eq.power / p_tot
    n = eq.n
    s = (p_tot * gains / sigma2) * p / n
    nu = 1.0 / _phi(s)
    return np.concatenate((p, n, nu))


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    shrinking = dx < 0
    if not shrinking.any():
        return 1.0
    return min(1.0, BOUNDARY_FRACTION * float(np.min(-x[shrinking] / dx[shrinking])))


def estimate_load_newton(
    demands: Sequence[float],
    gains: Sequence[float],
    p_tot: float,
    sigma2: float,
    bandwidth: float,
    n_prbs: int,
    tol: float = 1e-8,
    max_iter: int = 100,
    max_halvings: int = 40,
) -> Tuple[LoadEstimate, KktState]:
    """
    Minimum-spectrum load of one AP by damped Newton-Raphson on the KKT system.

    The iteration starts from the equal-power point, keeps every variable
    positive, and halves the step until the residual max-norm decreases.

    Args:
        demands: R_k per member (bit/s)
        gains: Average channel gain H_k per member
        p_tot: AP power budget (W)
        sigma2: Noise power per subchannel (W)
        bandwidth: Subchannel bandwidth B (Hz)
        n_prbs: PRB budget N, used only for the warm start
        tol: Residual tolerance in max-norm
        max_iter: Newton iteration limit
        max_halvings: Backtracking limit per iteration

    Returns:
        Tuple of (LoadEstimate, KktState)

    Raises:
        ConvergenceError: on iteration limit, failed line search, or singular Jacobian;
            the exception carries the last state
    """
    demands = np.atleast_1d(np.asarray(demands, dtype=float))
    gains = np.atleast_1d(np.asarray(gains, dtype=float))
    if demands.size == 0 or demands.shape != gains.shape:
        raise ParameterError("load estimation needs matching, non-empty demands and gains")
    if tol <= 0:
        raise ParameterError(f"tolerance must be positive, got {tol}")

    a = p_tot * gains / sigma2
    big_c = bandwidth * LOG2E
    c = big_c / demands

    x = _warm_start(demands, gains, p_tot, n_prbs, sigma2, bandwidth)
    g = kkt_residual(x, a, c)
    res = float(np.max(np.abs(g)))

    def state(it: int, ok: bool) -> KktState:
        p, n, nu = _split(x)
        s = a * p / n
        mu0 = float(np.mean(nu * (gains / sigma2) / (1.0 + s)))
        return KktState(
            x=np.concatenate((p * p_tot, n, nu / big_c)),
            mu0=mu0,
            residual=res,
            iterations=it,
            converged=ok,
        )

    for it in range(max_iter + 1):
        if res <= tol:
            p, n, _ = _split(x)
            kkt = state(it, True)
            return LoadEstimate(n=n.copy(), power=p * p_tot, solver=LoadSolver.NEWTON.value), kkt
        if it == max_iter:
            break
        try:
            dx = gauss_jordan_solve(kkt_jacobian(x, a, c), -g)
        except SingularMatrixError as e:
            raise SingularMatrixError(str(e), state(it, False)) from e

        step = _max_step(x, dx)
        for _ in range(max_halvings + 1):
            candidate = x + step * dx
            g_new = kkt_residual(candidate, a, c)
            res_new = float(np.max(np.abs(g_new)))
            if np.isfinite(res_new) and res_new < res:
                break
            step *= 0.5
        else:
            raise ConvergenceError("line search could not reduce the KKT residual", state(it, False))
        x, g, res = candidate, g_new, res_new

    raise ConvergenceError(f"no convergence within {max_iter} iterations", state(max_iter, False))


def estimate_ap_loads(
    assoc: Association,
    avg_power: np.ndarray,
    demands: np.ndarray,
    p_tot: float,
    sigma2: float,
    bandwidth: float,
    n_prbs: int,
    cfg: Optional[LoadEstimationConfig] = None,
) -> List[LoadEstimate]:
    """
    Run the configured estimator at every AP; APs without users get an empty estimate.

    Newton failures fall back to the equal-power estimate.
    """
    cfg = cfg or LoadEstimationConfig()
    estimates: List[LoadEstimate] = []
    for ap, members in enumerate(assoc.members):
        if len(members) == 0:
            estimates.append(LoadEstimate(n=np.zeros(0), power=np.zeros(0)))
            continue
        gains = avg_power[ap, members]
        rates = demands[members]
        if cfg.solver == LoadSolver.NEWTON:
            try:
                estimate, _ = estimate_load_newton(
                    rates,
                    gains,
                    p_tot,
                    sigma2,
                    bandwidth,
                    n_prbs,
                    tol=cfg.tol,
                    max_iter=cfg.max_iter,
                    max_halvings=cfg.max_halvings,
                )
                estimates.append(estimate)
                continue
            except ConvergenceError as e:
                logger.warning(
                    "Newton load estimate failed, using equal power",
                    ap=ap,
                    members=len(members),
                    error=str(e),
                    residual=e.state.residual if e.state else None,
                )
        estimates.append(
            estimate_load_equal_power(rates, gains, p_tot, n_prbs, sigma2, bandwidth)
        )
    return estimates


def aggregate_ap_loads(assoc: Association, estimates: Sequence[LoadEstimate]) -> np.ndarray:
    """N_l = sum of member loads for every AP (zero for idle APs)."""
    if len(estimates) != len(assoc.members):
        raise ParameterError("one estimate per AP is required")
    return np.array([e.total for e in estimates], dtype=float)
