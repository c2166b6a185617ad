"""Log-barrier interior point solver for small max-min concave quadratic programs.

    maximize    s
    over        (delta, s)
    subject to  phi_n(delta) >= s                      for every n
                ||L_j delta + b_j||^2 <= r_j^2          for every j

with phi_n(delta) = a_n + <c_n, delta> - sum_m q[n, m] (dx[m]^2 + dy[m]^2),
delta = (dx[1..M], dy[1..M]) and q >= 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InfeasibleScenarioError, InputError, SolverError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class BarrierOptions:
    t0: float = 1.0
    mu: float = 10.0
    armijo_alpha: float = 0.3
    armijo_beta: float = 0.8
    newton_tol: float = 1e-9
    max_newton: int = 100
    max_stages: int = 40


@dataclass(frozen=True)
class MaximinProblem:
    const: np.ndarray = field(repr=False)        # a_n, shape (N,)
    linear: np.ndarray = field(repr=False)       # c_n, shape (N, 2M)
    curvature: np.ndarray = field(repr=False)    # q[n, m], shape (N, M)
    ball_maps: np.ndarray = field(repr=False)    # L_j, shape (J, k, 2M)
    ball_offsets: np.ndarray = field(repr=False) # b_j, shape (J, k)
    ball_radii: np.ndarray = field(repr=False)   # r_j, shape (J,)

    def __post_init__(self):
        for name in ("const", "linear", "curvature", "ball_maps", "ball_offsets", "ball_radii"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        N = self.const.shape[0]
        dim = self.linear.shape[1] if self.linear.ndim == 2 else -1
        if self.const.ndim != 1 or N < 1:
            raise InputError("MaximinProblem", "need at least one rate constraint")
        if self.linear.shape != (N, dim) or dim < 2 or dim % 2:
            raise InputError("MaximinProblem", f"linear terms must be N x 2M, got {self.linear.shape}")
        if self.curvature.shape != (N, dim // 2):
            raise InputError("MaximinProblem", f"curvature must be N x M = {(N, dim // 2)}, got {self.curvature.shape}")
        J = self.ball_radii.shape[0]
        if self.ball_maps.ndim != 3 or self.ball_maps.shape[0] != J or self.ball_maps.shape[2] != dim:
            raise InputError("MaximinProblem", f"ball maps must be J x k x {dim}, got {self.ball_maps.shape}")
        if self.ball_offsets.shape != self.ball_maps.shape[:2]:
            raise InputError("MaximinProblem", "ball offsets must match the ball maps")
        if not all(np.all(np.isfinite(getattr(self, n))) for n in ("const", "linear", "curvature", "ball_maps", "ball_offsets", "ball_radii")):
            raise InputError("MaximinProblem", "coefficients must be finite")
        if np.any(self.curvature < 0):
            raise InputError("MaximinProblem", "negative curvature makes a rate constraint non-concave")
        if np.any(self.ball_radii <= 0):
            raise InputError("MaximinProblem", "ball radii must be positive")

    @property
    def dim(self) -> int:
        return self.linear.shape[1]

    @property
    def num_rates(self) -> int:
        return self.const.shape[0]

    @property
    def num_balls(self) -> int:
        return self.ball_radii.shape[0]

    @property
    def diag_weights(self) -> np.ndarray:
        """q spread over both coordinates, shape (N, 2M)."""
        return np.hstack([self.curvature, self.curvature])

    def rates(self, delta) -> np.ndarray:
        delta = np.asarray(delta, dtype=float)
        return self.const + self.linear @ delta - self.diag_weights @ (delta * delta)

    def ball_residuals(self, delta) -> np.ndarray:
        return np.einsum("jkd,d->jk", self.ball_maps, np.asarray(delta, dtype=float)) + self.ball_offsets

    def ball_slack(self, delta) -> np.ndarray:
        """r_j^2 - ||L_j delta + b_j||^2; nonnegative when feasible."""
        e = self.ball_residuals(delta)
        return self.ball_radii ** 2 - np.einsum("jk,jk->j", e, e)

    def scaled(self, kappa: float) -> "MaximinProblem":
        return MaximinProblem(self.const * kappa, self.linear * kappa, self.curvature * kappa,
                              self.ball_maps, self.ball_offsets, self.ball_radii)


@dataclass(frozen=True)
class MaximinSolution:
    delta: np.ndarray = field(repr=False)
    s_value: float
    # Duality gap m/t of the last centering step.
    kkt_residual: float
    iterations: int
    # s at the end of each centering stage.
    central_path: tuple[float, ...] = ()


class _Barrier:
    """Barrier function -t s - sum log(phi_n - s) - sum log(slack_j) and its derivatives."""

    def __init__(self, prob: MaximinProblem):
        self.prob = prob
        self.dim = prob.dim
        self.weights = prob.diag_weights
        self.ltl = np.einsum("jkd,jke->jde", prob.ball_maps, prob.ball_maps)

    def margins(self, z):
        delta, s = z[:-1], z[-1]
        return self.prob.rates(delta) - s, self.prob.ball_slack(delta)

    def value(self, z, t) -> float:
        u, v = self.margins(z)
        if np.any(u <= 0) or np.any(v <= 0):
            return np.inf
        return -t * z[-1] - np.log(u).sum() - np.log(v).sum()

    def derivatives(self, z, t):
        prob, dim = self.prob, self.dim
        delta = z[:-1]
        u, v = self.margins(z)

        grad_u = np.hstack([prob.linear - 2 * self.weights * delta, -np.ones((prob.num_rates, 1))])
        grad_v = -2 * np.einsum("jkd,jk->jd", prob.ball_maps, prob.ball_residuals(delta))

        gu = grad_u / u[:, np.newaxis]
        gv = grad_v / v[:, np.newaxis]

        grad = -gu.sum(axis=0)
        grad[-1] -= t
        grad[:dim] -= gv.sum(axis=0)

        hess = gu.T @ gu
        hess[:dim, :dim] += np.diag(2 * (self.weights / u[:, np.newaxis]).sum(axis=0))
        hess[:dim, :dim] += gv.T @ gv + 2 * np.tensordot(1 / v, self.ltl, axes=1)
        return grad, hess


def _newton_direction(grad, hess):
    try:
        factor = scipy.linalg.cho_factor(hess)
    except scipy.linalg.LinAlgError:
        # Near-singular when every curvature term vanishes.
        shift = 1e-12 * np.trace(hess)
        for _ in range(6):
            try:
                factor = scipy.linalg.cho_factor(hess + shift * np.eye(hess.shape[0]))
                break
            except scipy.linalg.LinAlgError:
                shift *= 100
        else:
            raise SolverError("solve_maximin", "Newton system is not positive definite")
    return scipy.linalg.cho_solve(factor, -grad)


def _center(barrier: _Barrier, z, t, opts: BarrierOptions):
    steps = 0
    for steps in range(1, opts.max_newton + 1):
        grad, hess = barrier.derivatives(z, t)
        dz = _newton_direction(grad, hess)
        slope = float(grad @ dz)
        if not np.isfinite(slope):
            raise SolverError("solve_maximin", "non-finite Newton step")
        if -slope / 2 <= opts.newton_tol:
            break

        f0 = barrier.value(z, t)
        step = 1.0
        while barrier.value(z + step * dz, t) > f0 + opts.armijo_alpha * step * slope:
            step *= opts.armijo_beta
            if step < 1e-16:
                logger.debug("line search stalled at t=%.3g", t)
                return z, steps
        z = z + step * dz
    else:
        logger.debug("centering hit %d Newton steps at t=%.3g", opts.max_newton, t)
    return z, steps


def solve_maximin(prob: MaximinProblem, tol: float = DEFAULT_TOL, opts: BarrierOptions | None = None) -> MaximinSolution:
    """
    Maximize min_n phi_n over the motion balls, starting from delta = 0.

    Returns s_value = min_n phi_n(delta*), which is within `tol` of the
    optimum since the barrier gap m/t is driven below `tol`.
    """
    if not (tol > 0):
        raise InputError("solve_maximin", f"tolerance must be positive, got {tol!r}")
    opts = opts or BarrierOptions()

    z = np.zeros(prob.dim + 1)
    slack0 = prob.ball_slack(z[:-1])
    if np.any(slack0 <= 0):
        j = int(np.argmin(slack0))
        raise InfeasibleScenarioError("zero increments are not strictly inside every motion ball", slot=j + 1)
    z[-1] = prob.rates(z[:-1]).min() - 1.0

    barrier = _Barrier(prob)
    m = prob.num_rates + prob.num_balls
    t = opts.t0
    iterations = 0
    path = []
    for _ in range(opts.max_stages):
        z, steps = _center(barrier, z, t, opts)
        iterations += steps
        if not np.all(np.isfinite(z)):
            raise SolverError("solve_maximin", "non-finite iterate")
        path.append(float(z[-1]))
        logger.debug("barrier stage t=%.3g s=%.12g newton=%d", t, z[-1], steps)
        if m / t <= tol:
            break
        t *= opts.mu
    else:
        logger.warning("barrier stopped after %d stages with gap %.3g", opts.max_stages, m / t)

    delta = z[:-1]
    return MaximinSolution(
        delta=delta,
        s_value=float(prob.rates(delta).min()),
        kkt_residual=m / t,
        iterations=iterations,
        central_path=tuple(path),
    )
