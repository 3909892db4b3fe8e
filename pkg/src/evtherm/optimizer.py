"""Finite-horizon optimal control by direct single shooting.

The engine is deliberately dependency-free: piecewise-constant inputs over
the horizon, box and per-step rate constraints enforced by a sequential
clamping projection, soft state bounds as quadratic penalties, central
finite-difference gradients and a backtracking line search.  Warm starts
come from the caller (typically the previous solution shifted one step).

Transition and stage-cost handles may be vectorized: when
``OcpSpec.vectorized`` is set, states of shape (n_x, B) and inputs of shape
(n_u, B) are propagated in one call, which batches all finite-difference
rollouts and line-search candidates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InfeasibleError, NumericalBlowupError


@dataclass(frozen=True)
class SoftStateBounds:
    """Per-component soft bounds, penalized quadratically with weight rho."""

    lower: np.ndarray
    upper: np.ndarray
    rho: float = 1e3

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))

    def penalty(self, x):
        # x is (n_x,) or (n_x, B); bounds broadcast along the first axis
        if x.ndim == 2:
            below = np.maximum(self.lower[:, None] - x, 0.0)
            above = np.maximum(x - self.upper[:, None], 0.0)
        else:
            below = np.maximum(self.lower - x, 0.0)
            above = np.maximum(x - self.upper, 0.0)
        return self.rho * ((below * below).sum(axis=0) + (above * above).sum(axis=0))


@dataclass
class OcpSpec:
    """One receding-horizon problem: dynamics, cost, horizon and bounds.

    ``dynamics(x, u, k)`` maps the stage-k state to the next state;
    ``stage_cost(x_next, u, du, k)`` is evaluated on the post-transition
    state.  ``u_min``/``u_max`` are hard boxes, ``du_min``/``du_max`` hard
    per-step rate bounds (both enforced exactly by projection); state
    bounds are soft.
    """

    horizon_np: int
    dt: float
    n_u: int
    dynamics: Callable
    stage_cost: Callable
    u_min: np.ndarray
    u_max: np.ndarray
    du_min: np.ndarray
    du_max: np.ndarray
    state_bounds: SoftStateBounds | None = None
    vectorized: bool = False
    max_iter: int = 200
    grad_h: float = 1e-4             # relative to the component range
    tol_rel: float = 1e-14
    n_backtrack: int = 30

    def __post_init__(self):
        self.u_min = np.broadcast_to(np.asarray(self.u_min, float), (self.n_u,)).copy()
        self.u_max = np.broadcast_to(np.asarray(self.u_max, float), (self.n_u,)).copy()
        self.du_min = np.broadcast_to(np.asarray(self.du_min, float), (self.n_u,)).copy()
        self.du_max = np.broadcast_to(np.asarray(self.du_max, float), (self.n_u,)).copy()
        if self.horizon_np < 1:
            raise ValueError("horizon_np must be >= 1")
        if np.any(self.u_min > self.u_max):
            raise ValueError("u_min above u_max")
        if np.any(self.du_min > 0.0) or np.any(self.du_max < 0.0):
            raise ValueError("rate bounds must bracket zero")

    @property
    def u_range(self) -> np.ndarray:
        return self.u_max - self.u_min


@dataclass(frozen=True)
class SolveResult:
    u_seq: np.ndarray                # (Np, n_u), feasible
    cost: float
    iterations: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def project_rate_box(u_seq: np.ndarray, u_prev: np.ndarray, spec: OcpSpec) -> np.ndarray:
    """Clamp a sequence into the box and rate constraints, stage by stage.

    Each stage is clipped into [u_{k-1} + du_min, u_{k-1} + du_max]
    intersected with the box, using the already-clamped predecessor, so the
    output is always feasible and the map is idempotent.
    """
    u_seq = np.asarray(u_seq, dtype=float)
    batched = u_seq.ndim == 3         # (B, Np, n_u)
    seq = u_seq if batched else u_seq[None, :, :]
    out = np.empty_like(seq)
    prev = np.broadcast_to(np.asarray(u_prev, float), seq[:, 0, :].shape).copy()
    for k in range(spec.horizon_np):
        lo = np.maximum(spec.u_min, prev + spec.du_min)
        hi = np.minimum(spec.u_max, prev + spec.du_max)
        if np.any(lo > hi + 1e-15):
            raise InfeasibleError(
                f"stage {k}: rate window does not intersect the box")
        out[:, k, :] = np.clip(seq[:, k, :], lo, hi)
        prev = out[:, k, :]
    return out if batched else out[0]


def _rollout_costs(spec: OcpSpec, x0: np.ndarray, u_prev: np.ndarray,
                   u_seqs: np.ndarray) -> np.ndarray:
    """Total cost for a batch of input sequences, shape (B, Np, n_u) -> (B,)."""
    n_b = u_seqs.shape[0]
    if spec.vectorized:
        x = np.repeat(np.asarray(x0, float)[:, None], n_b, axis=1)
        cost = np.zeros(n_b)
        prev = np.broadcast_to(np.asarray(u_prev, float)[:, None], (spec.n_u, n_b))
        for k in range(spec.horizon_np):
            u_k = u_seqs[:, k, :].T
            du_k = u_k - prev
            x = spec.dynamics(x, u_k, k)
            cost = cost + spec.stage_cost(x, u_k, du_k, k)
            if spec.state_bounds is not None:
                cost = cost + spec.state_bounds.penalty(x)
            prev = u_k
        return cost
    costs = np.empty(n_b)
    for b in range(n_b):
        costs[b] = _rollout_single(spec, x0, u_prev, u_seqs[b])
    return costs


def _rollout_single(spec: OcpSpec, x0, u_prev, u_seq) -> float:
    x = np.asarray(x0, dtype=float)
    prev = np.asarray(u_prev, dtype=float)
    total = 0.0
    for k in range(spec.horizon_np):
        u_k = u_seq[k]
        x = spec.dynamics(x, u_k, k)
        total += float(np.squeeze(spec.stage_cost(x, u_k, u_k - prev, k)))
        if spec.state_bounds is not None:
            total += float(spec.state_bounds.penalty(x))
        prev = u_k
        if not np.isfinite(total):
            raise NumericalBlowupError(k)
    return total


def rollout_cost(spec: OcpSpec, x0, u_prev, u_seq) -> float:
    """Cost of one input sequence: stage costs plus soft-bound penalties."""
    u_seq = np.asarray(u_seq, dtype=float).reshape(spec.horizon_np, spec.n_u)
    if spec.vectorized:
        cost = float(_rollout_costs(spec, x0, u_prev, u_seq[None])[0])
        if not np.isfinite(cost):
            raise NumericalBlowupError(spec.horizon_np - 1)
        return cost
    return _rollout_single(spec, x0, u_prev, u_seq)


def finite_diff_grad(spec: OcpSpec, x0, u_prev, u_seq,
                     h: np.ndarray | float | None = None) -> np.ndarray:
    """Central-difference gradient of rollout_cost, shape (Np, n_u)."""
    u_seq = np.asarray(u_seq, dtype=float)
    if h is None:
        h = spec.grad_h * np.maximum(spec.u_range, 1e-9)
    h_vec = np.broadcast_to(np.asarray(h, float), (spec.n_u,))
    n_p, n_u = spec.horizon_np, spec.n_u
    n_dim = n_p * n_u
    pert = np.repeat(u_seq[None], 2 * n_dim, axis=0)
    h_flat = np.tile(h_vec, n_p)
    for idx in range(n_dim):
        k, i = divmod(idx, n_u)
        pert[2 * idx, k, i] += h_flat[idx]
        pert[2 * idx + 1, k, i] -= h_flat[idx]
    costs = _rollout_costs(spec, x0, u_prev, pert)
    grad = (costs[0::2] - costs[1::2]) / (2.0 * h_flat)
    return grad.reshape(n_p, n_u)


def solve(spec: OcpSpec, x0, u_prev, warm_start: np.ndarray | None = None) -> SolveResult:
    """Projected-gradient descent from the projected warm start.

    Every iterate is passed through :func:`project_rate_box`, so the result
    is feasible by construction and its cost never exceeds the projected
    warm start's cost.  Exhausting the iteration budget returns the best
    iterate with ``converged=False``.
    """
    u_prev = np.asarray(u_prev, dtype=float).reshape(spec.n_u)
    if warm_start is None:
        warm_start = np.repeat(u_prev[None], spec.horizon_np, axis=0)
    u = project_rate_box(np.asarray(warm_start, float).reshape(
        spec.horizon_np, spec.n_u), u_prev, spec)
    cost = rollout_cost(spec, x0, u_prev, u)
    if not np.isfinite(cost):
        raise NumericalBlowupError(0)

    scale = float(np.max(spec.u_range))
    iterations = 0
    converged = False
    for iterations in range(1, spec.max_iter + 1):
        grad = finite_diff_grad(spec, x0, u_prev, u)
        g_norm = float(np.max(np.abs(grad)))
        if g_norm == 0.0:
            converged = True
            break
        # Candidate ladder: full-range step down to ~1e-8 of the range.
        alphas = scale / g_norm * 0.5 ** np.arange(spec.n_backtrack)
        cands = project_rate_box(u[None] - alphas[:, None, None] * grad[None],
                                 u_prev, spec)
        costs = _rollout_costs(spec, x0, u_prev, cands)
        costs = np.where(np.isfinite(costs), costs, np.inf)
        if not np.any(costs < cost):
            converged = True
            break
        pick = int(np.argmin(costs))  # best step on the backtracking ladder
        new_cost = float(costs[pick])
        if cost - new_cost <= spec.tol_rel * (1.0 + abs(cost)):
            u, cost = cands[pick], new_cost
            converged = True
            break
        u, cost = cands[pick], new_cost

    return SolveResult(u_seq=u, cost=float(cost), iterations=iterations,
                       converged=converged)


def shift_warm_start(u_seq: np.ndarray) -> np.ndarray:
    """Receding-horizon warm start: drop the applied input, repeat the last."""
    return np.vstack([u_seq[1:], u_seq[-1:]])
