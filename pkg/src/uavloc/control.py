"""UAV motion decisions.

Model-based side: a projected steepest-gradient navigator that shrinks the
one-step-ahead uncertainty on the target estimate subject to anti-collision,
target-standoff, and speed constraints, plus an orbit fallback for agents
short on measurement sources.

Model-free side: tabular Q-learning over grid cells with an epsilon-decay
policy and an edge-side fusion rule for experiences from several agents.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import MobilityLimits, UavPose, Vec2
from .inference import GaussianBelief, MotionModel, OpCounters, ekf_predict

log = logging.getLogger(__name__)


@dataclass
class NavConstraints:
    limits: MobilityLimits
    d_min_uav: float = 10.0
    d_safe_target: float = 5.0
    # Distance scale over which a range measurement loses information value;
    # math.inf makes the information range-independent.
    range_scale: float = 50.0

    def __post_init__(self):
        if self.d_min_uav <= 0:
            raise ValueError("d_min_uav must be positive")
        if self.d_safe_target < 0:
            raise ValueError("d_safe_target cannot be negative")


def _info_weight(r: float, noise_var: float, range_scale: float) -> tuple[float, float]:
    """Information weight of a range measurement at distance r, and its
    derivative in r. Information decays as the range grows."""
    if math.isinf(range_scale):
        return 1.0 / noise_var, 0.0
    q = 1.0 + (r / range_scale) ** 2
    w = 1.0 / (noise_var * q)
    dw = -w * (2.0 * r / range_scale ** 2) / q
    return w, dw


def _posterior(uav_positions, belief: GaussianBelief, noise_var: float,
               model: MotionModel, range_scale: float):
    """One-step-ahead posterior covariance after fusing the range information
    each UAV position would contribute. Returns (P_post, predicted, per-UAV
    (r, e, w, dw) terms; coincident UAVs get None)."""
    pred = ekf_predict(belief, model)
    target = pred.mean[:2]
    info = np.zeros((4, 4))
    terms = []
    for pos in uav_positions:
        offset = np.asarray(pos, dtype=float) - target
        r = float(np.linalg.norm(offset))
        if r == 0.0:
            log.debug("UAV coincident with the predicted target mean; no information term")
            terms.append(None)
            continue
        e = offset / r
        w, dw = _info_weight(r, noise_var, range_scale)
        info[:2, :2] += w * np.outer(e, e)
        terms.append((r, e, w, dw))
    post = np.linalg.inv(np.linalg.inv(pred.cov) + info)
    return post, pred, terms


def nav_cost(uav_positions, belief: GaussianBelief, noise_var: float,
             model: MotionModel, range_scale: float = 200.0) -> float:
    """Trace of the one-step-ahead posterior covariance (lower is better)."""
    if len(uav_positions) == 0:
        return float(np.trace(ekf_predict(belief, model).cov))
    post, _, _ = _posterior(uav_positions, belief, noise_var, model, range_scale)
    return float(np.trace(post))


def nav_gradient(uav_positions, belief: GaussianBelief, noise_var: float,
                 model: MotionModel, range_scale: float = 200.0) -> np.ndarray:
    """Analytic gradient of nav_cost w.r.t. each UAV position, shape (n, 2).

    With C = tr((M + J)^-1) and J the fused range information,
    dC/du = -tr(P^2 dJ/du); the per-UAV term splits into a radial part from
    the information decay and a tangential part from the bearing rotation.
    """
    post, _, terms = _posterior(uav_positions, belief, noise_var, model, range_scale)
    sq = post @ post
    g_pos = sq[:2, :2]
    grads = np.zeros((len(uav_positions), 2))
    for i, term in enumerate(terms):
        if term is None:
            continue
        r, e, w, dw = term
        radial = dw * float(e @ g_pos @ e) * e
        tangential = (2.0 * w / r) * ((np.eye(2) - np.outer(e, e)) @ g_pos @ e)
        grads[i] = -(radial + tangential)
    return grads


def _prune_rows(a: np.ndarray, tol: float = 1e-10):
    """Indices of a maximal linearly independent row subset (greedy)."""
    kept = []
    basis = []
    for k, row in enumerate(a):
        residual = row.astype(float).copy()
        for b in basis:
            residual -= (residual @ b) * b
        norm = np.linalg.norm(residual)
        if norm > tol * max(1.0, np.linalg.norm(row)):
            basis.append(residual / norm)
            kept.append(k)
    return kept


def project_step(raw_step: np.ndarray, a_rows: np.ndarray,
                 residual_fn=None, tol: float = 1e-6, max_corrections: int = 25,
                 counters: OpCounters | None = None) -> np.ndarray:
    """Project a step onto the tangent space of the active constraints and
    correct for their nonlinearity.

    a_rows holds the linearized constraint normals (one row per active
    constraint; dependent rows are pruned). residual_fn(step) must return
    the nonlinear constraint values in a_rows order (feasible >= 0);
    violated ones are restored by moving along the constraint normals until
    within tol. A singular normal system falls back to a zero step (hold
    position).
    """
    raw_step = np.asarray(raw_step, dtype=float)
    a_full = np.atleast_2d(np.asarray(a_rows, dtype=float)) if len(a_rows) else None
    kept = _prune_rows(a_full) if a_full is not None and a_full.size else []
    if not kept:
        return raw_step.copy()

    a = a_full[kept]
    k = raw_step.shape[0]
    gram = a @ a.T
    if counters is not None:
        c = a.shape[0]
        counters.matmul("project_step", c, k, c)
        counters.inverse("project_step", c)
        counters.matmul("project_step", k, c, c)
        counters.matmul("project_step", k, c, k)
        counters.matmul("project_step", k, k, 1)
    try:
        gram_inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError:
        log.warning("singular constraint system after pruning; holding position")
        return np.zeros_like(raw_step)
    pinv = a.T @ gram_inv
    projected = raw_step - pinv @ (a @ raw_step)

    if residual_fn is None:
        return projected

    for _ in range(max_corrections):
        residuals = np.asarray(residual_fn(projected), dtype=float)[kept]
        violation = np.maximum(-residuals, 0.0)
        if np.all(violation <= tol):
            break
        projected = projected + pinv @ violation
    return projected


def _pairwise_rows(positions: np.ndarray, step: np.ndarray, pairs, d_min: float):
    """Linearized inter-UAV distance constraints at the stepped positions."""
    n = positions.shape[0]
    rows, residuals = [], []
    moved = positions + step.reshape(n, 2)
    for i, j in pairs:
        diff = moved[i] - moved[j]
        dist = float(np.linalg.norm(diff))
        u = diff / dist if dist > 0 else np.array([1.0, 0.0])
        row = np.zeros(2 * n)
        row[2 * i:2 * i + 2] = u
        row[2 * j:2 * j + 2] = -u
        rows.append(row)
        residuals.append(dist - d_min)
    return rows, residuals


def _standoff_rows(positions: np.ndarray, step: np.ndarray, targets, idx, d_safe: float):
    """Linearized target-standoff constraints at the stepped positions."""
    n = positions.shape[0]
    rows, residuals = [], []
    moved = positions + step.reshape(n, 2)
    for i in idx:
        diff = moved[i] - targets[i]
        dist = float(np.linalg.norm(diff))
        u = diff / dist if dist > 0 else np.array([1.0, 0.0])
        row = np.zeros(2 * n)
        row[2 * i:2 * i + 2] = u
        rows.append(row)
        residuals.append(dist - d_safe)
    return rows, residuals


def navigate(beliefs: dict[int, GaussianBelief], swarm: list[UavPose],
             constraints: NavConstraints, model: MotionModel, noise_var: float,
             counters: OpCounters | None = None) -> dict[int, Vec2]:
    """Projected steepest-gradient waypoints for the whole swarm.

    Pipeline: analytic gradient of the uncertainty cost, a max-speed step
    along its descent direction, activation of violated distance/standoff
    constraints, null-space projection, nonlinearity correction, and a final
    speed clamp. Returns a waypoint per UAV id; a waypoint equal to the
    current position means hold.
    """
    n = len(swarm)
    ids = [p.id for p in swarm]
    positions = np.array([p.position for p in swarm], dtype=float)
    limits = constraints.limits

    raw = np.zeros((n, 2))
    target_points = np.zeros((n, 2))
    for i, pose in enumerate(swarm):
        belief = beliefs[pose.id]
        grad = nav_gradient(positions, belief, noise_var, model,
                            constraints.range_scale)[i]
        target_points[i] = ekf_predict(belief, model).mean[:2]
        norm = float(np.linalg.norm(grad))
        if norm > 0:
            raw[i] = -grad / norm * limits.v_max

    step = raw.reshape(-1).copy()
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def residual_fn(s):
        _, r1 = _pairwise_rows(positions, s, pairs, constraints.d_min_uav)
        _, r2 = _standoff_rows(positions, s, target_points, range(n),
                               constraints.d_safe_target)
        return np.array(r1 + r2)

    def correct(s):
        """One projection + nonlinearity-correction pass over the active set."""
        rows_p, res_p = _pairwise_rows(positions, s, pairs, constraints.d_min_uav)
        rows_s, res_s = _standoff_rows(positions, s, target_points, range(n),
                                       constraints.d_safe_target)
        rows = rows_p + rows_s
        residuals = np.array(res_p + res_s)
        active = np.flatnonzero(residuals < 1e-9)
        if active.size == 0:
            return s
        a = np.array([rows[k] for k in active])

        def active_residuals(x, idx=active):
            return residual_fn(x)[idx]

        return project_step(s, a, residual_fn=active_residuals, counters=counters)

    for _ in range(8):
        if np.all(residual_fn(step) >= -1e-6):
            break
        step = correct(step)
        per = step.reshape(n, 2)  # cap at v_max; the floor is applied last
        speeds = np.linalg.norm(per, axis=1)
        over = speeds > limits.v_max * (1 + 1e-9)
        if over.any():
            per[over] *= (limits.v_max / speeds[over])[:, None]
        step = per.reshape(-1)

    # Lift slow-but-moving UAVs to v_min; whoever cannot move at v_min
    # without re-violating a constraint holds this step.
    per = step.reshape(n, 2)
    slow = [i for i in range(n)
            if 1e-9 < np.linalg.norm(per[i]) < limits.v_min * (1 - 1e-9)]
    for i in slow:
        candidate = per.copy()
        candidate[i] *= limits.v_min / np.linalg.norm(candidate[i])
        if np.all(residual_fn(candidate.reshape(-1)) >= -1e-6):
            per = candidate
        else:
            per[i] = 0.0
            log.debug("navigate: UAV index %d holds (no feasible move at v_min)", i)
    step = per.reshape(-1)

    if np.any(residual_fn(step) < -1e-6):
        # Zero out every UAV still involved in a violated constraint.
        res_p = _pairwise_rows(positions, step, pairs, constraints.d_min_uav)[1]
        res_s = _standoff_rows(positions, step, target_points, range(n),
                               constraints.d_safe_target)[1]
        per = step.reshape(n, 2)
        for k, (i, j) in enumerate(pairs):
            if res_p[k] < -1e-6:
                per[i] = 0.0
                per[j] = 0.0
        for i in range(n):
            if res_s[i] < -1e-6:
                per[i] = 0.0
        step = per.reshape(-1)
        if np.any(residual_fn(step) < -1e-6):
            log.debug("navigate: infeasible even when holding; zero step for all")
            step = np.zeros(2 * n)

    per = step.reshape(n, 2)
    return {ids[i]: positions[i] + per[i] for i in range(n)}


def fallback_orbit(pose: UavPose, center: Vec2, radius: float,
                   limits: MobilityLimits) -> Vec2:
    """Next waypoint on a circle about `center`, advancing by the angular
    step whose chord equals v_max (clamped to the circle diameter).

    Engaged by the scenario when a UAV holds fewer than two distinct
    measurement sources in a step. A pose exactly at the center starts from
    an eastward bearing.
    """
    if radius <= 0:
        raise ValueError("orbit radius must be positive")
    center = np.asarray(center, dtype=float)
    offset = pose.position - center
    dist = float(np.linalg.norm(offset))
    bearing = math.atan2(offset[1], offset[0]) if dist > 0 else 0.0
    chord = min(limits.v_max, 2.0 * radius)
    angular_step = 2.0 * math.asin(chord / (2.0 * radius))
    ang = bearing + angular_step
    return center + radius * np.array([math.cos(ang), math.sin(ang)])


# ---------------------------------------------------------------------------
# Q-learning


@dataclass
class RewardConfig:
    """Reward shaping for the mapping-and-detection mission.

    A cell counts as newly mapped the first time the magnitude of its
    log-odds crosses mapped_threshold; commanding a move into an occupied
    cell is rejected and penalized; confirming the target (detector firing
    while within one cell of it) ends the episode.
    """

    new_cell: float = 1.0
    detection: float = 100.0
    blocked: float = -10.0
    step_cost: float = -0.1
    mapped_threshold: float = 2.0


@dataclass
class QParams:
    alpha: float = 0.9
    gamma: float = 0.99
    epsilon0: float = 1.0
    epsilon_decay: float = 0.999
    epsilon_min: float = 0.05
    steps_per_episode: int = 200

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if not (0.0 <= self.epsilon_min <= self.epsilon0 <= 1.0):
            raise ValueError("need 0 <= epsilon_min <= epsilon0 <= 1")
        if not (0.0 < self.epsilon_decay <= 1.0):
            raise ValueError("epsilon_decay must lie in (0, 1]")


class QTable:
    """Dense state-action value table."""

    def __init__(self, n_states: int, n_actions: int = 4):
        if n_states < 1 or n_actions < 1:
            raise ValueError("table dimensions must be positive")
        self.values = np.zeros((n_states, n_actions))

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "QTable":
        out = QTable(self.n_states, self.n_actions)
        out.values = self.values.copy()
        return out


@dataclass
class Experience:
    """One (s, a, r, s') transition, tagged with its agent and step."""

    uav_id: int
    state: int
    action: int
    reward: float
    next_state: int
    step: int


def q_select_action(qtable: QTable, state: int, epsilon: float,
                    rng: np.random.Generator) -> int:
    """Epsilon-greedy action; greedy ties break toward the lowest index."""
    if not (0.0 <= epsilon <= 1.0):
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(qtable.n_actions))
    return int(np.argmax(qtable.values[state]))


def q_update(qtable: QTable, exp: Experience, params: QParams,
             counters: OpCounters | None = None) -> QTable:
    """Temporal-difference update of one table entry."""
    best_next = float(np.max(qtable.values[exp.next_state]))
    current = qtable.values[exp.state, exp.action]
    td_error = exp.reward + params.gamma * best_next - current
    qtable.values[exp.state, exp.action] = current + params.alpha * td_error
    if counters is not None:
        counters.elementwise("q_update", qtable.n_actions)  # max scan
        counters.record("q_update", multiplies=2, adds=3)
    return qtable


def fuse_experiences(qtable: QTable, batch: list[Experience],
                     params: QParams, counters: OpCounters | None = None) -> QTable:
    """Edge-side fusion: apply a batch of experiences in (step, uav_id) order.

    The fixed ordering makes the fused table deterministic regardless of the
    arrival order of the batch.
    """
    for exp in sorted(batch, key=lambda e: (e.step, e.uav_id)):
        q_update(qtable, exp, params, counters)
    return qtable


def epsilon_at(params: QParams, episode: int, step: int) -> float:
    """Exploration probability at a (episode, step) pair: exponential decay
    over the global step index with a floor."""
    if episode < 0 or step < 0:
        raise ValueError("episode and step must be non-negative")
    global_step = episode * params.steps_per_episode + step
    return max(params.epsilon0 * params.epsilon_decay ** global_step,
               params.epsilon_min)


def qtable_to_csv(qtable: QTable, path) -> None:
    """Dump a Q-table as state,action,value rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("state,action,value\n")
        for s in range(qtable.n_states):
            for a in range(qtable.n_actions):
                fh.write(f"{s},{a},{qtable.values[s, a]:.6g}\n")


def experience_log_to_csv(path, rows) -> None:
    """Dump an experience log as episode,step,uav_id,s,a,r,s_next rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("episode,step,uav_id,s,a,r,s_next\n")
        for episode, exp in rows:
            fh.write(f"{episode},{exp.step},{exp.uav_id},{exp.state},"
                     f"{exp.action},{exp.reward:.6g},{exp.next_state}\n")
