"""Model-predictive position and attitude control.

Two independent receding-horizon loops share one machinery: a linear
discrete model, an output estimator with a steady-state Kalman gain, a
stacked prediction over an N-step horizon, and an unconstrained
least-squares solve penalizing tracking error and input moves.

The position loop models the translational states [x, vx, y, vy, z, vz]
as three double integrators driven by (theta_d, phi_d, G), where small
tilt angles produce horizontal specific force (x_dd ~ g*theta,
y_dd ~ -g*phi) and G = g - U1/m_q is the vertical specific-force deficit
(z_dd ~ -G).  The attitude loop models [phi, p, theta, q, psi, r] driven
by the rotor difference channels (U2, U3, U4) through the inverse
inertias.  Both models ignore the slung load and the angular cross
terms; the estimators absorb the mismatch through the innovation.

Timing convention: the input applied during tick k is the one decided at
tick k-1 (the first tick applies the hover input).  Each step first runs
the estimator forward with the currently applied input, then solves for
the input to apply next tick, with the move penalty anchored at the
currently applied value.  Saturated values (angle caps, thrust ceiling)
are what the estimator is told was applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .controllers import ANGLE_CAP, U1_FLOOR, AttitudeCommand, ControllerOutput
from .dynamics import ControlInputs, QuadState, VehicleParams
from .trajectory import ReferencePoint

HORIZON = 25


@dataclass(frozen=True)
class DiscreteModel:
    """Linear discrete-time model x+ = A x + B u, y = C x."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dt: float

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.B.shape[0] != n or self.C.shape[1] != n:
            raise ValueError("B/C dimensions must match A")
        if self.dt < 0.0:
            raise ValueError("dt must be >= 0")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]


def discretize_translational(dt: float, params: VehicleParams = None) -> DiscreteModel:
    """Euler-discretized translational model, inputs (theta_d, phi_d, G).

    State [x, vx, y, vy, z, vz]; outputs (x, y, z).  A positive pitch
    command accelerates +x, a positive roll command accelerates -y, and a
    positive thrust deficit G accelerates -z, so the input columns carry
    (+g dt, -g dt, -dt) into the respective velocity rows.
    """
    if params is None:
        params = VehicleParams()
    g = params.g
    A = np.eye(6)
    A[0, 1] = dt
    A[2, 3] = dt
    A[4, 5] = dt
    B = np.zeros((6, 3))
    B[1, 0] = g * dt
    B[3, 1] = -g * dt
    B[5, 2] = -dt
    C = np.zeros((3, 6))
    C[0, 0] = 1.0
    C[1, 2] = 1.0
    C[2, 4] = 1.0
    return DiscreteModel(A=A, B=B, C=C, dt=dt)


def discretize_rotational(dt: float, params: VehicleParams = None) -> DiscreteModel:
    """Euler-discretized attitude model, inputs (U2, U3, U4).

    State [phi, p, theta, q, psi, r]; outputs (phi, theta, psi).  The
    angular cross terms are dropped and each rate row is driven through
    the corresponding inverse inertia.
    """
    if params is None:
        params = VehicleParams()
    A = np.eye(6)
    A[0, 1] = dt
    A[2, 3] = dt
    A[4, 5] = dt
    B = np.zeros((6, 3))
    B[1, 0] = dt / params.I_x
    B[3, 1] = dt / params.I_y
    B[5, 2] = dt / params.I_z
    C = np.zeros((3, 6))
    C[0, 0] = 1.0
    C[1, 2] = 1.0
    C[2, 4] = 1.0
    return DiscreteModel(A=A, B=B, C=C, dt=dt)


@dataclass(frozen=True)
class EstimatorConfig:
    """Noise covariances shaping the steady-state estimator gain.

    w and v scale identity process/measurement covariances; z scales the
    cross term (kept in the algebra but zero for every loop here).
    """

    w: float = 1e-4
    v: float = 1e-4
    z: float = 0.0

    def covariances(self, model: DiscreteModel):
        n, p = model.n_states, model.n_outputs
        W = self.w * np.eye(n)
        V = self.v * np.eye(p)
        Z = self.z * np.eye(n, p)
        return W, V, Z


def solve_dare(model: DiscreteModel, cfg: EstimatorConfig,
               tol: float = 1e-12, max_iter: int = 100000) -> np.ndarray:
    """Steady-state predictive Riccati solution by fixed-point iteration.

    P <- W + A P A' - (A P C' + Z)(C P C' + V)^-1 (Z' + C P A'),
    started at P = W, symmetrized each sweep, stopping when the update
    falls below tol in max norm.
    """
    A, C = model.A, model.C
    W, V, Z = cfg.covariances(model)
    P = W.copy()
    for _ in range(max_iter):
        G = A @ P @ C.T + Z
        S = C @ P @ C.T + V
        P_next = W + A @ P @ A.T - G @ np.linalg.solve(S, G.T)
        P_next = 0.5 * (P_next + P_next.T)
        delta = np.max(np.abs(P_next - P))
        P = P_next
        if delta < tol:
            return P
    raise RuntimeError(f"Riccati iteration did not converge in {max_iter} sweeps")


def dare_residual(model: DiscreteModel, cfg: EstimatorConfig, P: np.ndarray) -> float:
    """Max-norm defect of P under one more Riccati sweep."""
    A, C = model.A, model.C
    W, V, Z = cfg.covariances(model)
    G = A @ P @ C.T + Z
    S = C @ P @ C.T + V
    P_next = W + A @ P @ A.T - G @ np.linalg.solve(S, G.T)
    return float(np.max(np.abs(P_next - P)))


def kalman_gain(model: DiscreteModel, P: np.ndarray, cfg: EstimatorConfig) -> np.ndarray:
    """K = (A P C' + Z)(C P C' + V)^-1 for the predictive estimator form."""
    A, C = model.A, model.C
    _, V, Z = cfg.covariances(model)
    G = A @ P @ C.T + Z
    S = C @ P @ C.T + V
    return np.linalg.solve(S.T, G.T).T


@dataclass
class KalmanModel:
    """Steady-state estimator: gain plus the running state estimate."""

    P: np.ndarray
    K: np.ndarray
    xhat: np.ndarray


def make_estimator(model: DiscreteModel, cfg: EstimatorConfig = None) -> KalmanModel:
    if cfg is None:
        cfg = EstimatorConfig()
    P = solve_dare(model, cfg)
    K = kalman_gain(model, P, cfg)
    return KalmanModel(P=P, K=K, xhat=np.zeros(model.n_states))


def estimator_step(km: KalmanModel, model: DiscreteModel,
                   u: np.ndarray, y: np.ndarray) -> np.ndarray:
    """One predictive update: xhat <- A xhat + B u + K (y - C xhat).

    u is the input applied during the current tick, y the measurement
    taken at it; the result predicts the state one tick ahead.
    """
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    innov = y - model.C @ km.xhat
    km.xhat = model.A @ km.xhat + model.B @ u + km.K @ innov
    return km.xhat


@dataclass(frozen=True)
class PredictionModel:
    """Stacked N-step output prediction y_stack = Lam xhat + Gam U.

    Block row i predicts the output i+1 ticks ahead of the estimate;
    Gam is strictly block lower triangular (the first predicted output
    precedes any decided input taking effect), so its diagonal blocks
    are zero.
    """

    Lam: np.ndarray
    Gam: np.ndarray
    N: int


def build_prediction(model: DiscreteModel, N: int = HORIZON) -> PredictionModel:
    if N < 1:
        raise ValueError("horizon must be >= 1")
    A, B, C = model.A, model.B, model.C
    n, m, p = model.n_states, model.n_inputs, model.n_outputs
    # C A^i blocks, i = 0..N-1
    CA = np.empty((N, p, n))
    CA[0] = C
    for i in range(1, N):
        CA[i] = CA[i - 1] @ A
    Lam = CA.reshape(N * p, n)
    Gam = np.zeros((N * p, N * m))
    for i in range(1, N):
        for j in range(i):
            Gam[i * p:(i + 1) * p, j * m:(j + 1) * m] = CA[i - j - 1] @ B
    return PredictionModel(Lam=Lam, Gam=Gam, N=N)


@dataclass(frozen=True)
class MpcWeights:
    """Diagonal tracking and move-penalty weights (scalar or per channel)."""

    y: object = 1.0
    s: object = 0.05

    def diagonals(self, p: int, m: int, N: int):
        yv = np.broadcast_to(np.asarray(self.y, dtype=float), (p,))
        sv = np.broadcast_to(np.asarray(self.s, dtype=float), (m,))
        if np.any(yv <= 0.0) or np.any(sv <= 0.0):
            raise ValueError("weights must be positive")
        return np.tile(yv, N), np.tile(sv, N)


def _move_operators(N: int, m: int):
    """D differences consecutive input blocks; E injects the applied input."""
    D = np.eye(N * m) - np.eye(N * m, k=-m)
    E = np.zeros((N * m, m))
    E[:m, :] = np.eye(m)
    return D, E


def mpc_solve(pm: PredictionModel, weights: MpcWeights,
              xhat: np.ndarray, refs: np.ndarray,
              u_prev: np.ndarray) -> np.ndarray:
    """Minimize the stacked tracking plus input-move cost.

    J = 1/2 sum_i ||y_i - r_i||^2_Y + 1/2 sum_i ||u_i - u_{i-1}||^2_S
    with the first move taken against u_prev (the input already being
    applied).  Returns the stacked minimizer of length N * n_inputs; the
    caller applies only the first block and re-solves next tick.
    """
    N = pm.N
    p = pm.Lam.shape[0] // N
    m = pm.Gam.shape[1] // N
    xhat = np.asarray(xhat, dtype=float)
    refs = np.asarray(refs, dtype=float).reshape(N * p)
    u_prev = np.asarray(u_prev, dtype=float)
    ybar, sbar = weights.diagonals(p, m, N)
    D, E = _move_operators(N, m)
    H = pm.Gam.T @ (ybar[:, None] * pm.Gam) + D.T @ (sbar[:, None] * D)
    rhs = pm.Gam.T @ (ybar * (refs - pm.Lam @ xhat)) + D.T @ (sbar * (E @ u_prev))
    return np.linalg.solve(H, rhs)


def mpc_cost(pm: PredictionModel, weights: MpcWeights,
             xhat: np.ndarray, refs: np.ndarray,
             u_prev: np.ndarray, U: np.ndarray) -> float:
    """Cost functional evaluated at a stacked input sequence U."""
    N = pm.N
    p = pm.Lam.shape[0] // N
    m = pm.Gam.shape[1] // N
    refs = np.asarray(refs, dtype=float).reshape(N * p)
    U = np.asarray(U, dtype=float).reshape(N * m)
    ybar, sbar = weights.diagonals(p, m, N)
    D, E = _move_operators(N, m)
    e = pm.Lam @ np.asarray(xhat, dtype=float) + pm.Gam @ U - refs
    dU = D @ U - E @ np.asarray(u_prev, dtype=float)
    return 0.5 * float(e @ (ybar * e) + dU @ (sbar * dU))


class _LoopSolver:
    """Estimator plus cached first-block solve for one receding loop."""

    def __init__(self, model: DiscreteModel, cfg: EstimatorConfig,
                 weights: MpcWeights, N: int):
        self.model = model
        self.km = make_estimator(model, cfg)
        self.pm = build_prediction(model, N)
        m = model.n_inputs
        p = model.n_outputs
        ybar, sbar = weights.diagonals(p, m, N)
        D, E = _move_operators(N, m)
        Gam = self.pm.Gam
        H = Gam.T @ (ybar[:, None] * Gam) + D.T @ (sbar[:, None] * D)
        # first input block of H^-1 [Gam' Ybar, D' Sbar E]
        M1 = np.linalg.solve(H, Gam.T * ybar)
        M2 = np.linalg.solve(H, D.T @ (sbar[:, None] * E))
        self._M1 = M1[:m]
        self._M2 = M2[:m]

    def reset(self):
        self.km.xhat = np.zeros(self.model.n_states)

    def advance(self, refs: np.ndarray, u_now: np.ndarray,
                x_meas: np.ndarray) -> np.ndarray:
        """Predict one tick ahead of the measured state, return the next input.

        The estimate is re-anchored at the measured full state every tick
        before the update, so the innovation is identically zero and the
        estimator supplies the model-consistent one-step prediction that
        compensates the one-tick input delay.  Letting the filter free-run
        on position measurements instead leaves a steady velocity bias of
        about one second times any unmodeled force; the optimizer leans
        against that phantom velocity, the slung load leans back harder,
        and the loop runs away for heavy loads.
        """
        self.km.xhat = np.asarray(x_meas, dtype=float)
        y = self.model.C @ self.km.xhat
        xhat = estimator_step(self.km, self.model, u_now, y)
        return self._M1 @ (refs - self.pm.Lam @ xhat) + self._M2 @ u_now


class MpcController:
    """Cascaded receding-horizon position and attitude control.

    Matches the step interface of the other controllers.  The position
    loop tracks the current reference point held over its horizon and
    produces a tilt pair and a thrust deficit; the attitude loop tracks
    that tilt command the same way.  Both loops apply the input decided
    on the previous tick, so the very first tick flies the hover input.
    """

    def __init__(self, params: VehicleParams = None, dt: float = 0.01,
                 horizon: int = HORIZON,
                 weights_pos: MpcWeights = None,
                 weights_att: MpcWeights = None,
                 est_cfg: EstimatorConfig = None):
        self.params = params if params is not None else VehicleParams()
        self.dt = dt
        self.horizon = horizon
        cfg = est_cfg if est_cfg is not None else EstimatorConfig()
        # the G channel moves the velocity 1/g as far per unit input as the
        # tilt channels do, so its move weight is scaled by 1/g^2 to give
        # all three position inputs equal authority per unit penalty; a
        # uniform move weight leaves the vertical loop oscillatory.
        # The attitude move weight must sit far below the tilt move weight:
        # the position loop crosses over near the attitude bandwidth, and a
        # sluggish inner loop eats the cascade phase margin and pumps a
        # growing swing at every load mass.  The tilt weight cannot rescue
        # that (a move penalty adds lag without cutting gain), so the inner
        # loop is made fast instead.  Stable plateau measured at tilt move
        # weight 0.2-0.8 x attitude move weight 1e-4 to 5e-4.
        g = self.params.g
        wp = weights_pos if weights_pos is not None else MpcWeights(
            s=(0.4, 0.4, 0.05 / g ** 2))
        wa = weights_att if weights_att is not None else MpcWeights(s=0.0002)
        self._pos = _LoopSolver(discretize_translational(dt, self.params),
                                cfg, wp, horizon)
        self._att = _LoopSolver(discretize_rotational(dt, self.params),
                                cfg, wa, horizon)
        self._u_pos = np.zeros(3)   # (theta_d, phi_d, G) applied this tick
        self._u_att = np.zeros(3)   # (U2, U3, U4) applied this tick

    def reset(self):
        self._pos.reset()
        self._att.reset()
        self._u_pos = np.zeros(3)
        self._u_att = np.zeros(3)

    def step(self, t: float, state: QuadState,
             ref: ReferencePoint) -> ControllerOutput:
        par = self.params
        # input decided last tick, applied now, saturated to what the
        # vehicle can actually do
        theta_d, phi_d, G = self._u_pos
        saturated = False
        if abs(theta_d) > ANGLE_CAP:
            theta_d = math.copysign(ANGLE_CAP, theta_d)
            saturated = True
        if abs(phi_d) > ANGLE_CAP:
            phi_d = math.copysign(ANGLE_CAP, phi_d)
            saturated = True
        U1 = par.m_q * (par.g - G)
        if U1 < U1_FLOOR:
            U1 = U1_FLOOR
            saturated = True
        if U1 > par.U1_max:
            U1 = par.U1_max
            saturated = True
        G_app = par.g - U1 / par.m_q
        u_pos_now = np.array([theta_d, phi_d, G_app])
        U2, U3, U4 = self._u_att

        # position loop: predict under the applied input, decide the next;
        # the current reference point is held over the whole horizon
        x_pos = np.array([state.x, state.vx, state.y, state.vy,
                          state.z, state.vz])
        refs_pos = np.tile(ref.pos[:3], self.horizon)
        self._u_pos = self._pos.advance(refs_pos, u_pos_now, x_pos)

        # attitude loop tracks this tick's applied tilt, held over the horizon
        x_att = np.array([state.phi, state.p_rate, state.theta,
                          state.q_rate, state.psi, state.r_rate])
        refs_att = np.tile([phi_d, theta_d, 0.0], self.horizon)
        self._u_att = self._att.advance(refs_att, self._u_att, x_att)

        cmd = AttitudeCommand(phi_d=phi_d, theta_d=theta_d, psi_d=0.0, U1=U1)
        # the attitude model decides torques; the roll/pitch channels of
        # ControlInputs are rotor force differences with moment arm l, so
        # those two are converted (yaw moments pass straight through)
        u = ControlInputs(U1=U1, U2=U2 / par.l, U3=U3 / par.l, U4=U4)
        return ControllerOutput(u=u, cmd=cmd, saturated=saturated)
