"""Rigid-body quadrotor dynamics, alone and coupled to a cable-slung load.

Conventions used everywhere in this package:

* world frame is z-up, gravity acts along -z, collective thrust along the
  body z axis (so a level vehicle climbs for U1 > (total weight));
* attitude is roll/pitch/yaw (phi, theta, psi) with the small-rate
  identification of Euler-angle rates and body rates;
* the load hangs a rigid cable of length L below the vehicle, described by
  its horizontal offsets (r, s) in the world frame.  The vertical offset is
  zeta = sqrt(L^2 - r^2 - s^2) >= 0, so the load sits at
  (x + r, y + s, z - zeta).

Quadrotor-only state vector (QUAD_DIM = 12)::

    [x, y, z, vx, vy, vz, phi, theta, psi, p, q, r]

Coupled state vector (COUPLED_DIM = 16) appends the load::

    [... quad ..., load_r, load_s, load_r_dot, load_s_dot]

The load mass is a parameter of the coupled derivative, not a state, and is
never visible to the controllers.

The coupled translational/load accelerations are mutually implicit: the five
relations couple (x_dd, y_dd, z_dd, r_dd, s_dd).  They are assembled as one
dense 5x5 linear system and solved by direct elimination each evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

QUAD_DIM = 12
COUPLED_DIM = 16

# Fraction of cable length below which the vertical offset is considered
# degenerate (load swinging through the horizontal plane of the vehicle):
# the model is only valid for a taut, downward-hanging cable.
ZETA_FLOOR_FRAC = 0.01


class TautCableError(RuntimeError):
    """Load swing reached the taut-cable model's validity boundary."""


class GimbalLockError(RuntimeError):
    """Roll or pitch reached +/-90 deg where the Euler parametrization fails."""


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the vehicle, cable and load envelope.

    Defaults describe the benchmark vehicle used throughout: a 1 kg quadrotor
    with a 0.5 m cable and a rated load of at most 0.6 kg.
    """

    m_q: float = 1.0        # quadrotor mass, kg
    I_x: float = 7.5e-3     # roll inertia, kg m^2
    I_y: float = 7.5e-3     # pitch inertia, kg m^2
    I_z: float = 1.3e-2     # yaw inertia, kg m^2
    l: float = 0.25         # rotor arm length, m
    b: float = 3.13e-5      # rotor lift coefficient, N s^2
    d: float = 7.5e-7       # rotor drag coefficient, N m s^2
    L: float = 0.5          # cable length, m
    M_max: float = 0.6      # maximum rated load mass, kg
    U1_max: float = 14.72   # collective thrust ceiling, N
    g: float = 9.81         # gravitational acceleration, m s^-2

    def __post_init__(self):
        for name in ("m_q", "I_x", "I_y", "I_z", "l", "b", "d", "L",
                     "M_max", "U1_max", "g"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"VehicleParams.{name} must be positive")


@dataclass
class QuadState:
    """Vehicle state: world position/velocity, attitude, body rates."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0
    p_rate: float = 0.0
    q_rate: float = 0.0
    r_rate: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.vx, self.vy, self.vz,
                         self.phi, self.theta, self.psi,
                         self.p_rate, self.q_rate, self.r_rate])

    @classmethod
    def from_array(cls, a) -> "QuadState":
        a = [float(v) for v in a]
        return cls(*a[:QUAD_DIM])


@dataclass
class LoadState:
    """Slung-load state relative to the vehicle: horizontal offsets and rates."""

    r: float = 0.0
    s: float = 0.0
    r_dot: float = 0.0
    s_dot: float = 0.0
    m_L: float = 0.0        # load mass, kg

    def zeta(self, L: float) -> float:
        """Vertical cable offset below the vehicle."""
        return cable_offset(self.r, self.s, L)


@dataclass
class SystemState:
    """Full coupled state at time t."""

    quad: QuadState = field(default_factory=QuadState)
    load: LoadState = field(default_factory=LoadState)
    t: float = 0.0

    def as_array(self) -> np.ndarray:
        q = self.quad
        ld = self.load
        return np.array([q.x, q.y, q.z, q.vx, q.vy, q.vz,
                         q.phi, q.theta, q.psi,
                         q.p_rate, q.q_rate, q.r_rate,
                         ld.r, ld.s, ld.r_dot, ld.s_dot])


@dataclass(frozen=True)
class ControlInputs:
    """Rotor-level control channels.

    U1 is the collective thrust (N); U2/U3 are the roll/pitch rotor force
    differences (the plant torque is l*U2, l*U3); U4 is the yaw drag moment.
    """

    U1: float = 0.0
    U2: float = 0.0
    U3: float = 0.0
    U4: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.U1, self.U2, self.U3, self.U4])


@dataclass(frozen=True)
class CableForce:
    """Reaction force the cable applies to the vehicle (diagnostic)."""

    Fcx: float
    Fcy: float
    Fcz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.Fcx, self.Fcy, self.Fcz])


def rotor_forces(omega, params: VehicleParams):
    """Per-rotor thrust F_i = b w_i^2 and drag torque Q_i = d w_i^2.

    Args:
        omega: four rotor speeds, rad/s, all >= 0.

    Returns:
        (F, Q) arrays of shape (4,).
    """
    w = np.asarray(omega, dtype=float)
    if w.shape != (4,):
        raise ValueError("expected four rotor speeds")
    if np.any(w < 0.0):
        raise ValueError("rotor speeds must be non-negative")
    return params.b * w * w, params.d * w * w


def mix_rotors(F, Q) -> ControlInputs:
    """Combine per-rotor thrusts/torques into the four control channels.

    U1 = sum(F); U2 = -F1 + F3; U3 = -F2 + F4; U4 = Q1 - Q2 + Q3 - Q4
    (rotor order: front, right, back, left; alternating spin directions).
    """
    F = np.asarray(F, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if F.shape != (4,) or Q.shape != (4,):
        raise ValueError("expected four rotor thrusts and four torques")
    return ControlInputs(
        U1=float(F[0] + F[1] + F[2] + F[3]),
        U2=float(-F[0] + F[2]),
        U3=float(-F[1] + F[3]),
        U4=float(Q[0] - Q[1] + Q[2] - Q[3]),
    )


def cable_offset(r: float, s: float, L: float) -> float:
    """zeta = sqrt(L^2 - r^2 - s^2), guarded against the slack/flat limit."""
    zsq = L * L - r * r - s * s
    floor = ZETA_FLOOR_FRAC * L
    if zsq <= floor * floor:
        raise TautCableError(
            f"load offset (r={r:.4f}, s={s:.4f}) leaves the taut-cable "
            f"regime (cable length {L})")
    return math.sqrt(zsq)


def _rotational_rates(phi_rate: float, theta_rate: float, psi_rate: float,
                      U2: float, U3: float, U4: float,
                      p: VehicleParams):
    """Angular accelerations, shared verbatim by both models.

    phi_dd = ((I_y - I_z)/I_x) theta_dot psi_dot + (l/I_x) U2, etc.
    """
    phi_dd = (p.I_y - p.I_z) / p.I_x * theta_rate * psi_rate + p.l / p.I_x * U2
    theta_dd = (p.I_z - p.I_x) / p.I_y * phi_rate * psi_rate + p.l / p.I_y * U3
    psi_dd = (p.I_x - p.I_y) / p.I_z * theta_rate * phi_rate + U4 / p.I_z
    return phi_dd, theta_dd, psi_dd


def _solve5(A, b):
    """Direct Gaussian elimination with partial pivoting on a 5x5 system.

    A is a list of 5 row-lists, b a list of 5 floats; both are destroyed.
    Hand-rolled to keep the per-evaluation cost scalar-only: this runs tens
    of millions of times per parameter sweep.
    """
    for k in range(4):
        piv = k
        best = abs(A[k][k])
        for i in range(k + 1, 5):
            m = abs(A[i][k])
            if m > best:
                best = m
                piv = i
        if best == 0.0:
            raise ArithmeticError("singular coupling matrix")
        if piv != k:
            A[k], A[piv] = A[piv], A[k]
            b[k], b[piv] = b[piv], b[k]
        Ak = A[k]
        akk = Ak[k]
        for i in range(k + 1, 5):
            Ai = A[i]
            f = Ai[k] / akk
            if f != 0.0:
                for j in range(k + 1, 5):
                    Ai[j] -= f * Ak[j]
                b[i] -= f * b[k]
    x = [0.0] * 5
    for i in range(4, -1, -1):
        Ai = A[i]
        acc = b[i]
        for j in range(i + 1, 5):
            acc -= Ai[j] * x[j]
        x[i] = acc / Ai[i]
    return x


def _coupled_accel(phi: float, theta: float, r: float, s: float,
                   vr: float, vs: float, m_L: float, U1: float,
                   p: VehicleParams):
    """Solve the five implicit acceleration relations of the coupled model.

    Unknowns a = (x_dd, y_dd, z_dd, r_dd, s_dd).  With M = m_q + m_L and
    mu = m_L / M the relations are (yaw = 0 in the translational rows):

        x_dd + mu r_dd                         = cos(phi) sin(theta) U1 / M
        y_dd + mu s_dd                         = -sin(phi) U1 / M
        z_dd + mu (r/z) r_dd + mu (s/z) s_dd   = cos(phi) cos(theta) U1 / M
                                                  - mu (vr^2 + vs^2)/z
                                                  - mu (r vr + s vs)^2 / z^3
                                                  - g (m_L z / L + m_q) / M
        (s^2 - L^2) z^2 r_dd - z^4 x_dd - r z^3 z_dd - r s z^2 s_dd
                                               = r B + r g z^3
        (r^2 - L^2) z^2 s_dd - z^4 y_dd - s z^3 z_dd - r s z^2 r_dd
                                               = s B + s g z^3

    where z = zeta and B = (L^2 - s^2) vr^2 + (L^2 - r^2) vs^2 + 2 r s vr vs.
    """
    L = p.L
    g = p.g
    M = p.m_q + m_L
    mu = m_L / M
    zeta = cable_offset(r, s, L)
    z2 = zeta * zeta
    z3 = z2 * zeta
    z4 = z2 * z2

    cphi = math.cos(phi)
    sphi = math.sin(phi)
    cth = math.cos(theta)
    sth = math.sin(theta)

    rvr_svs = r * vr + s * vs
    vsq = vr * vr + vs * vs
    B = ((L * L - s * s) * vr * vr + (L * L - r * r) * vs * vs
         + 2.0 * r * s * vr * vs)

    A = [
        [1.0, 0.0, 0.0, mu, 0.0],
        [0.0, 1.0, 0.0, 0.0, mu],
        [0.0, 0.0, 1.0, mu * r / zeta, mu * s / zeta],
        [-z4, 0.0, -r * z3, (s * s - L * L) * z2, -r * s * z2],
        [0.0, -z4, -s * z3, -r * s * z2, (r * r - L * L) * z2],
    ]
    b = [
        cphi * sth * U1 / M,
        -sphi * U1 / M,
        (cphi * cth * U1 / M - mu * vsq / zeta
         - mu * rvr_svs * rvr_svs / z3
         - g * (m_L * zeta / L + p.m_q) / M),
        r * B + r * g * z3,
        s * B + s * g * z3,
    ]
    return _solve5(A, b)


def coupled_accelerations(state: SystemState, U1: float,
                          params: VehicleParams) -> np.ndarray:
    """Translational and load accelerations (x_dd, y_dd, z_dd, r_dd, s_dd)."""
    q = state.quad
    ld = state.load
    return np.array(_coupled_accel(q.phi, q.theta, ld.r, ld.s,
                                   ld.r_dot, ld.s_dot, ld.m_L, U1, params))


def zeta_derivatives(r: float, s: float, vr: float, vs: float,
                     r_dd: float, s_dd: float, L: float):
    """(zeta_dot, zeta_ddot) from differentiating zeta = sqrt(L^2 - r^2 - s^2)."""
    zeta = cable_offset(r, s, L)
    num = r * vr + s * vs
    zeta_dot = -num / zeta
    zeta_dd = (-(vr * vr + vs * vs + r * r_dd + s * s_dd) / zeta
               - num * num / (zeta ** 3))
    return zeta_dot, zeta_dd


def cable_force(state: SystemState, params: VehicleParams,
                accels=None) -> CableForce:
    """Reaction force of the cable on the vehicle.

    Fc = -m_L * (x_dd + r_dd, y_dd + s_dd, z_dd + zeta_dd - g*zeta/L).
    Diagnostic only: the coupled derivative embeds the interaction directly.
    """
    ld = state.load
    if accels is None:
        accels = coupled_accelerations(state, 0.0, params)
    x_dd, y_dd, z_dd, r_dd, s_dd = (float(a) for a in accels)
    zeta = cable_offset(ld.r, ld.s, params.L)
    _, zeta_dd = zeta_derivatives(ld.r, ld.s, ld.r_dot, ld.s_dot,
                                  r_dd, s_dd, params.L)
    m = ld.m_L
    return CableForce(
        Fcx=-m * (x_dd + r_dd),
        Fcy=-m * (y_dd + s_dd),
        Fcz=-m * (z_dd + zeta_dd - params.g * zeta / params.L),
    )


def _check_attitude(phi: float, theta: float):
    if abs(phi) >= math.pi / 2 or abs(theta) >= math.pi / 2:
        raise GimbalLockError(
            f"attitude out of range (phi={phi:.3f}, theta={theta:.3f})")


def quad_derivative_array(y, u, params: VehicleParams) -> np.ndarray:
    """Time derivative of the 12-element quadrotor-only state vector."""
    x, yy, z, vx, vy, vz, phi, theta, psi, pr, qr, rr = (float(v) for v in y)
    U1, U2, U3, U4 = (float(v) for v in u)
    _check_attitude(phi, theta)
    p = params
    cphi = math.cos(phi)
    sphi = math.sin(phi)
    cth = math.cos(theta)
    sth = math.sin(theta)
    cpsi = math.cos(psi)
    spsi = math.sin(psi)
    ax = (cphi * sth * cpsi + sphi * spsi) * U1 / p.m_q
    ay = (cphi * sth * spsi - sphi * cpsi) * U1 / p.m_q
    az = cphi * cth * U1 / p.m_q - p.g
    phi_dd, theta_dd, psi_dd = _rotational_rates(pr, qr, rr, U2, U3, U4, p)
    return np.array([vx, vy, vz, ax, ay, az, pr, qr, rr,
                     phi_dd, theta_dd, psi_dd])


def coupled_derivative_array(y, u, m_L: float,
                             params: VehicleParams) -> np.ndarray:
    """Time derivative of the 16-element coupled state vector."""
    (x, yy, z, vx, vy, vz, phi, theta, psi, pr, qr, rr,
     lr, ls, lvr, lvs) = (float(v) for v in y)
    U1, U2, U3, U4 = (float(v) for v in u)
    _check_attitude(phi, theta)
    ax, ay, az, ar, as_ = _coupled_accel(phi, theta, lr, ls, lvr, lvs,
                                         m_L, U1, params)
    phi_dd, theta_dd, psi_dd = _rotational_rates(pr, qr, rr, U2, U3, U4,
                                                 params)
    return np.array([vx, vy, vz, ax, ay, az, pr, qr, rr,
                     phi_dd, theta_dd, psi_dd, lvr, lvs, ar, as_])


def quad_only_derivative(state: QuadState, u: ControlInputs,
                         params: VehicleParams) -> np.ndarray:
    """Quadrotor-only model; yaw-aware translational rows."""
    return quad_derivative_array(state.as_array(), u.as_array(), params)


def coupled_derivative(state: SystemState, u: ControlInputs,
                       params: VehicleParams) -> np.ndarray:
    """Coupled quadrotor + slung-load model.

    The rotational rows are computed by the same code path as the
    quadrotor-only model (the load acts at the centre of gravity and does
    not torque the body), so the two agree bitwise.
    """
    return coupled_derivative_array(state.as_array(), u.as_array(),
                                    state.load.m_L, params)


def pendulum_accelerations(r: float, s: float, vr: float, vs: float,
                           params: VehicleParams):
    """(r_dd, s_dd) of the load subsystem with the vehicle pinned in place.

    Setting x_dd = y_dd = z_dd = 0 in the coupled relations leaves a 2x2
    system; with a fixed pivot the load is an exact spherical pendulum, which
    is what makes this useful as an energy-conservation probe.
    """
    L = params.L
    g = params.g
    zeta = cable_offset(r, s, L)
    z2 = zeta * zeta
    z3 = z2 * zeta
    B = ((L * L - s * s) * vr * vr + (L * L - r * r) * vs * vs
         + 2.0 * r * s * vr * vs)
    a11 = (s * s - L * L) * z2
    a12 = -r * s * z2
    a21 = -r * s * z2
    a22 = (r * r - L * L) * z2
    b1 = r * B + r * g * z3
    b2 = s * B + s * g * z3
    det = a11 * a22 - a12 * a21
    return (b1 * a22 - b2 * a12) / det, (a11 * b2 - a21 * b1) / det


def pendulum_energy(r: float, s: float, vr: float, vs: float, m_L: float,
                    params: VehicleParams) -> float:
    """Mechanical energy of the pinned-pivot load (potential zero at zeta=L)."""
    zeta = cable_offset(r, s, params.L)
    zeta_dot = -(r * vr + s * vs) / zeta
    kinetic = 0.5 * m_L * (vr * vr + vs * vs + zeta_dot * zeta_dot)
    potential = m_L * params.g * (params.L - zeta)
    return kinetic + potential
