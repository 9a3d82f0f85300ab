"""Cascaded PD and sliding-mode flight controllers.

Both controllers share one architecture: an outer position loop turns the
tracking error into a collective-thrust demand and a pair of desired tilt
angles, and an inner attitude loop turns the angle errors into torques.
They are designed on the load-free vehicle model and never see the load
state or mass; the slung load acts purely as an unmodeled disturbance.

Position-loop composition: the loop produces commanded horizontal
accelerations (a_cx, a_cy) and a thrust demand U1_dem, and the tilt
extraction is evaluated against the nominal hover thrust m_q*g, so the
realized horizontal acceleration is roughly a_c/g.  The gain is then
independent of the (unknown) total mass, because under any steady load the
applied thrust self-regulates to carry the total weight and thrust/mass
stays near g.

The SMC extraction is additionally scaled by the achieved-thrust fraction
U1_applied/U1_dem (its printed law divides by the live thrust): the
fraction is exactly 1 while the demand is met, and starves horizontal
authority in favour of altitude when the load exceeds what the thrust
ceiling can lift, which produces the overload slow-arrival behaviour near
the vehicle's load limit.  PD skips that scaling: its thrust demand
integrates the altitude sag up against the ceiling even for statically
liftable loads, so the fraction is not an overload signal there.

All angle commands are capped well inside the asin/cascade validity region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ControlInputs, QuadState, VehicleParams
from .trajectory import ReferencePoint

ANGLE_CAP = math.radians(20.0)
U1_FLOOR = 1e-3  # N; keeps the thrust demand positive for the tilt division
# Thrust demands are conditioned to at most this multiple of the ceiling
# before the achieved fraction is computed, so a diverging altitude demand
# cannot choke the lateral channel entirely: the fraction bottoms out at
# 1/DEMAND_CEILING instead of decaying toward zero.
DEMAND_CEILING = 1.5

# gain/surface ordering used by all 6-vectors here
AXES = ("phi", "theta", "psi", "x", "y", "z")


@dataclass(frozen=True)
class PdGains:
    Kpx: float = 10.0
    Kpy: float = 10.0
    Kpz: float = 20.0
    Kdx: float = 8.0
    Kdy: float = 8.0
    Kdz: float = 15.0
    Kpp: float = 50.0   # roll P
    Kpt: float = 50.0   # pitch P
    Kpps: float = 20.0  # yaw P
    Kdp: float = 20.0   # roll D
    Kdt: float = 20.0   # pitch D
    Kdps: float = 15.0  # yaw D

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if v <= 0.0:
                raise ValueError(f"PdGains.{name} must be positive")


@dataclass(frozen=True)
class SmcGains:
    """Reaching gains k and surface slopes lambda, ordered (phi, theta,
    psi, x, y, z).  boundary_layer = 0 gives the pure sign law; > 0 ramps
    the switch linearly inside |S| < boundary_layer.

    The default layer is nonzero: at a finite control rate the pure sign
    law dithers the tilt command by its full reaching amplitude every
    tick, which the attitude loop (whose dominant pole is -lambda_phi)
    can neither follow nor average away, and the position loop limit
    cycles at the decimeter scale.  The ramp keeps the command smooth so
    the command-rate feedforward below stays meaningful; set 0 to study
    the raw switching behaviour.
    """

    k: tuple = (0.4, 0.4, 0.4, 0.6, 0.6, 0.4)
    lam: tuple = (0.5, 0.5, 0.5, 2.25, 2.25, 5.0)
    boundary_layer: float = 0.08

    def __post_init__(self):
        if len(self.k) != 6 or len(self.lam) != 6:
            raise ValueError("k and lam must each have six entries")
        if min(self.k) <= 0.0 or min(self.lam) <= 0.0:
            raise ValueError("reaching gains and slopes must be positive")
        if self.boundary_layer < 0.0:
            raise ValueError("boundary_layer must be >= 0")


@dataclass(frozen=True)
class AttitudeCommand:
    phi_d: float
    theta_d: float
    psi_d: float
    U1: float


@dataclass(frozen=True)
class ControllerOutput:
    u: ControlInputs
    cmd: AttitudeCommand
    saturated: bool


def desired_angles(ax_des: float, ay_des: float, U1: float, m_q: float):
    """Tilt angles that point the thrust vector at a desired specific force.

    phi_d = asin(-m_q*ay_des/U1); theta_d = asin(m_q*ax_des/(U1*cos(phi_d))).
    Arguments outside [-1, 1] are clamped and flagged, and the resulting
    angles are capped to +/-ANGLE_CAP.

    Returns:
        (phi_d, theta_d, clamped)
    """
    if U1 <= 0.0:
        raise ValueError("desired_angles requires U1 > 0")
    clamped = False

    a = -m_q * ay_des / U1
    if a > 1.0 or a < -1.0:
        a = math.copysign(1.0, a)
        clamped = True
    phi_d = math.asin(a)

    b = m_q * ax_des / (U1 * math.cos(phi_d))
    if b > 1.0 or b < -1.0:
        b = math.copysign(1.0, b)
        clamped = True
    theta_d = math.asin(b)

    if phi_d > ANGLE_CAP or phi_d < -ANGLE_CAP:
        phi_d = math.copysign(ANGLE_CAP, phi_d)
        clamped = True
    if theta_d > ANGLE_CAP or theta_d < -ANGLE_CAP:
        theta_d = math.copysign(ANGLE_CAP, theta_d)
        clamped = True
    return phi_d, theta_d, clamped


def sliding_surfaces(e, e_dot, lam):
    """S_i = e_dot_i + lambda_i * e_i for the six tracked variables."""
    e = np.asarray(e, dtype=float)
    e_dot = np.asarray(e_dot, dtype=float)
    lam = np.asarray(lam, dtype=float)
    return e_dot + lam * e


def _switch(S: float, boundary_layer: float) -> float:
    """sgn(S), with sgn(0) = 0; linear ramp inside the boundary layer."""
    if boundary_layer > 0.0:
        v = S / boundary_layer
        return max(-1.0, min(1.0, v))
    if S > 0.0:
        return 1.0
    if S < 0.0:
        return -1.0
    return 0.0


def _position_output(a_cx: float, a_cy: float, U1_raw: float,
                     params: VehicleParams, starve: bool):
    """Saturate the thrust demand and extract the tilt command.

    The tilt extraction runs against the nominal hover thrust, so the
    horizontal loop gain stays independent of whatever load the thrust
    loop is implicitly carrying.  With starve=True the extraction is
    additionally scaled by the achieved fraction U1_applied/U1_dem of
    the conditioned demand: exactly 1 while the demand fits inside
    [0, U1_max], dropping toward the 1/DEMAND_CEILING floor when altitude
    consumes the whole thrust budget.  The demand of a rate-damped
    thrust law stays bounded under overload, which makes the fraction a
    usable overload signal; an integrating/proportional thrust law
    (the PD one) winds its demand up against the ceiling even for loads
    it could statically carry, so PD passes starve=False.
    """
    saturated = False
    U1_dem = U1_raw
    if U1_dem < U1_FLOOR:
        U1_dem = U1_FLOOR
        saturated = True
    if U1_dem > DEMAND_CEILING * params.U1_max:
        U1_dem = DEMAND_CEILING * params.U1_max
        saturated = True
    U1_applied = U1_dem
    if U1_applied > params.U1_max:
        U1_applied = params.U1_max
        saturated = True
    hover = params.m_q * params.g
    pre = params.m_q / hover
    if starve:
        pre *= U1_applied / U1_dem
    phi_d, theta_d, clamped = desired_angles(pre * a_cx, pre * a_cy,
                                             hover, params.m_q)
    cmd = AttitudeCommand(phi_d=phi_d, theta_d=theta_d, psi_d=0.0,
                          U1=U1_applied)
    return cmd, saturated or clamped


class PdController:
    """Proportional-derivative cascade with acceleration feedforward."""

    def __init__(self, gains: PdGains = None, params: VehicleParams = None):
        self.gains = gains if gains is not None else PdGains()
        self.params = params if params is not None else VehicleParams()

    def reset(self):
        pass  # stateless

    def position(self, ref: ReferencePoint, state: QuadState):
        g = self.gains
        p = self.params
        a_cx = (ref.acc[0] + g.Kdx * (ref.vel[0] - state.vx)
                + g.Kpx * (ref.pos[0] - state.x))
        a_cy = (ref.acc[1] + g.Kdy * (ref.vel[1] - state.vy)
                + g.Kpy * (ref.pos[1] - state.y))
        a_cz = (ref.acc[2] + g.Kdz * (ref.vel[2] - state.vz)
                + g.Kpz * (ref.pos[2] - state.z))
        U1_raw = (p.m_q * (a_cz + p.g)
                  / (math.cos(state.phi) * math.cos(state.theta)))
        return _position_output(a_cx, a_cy, U1_raw, p, starve=False)

    def attitude(self, cmd: AttitudeCommand, state: QuadState) -> ControlInputs:
        g = self.gains
        p = self.params
        U2 = (p.I_x / p.l) * (g.Kpp * (cmd.phi_d - state.phi)
                              - g.Kdp * state.p_rate)
        U3 = (p.I_y / p.l) * (g.Kpt * (cmd.theta_d - state.theta)
                              - g.Kdt * state.q_rate)
        U4 = p.I_z * (g.Kpps * (cmd.psi_d - state.psi)
                      - g.Kdps * state.r_rate)
        return ControlInputs(U1=cmd.U1, U2=U2, U3=U3, U4=U4)

    def step(self, t: float, state: QuadState,
             ref: ReferencePoint) -> ControllerOutput:
        cmd, saturated = self.position(ref, state)
        u = self.attitude(cmd, state)
        return ControllerOutput(u=u, cmd=cmd, saturated=saturated)


class SmcController:
    """Sliding-mode cascade with per-axis reaching laws.

    The attitude surface slope lambda_phi bounds how fast the inner loop
    can close an angle error on its own (on the surface the body rate is
    exactly lambda * error), so the commanded angle rate is fed forward
    by backward-differencing the tilt command between ticks.  With the
    default boundary layer the command is smooth and the difference is a
    faithful rate; with a zero layer the command dithers tick-to-tick
    and the feedforward (like the rest of the loop) degrades.
    """

    def __init__(self, gains: SmcGains = None, params: VehicleParams = None,
                 dt: float = 0.01):
        self.gains = gains if gains is not None else SmcGains()
        self.params = params if params is not None else VehicleParams()
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        self.dt = dt
        self._prev_phi_d = None
        self._prev_theta_d = None

    def reset(self):
        self._prev_phi_d = None
        self._prev_theta_d = None

    def step(self, t: float, state: QuadState,
             ref: ReferencePoint) -> ControllerOutput:
        g = self.gains
        p = self.params
        k_phi, k_theta, k_psi, k_x, k_y, k_z = g.k
        l_phi, l_theta, l_psi, l_x, l_y, l_z = g.lam
        bl = g.boundary_layer

        # position loop
        e_x = ref.pos[0] - state.x
        e_y = ref.pos[1] - state.y
        e_z = ref.pos[2] - state.z
        ed_x = ref.vel[0] - state.vx
        ed_y = ref.vel[1] - state.vy
        ed_z = ref.vel[2] - state.vz
        S_x = ed_x + l_x * e_x
        S_y = ed_y + l_y * e_y
        S_z = ed_z + l_z * e_z
        a_cx = ref.acc[0] + l_x * ed_x + k_x * _switch(S_x, bl)
        a_cy = ref.acc[1] + l_y * ed_y + k_y * _switch(S_y, bl)
        U1_raw = (p.m_q / (math.cos(state.phi) * math.cos(state.theta))
                  * (p.g + ref.acc[2] + l_z * ed_z + k_z * _switch(S_z, bl)))
        cmd, saturated = _position_output(a_cx, a_cy, U1_raw, p,
                                          starve=True)

        # attitude loop with differenced command-rate feedforward
        if self._prev_phi_d is None:
            rate_phi_d = 0.0
            rate_theta_d = 0.0
        else:
            rate_phi_d = (cmd.phi_d - self._prev_phi_d) / self.dt
            rate_theta_d = (cmd.theta_d - self._prev_theta_d) / self.dt
        self._prev_phi_d = cmd.phi_d
        self._prev_theta_d = cmd.theta_d

        e_phi = cmd.phi_d - state.phi
        e_theta = cmd.theta_d - state.theta
        e_psi = cmd.psi_d - state.psi
        ed_phi = rate_phi_d - state.p_rate
        ed_theta = rate_theta_d - state.q_rate
        ed_psi = -state.r_rate  # psi_d is constant
        S_phi = ed_phi + l_phi * e_phi
        S_theta = ed_theta + l_theta * e_theta
        S_psi = ed_psi + l_psi * e_psi

        # each row cancels its gyroscopic cross term from the plant model
        U2 = (p.I_x / p.l) * (k_phi * _switch(S_phi, bl) + l_phi * ed_phi
                              - (p.I_y - p.I_z) / p.I_x
                              * state.q_rate * state.r_rate)
        U3 = (p.I_y / p.l) * (k_theta * _switch(S_theta, bl)
                              + l_theta * ed_theta
                              - (p.I_z - p.I_x) / p.I_y
                              * state.p_rate * state.r_rate)
        U4 = p.I_z * (k_psi * _switch(S_psi, bl) + l_psi * ed_psi
                      - (p.I_x - p.I_y) / p.I_z
                      * state.q_rate * state.p_rate)

        u = ControlInputs(U1=cmd.U1, U2=U2, U3=U3, U4=U4)
        return ControllerOutput(u=u, cmd=cmd, saturated=saturated)
