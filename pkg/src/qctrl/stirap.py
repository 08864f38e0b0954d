"""Reference STIRAP pulses, the instantaneous eigensystem and adiabaticity checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import PulseSchedule, build_hamiltonian
from .errors import DegenerateInputError


@dataclass(frozen=True)
class StirapShape:
    """Gaussian pump/Stokes pair.

    The pump peaks at ``center + tau`` and the Stokes pulse (scaled by
    ``alpha_scale``) at ``center - tau``; ``width`` is the 1/e half-width.
    ``center`` defaults to the middle of the protocol.
    """

    omega_peak: float
    tau: float
    width: float
    alpha_scale: float = 1.0
    center: float | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"counter-intuitive order needs tau > 0, got {self.tau}")
        if not self.width > 0:
            raise ValueError(f"width must be > 0, got {self.width}")
        if self.omega_peak < 0:
            raise ValueError(f"omega_peak must be >= 0, got {self.omega_peak}")

    @classmethod
    def default(cls, params, tau_frac=0.1, width_frac=1 / 6):
        """Pulses at the amplitude bound with tau = T/10, width = T/6."""
        T = params.t_final
        return cls(omega_peak=params.omega_max, tau=tau_frac * T, width=width_frac * T)

    def envelopes(self, t_final):
        center = 0.5 * t_final if self.center is None else self.center

        def omega_p(t):
            return self.omega_peak * np.exp(-(((np.asarray(t) - center - self.tau) / self.width) ** 2))

        def omega_s(t):
            x = (np.asarray(t) - center + self.tau) / self.width
            return self.alpha_scale * self.omega_peak * np.exp(-(x ** 2))

        return omega_p, omega_s


@dataclass(frozen=True)
class MixingAngles:
    theta: float
    phi: float
    omega_0: float


@dataclass(frozen=True)
class Eigensystem:
    """Eigenpairs of the (g, e, r) Hamiltonian at zero two-photon detuning."""

    lambda_0: float
    lambda_minus: float
    lambda_plus: float
    a_0: np.ndarray
    a_minus: np.ndarray
    a_plus: np.ndarray

    @property
    def values(self):
        return np.array([self.lambda_minus, self.lambda_0, self.lambda_plus])

    @property
    def vectors(self):
        """Columns ordered as ``values``."""
        return np.column_stack([self.a_minus, self.a_0, self.a_plus])


def _check_shape(shape, params):
    if shape.omega_peak * max(1.0, shape.alpha_scale) > params.omega_max * (1 + 1e-12):
        raise ValueError("pulse peak exceeds omega_max")


def gaussian_envelopes(shape, params, n_segments=100):
    """Closed-form (analytic) schedule of the Gaussian pair."""
    _check_shape(shape, params)
    omega_p, omega_s = shape.envelopes(params.t_final)
    return PulseSchedule.analytic(omega_p, omega_s, params.t_final, n_segments)


def gaussian_schedule(shape, params, n_segments):
    """Piecewise-constant Gaussian pair sampled at segment midpoints."""
    if n_segments < 2:
        raise ValueError("n_segments must be >= 2")
    _check_shape(shape, params)
    omega_p, omega_s = shape.envelopes(params.t_final)
    dt = params.t_final / n_segments
    mid = (np.arange(n_segments) + 0.5) * dt
    return PulseSchedule.constant(omega_p(mid), omega_s(mid), params.t_final)


def _tan_phi_denominator(delta_p, omega_0):
    # delta + sqrt(delta^2 + omega_0^2) without cancellation for delta < 0
    root = np.hypot(delta_p, omega_0)
    if delta_p >= 0:
        return delta_p + root
    return omega_0 ** 2 / (root - delta_p)


def mixing_angles(omega_p, omega_s, delta_p=0.0):
    omega_0 = float(np.hypot(omega_p, omega_s))
    if omega_0 == 0.0:
        raise DegenerateInputError("mixing angles undefined when both pulses vanish")
    theta = float(np.arctan2(omega_p, omega_s))
    phi = float(np.arctan2(omega_0, _tan_phi_denominator(delta_p, omega_0)))
    return MixingAngles(theta=theta, phi=phi, omega_0=omega_0)


def eigensystem(omega_p, omega_s, delta_p=0.0):
    """Closed-form eigenvalues and eigenvectors over (g, e, r)."""
    ang = mixing_angles(omega_p, omega_s, delta_p)
    st, ct = np.sin(ang.theta), np.cos(ang.theta)
    sp, cp = np.sin(ang.phi), np.cos(ang.phi)
    half = 0.5 * ang.omega_0
    return Eigensystem(
        lambda_0=0.0,
        lambda_minus=-half * np.tan(ang.phi),
        lambda_plus=half / np.tan(ang.phi),
        a_0=np.array([ct, 0.0, -st]),
        a_minus=np.array([st * cp, -sp, ct * cp]),
        a_plus=np.array([st * sp, cp, ct * sp]),
    )


def hamiltonian_block(params, omega_p, omega_s):
    """Real (g, e, r) block of the Hamiltonian."""
    return build_hamiltonian(params, omega_p, omega_s)[:3, :3].real


def local_adiabaticity_margin(schedule, params, t, step=None):
    """Smallest ratio of the two gap terms to |dtheta/dt| at time ``t``.

    A value above one means the local condition holds at ``t``; ``inf`` is
    returned where theta is stationary.
    """
    h = params.t_final * 1e-4 if step is None else step
    wp, ws = (float(x) for x in schedule.amplitudes(t))
    omega_0 = np.hypot(wp, ws)
    if omega_0 == 0.0:
        raise DegenerateInputError(f"both pulses vanish at t={t}")
    pp, sp = schedule.amplitudes(t + h)
    pm, sm = schedule.amplitudes(t - h)
    theta_dot = (np.arctan2(pp, sp) - np.arctan2(pm, sm)) / (2 * h)
    if theta_dot == 0.0:
        return np.inf
    root = np.hypot(params.delta_p, omega_0)
    gaps = 0.5 * np.abs(np.array([params.delta_p + root, params.delta_p - root]))
    return float(gaps.min() / abs(theta_dot))


def min_margin(schedule, params, t_lo=None, t_hi=None, n_points=201):
    """Minimum local margin over a uniform grid (default: the overlap window)."""
    T = params.t_final
    t_lo = 0.25 * T if t_lo is None else t_lo
    t_hi = 0.75 * T if t_hi is None else t_hi
    return min(
        local_adiabaticity_margin(schedule, params, t)
        for t in np.linspace(t_lo, t_hi, n_points)
    )


def global_adiabaticity_product(shape):
    """Pulse area proxy Omega_max * tau."""
    return shape.omega_peak * shape.tau


def theta_profile(schedule, t):
    wp, ws = schedule.amplitudes(t)
    return np.arctan2(wp, ws)


def amplitude_weighted_times(schedule, n_points=2000):
    """Amplitude-weighted mean times (t_pump, t_stokes).

    Piecewise-constant schedules weight segment midpoints by their values;
    other kinds are sampled on a uniform midpoint grid.
    """
    if schedule.kind == "piecewise-constant":
        t = (np.arange(schedule.n_segments) + 0.5) * schedule.dt
        wp, ws = schedule.values_p, schedule.values_s
    else:
        t = (np.arange(n_points) + 0.5) * schedule.horizon / n_points
        wp, ws = schedule.amplitudes(t)
    wp = np.abs(wp)
    ws = np.abs(ws)
    if wp.sum() == 0 or ws.sum() == 0:
        raise DegenerateInputError("a pulse is identically zero")
    return float(np.dot(wp, t) / wp.sum()), float(np.dot(ws, t) / ws.sum())


def is_counterintuitive(schedule):
    """Stokes weight arrives before pump weight."""
    t_pump, t_stokes = amplitude_weighted_times(schedule)
    return t_stokes < t_pump
