"""Three-level Lambda system with a loss sink: Hamiltonian, Lindblad generator
and propagation under piecewise controls.

Basis order is (g, e, r, s); superoperators act on column-major (Fortran
order) vectorized density matrices, so ``vec(A X B) = kron(B.T, A) @ vec(X)``.
Units: hbar = 1, rates in 1/time.

Two propagation routes are provided. ``evolve`` exponentiates the full 16x16
Liouvillian per segment and accepts any density matrix. For a pure initial
state the only jump (e -> s) feeds an isolated level, so the (g, e, r) block
stays rank one and evolves under the non-Hermitian ``H - i gamma/2 |e><e|``;
``evolve_amplitudes`` uses that 3x3 form and is what the optimizers call in
their inner loops.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import NumericalError

G, E, R, S = 0, 1, 2, 3
BASIS = ("g", "e", "r", "s")
DIM = 4

KINDS = ("piecewise-constant", "piecewise-linear", "analytic")
DEFAULT_SUBSTEPS = 10
DEFAULT_SCHEME = "cf4"
_GAUSS_1 = 0.5 - np.sqrt(3.0) / 6.0
_GAUSS_2 = 0.5 + np.sqrt(3.0) / 6.0
_CF_A = 0.25 - np.sqrt(3.0) / 6.0
_CF_B = 0.25 + np.sqrt(3.0) / 6.0


@dataclass(frozen=True)
class SystemParams:
    """Physical configuration of one transfer problem."""

    delta_p: float = 0.0
    delta_3: float = 0.0
    gamma: float = 0.0
    t_final: float = 1.0
    omega_max: float = 1.0

    def __post_init__(self):
        for name in ("delta_p", "delta_3", "gamma", "t_final", "omega_max"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.t_final <= 0:
            raise ValueError(f"t_final must be > 0, got {self.t_final}")
        if self.omega_max <= 0:
            raise ValueError(f"omega_max must be > 0, got {self.omega_max}")

    @classmethod
    def dimensionless(cls, t_gamma, t_omega_max, delta_p=0.0, t_final=1.0):
        """Build from the products (T gamma, T Omega_max) at horizon ``t_final``."""
        return cls(
            delta_p=delta_p,
            gamma=t_gamma / t_final,
            t_final=t_final,
            omega_max=t_omega_max / t_final,
        )

    @property
    def t_gamma(self):
        return self.gamma * self.t_final

    @property
    def t_omega_max(self):
        return self.omega_max * self.t_final

    def rescaled(self, alpha):
        """Equivalent system with time stretched by ``alpha`` and rates shrunk."""
        if alpha <= 0:
            raise ValueError(f"scale factor must be > 0, got {alpha}")
        return SystemParams(
            delta_p=self.delta_p / alpha,
            delta_3=self.delta_3 / alpha,
            gamma=self.gamma / alpha,
            t_final=self.t_final * alpha,
            omega_max=self.omega_max / alpha,
        )


@dataclass(frozen=True, eq=False)
class PulseSchedule:
    """Pump and Stokes envelopes on a uniform grid over ``[0, horizon]``.

    piecewise-constant: ``values_*`` hold one amplitude per segment.
    piecewise-linear: ``values_*`` hold ``n_segments + 1`` knots.
    analytic: ``funcs`` holds two callables of time; ``n_segments`` sets the
    output grid of ``evolve``.
    """

    kind: str
    n_segments: int
    horizon: float
    values_p: np.ndarray | None = None
    values_s: np.ndarray | None = None
    funcs: tuple[Callable, Callable] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.n_segments < 1:
            raise ValueError("n_segments must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if self.kind == "analytic":
            if self.funcs is None or len(self.funcs) != 2:
                raise ValueError("analytic schedule needs (omega_p, omega_s) callables")
            return
        n_values = self.n_segments + (self.kind == "piecewise-linear")
        for name in ("values_p", "values_s"):
            values = np.asarray(getattr(self, name), dtype=float)
            if values.shape != (n_values,):
                raise ValueError(f"{name} must have shape ({n_values},), got {values.shape}")
            if not np.all(np.isfinite(values)):
                raise ValueError(f"{name} contains non-finite entries")
            values = values.copy()
            values.flags.writeable = False
            object.__setattr__(self, name, values)

    def __eq__(self, other):
        if not isinstance(other, PulseSchedule):
            return NotImplemented
        if self.kind == "analytic" or other.kind == "analytic":
            return self is other
        return (
            (self.kind, self.n_segments, self.horizon) == (other.kind, other.n_segments, other.horizon)
            and np.array_equal(self.values_p, other.values_p)
            and np.array_equal(self.values_s, other.values_s)
        )

    __hash__ = None

    @classmethod
    def constant(cls, values_p, values_s, horizon):
        values_p = np.asarray(values_p, dtype=float)
        return cls("piecewise-constant", len(values_p), horizon, values_p, values_s)

    @classmethod
    def linear(cls, knots_p, knots_s, horizon):
        knots_p = np.asarray(knots_p, dtype=float)
        return cls("piecewise-linear", len(knots_p) - 1, horizon, knots_p, knots_s)

    @classmethod
    def analytic(cls, omega_p, omega_s, horizon, n_segments):
        return cls("analytic", n_segments, horizon, funcs=(omega_p, omega_s))

    @property
    def dt(self):
        return self.horizon / self.n_segments

    @property
    def times(self):
        """Segment boundaries t_0 = 0, ..., t_N = horizon."""
        return np.linspace(0.0, self.horizon, self.n_segments + 1)

    def amplitudes(self, t):
        """(Omega_p(t), Omega_s(t)); segments are closed on the left."""
        t = np.asarray(t, dtype=float)
        if self.kind == "analytic":
            fp, fs = self.funcs
            return np.asarray(fp(t), dtype=float), np.asarray(fs(t), dtype=float)
        if self.kind == "piecewise-constant":
            idx = np.clip(np.floor(t / self.dt).astype(int), 0, self.n_segments - 1)
            return self.values_p[idx], self.values_s[idx]
        grid = self.times
        return np.interp(t, grid, self.values_p), np.interp(t, grid, self.values_s)

    def segment_controls(self, substeps=DEFAULT_SUBSTEPS, scheme=DEFAULT_SCHEME):
        """Held-constant controls, shape (n_segments, M) each, applied left to
        right for dt / M apiece.

        Piecewise-constant schedules are exact with M = 1. Otherwise each
        segment is cut into ``substeps`` pieces, each represented by one
        midpoint sample ("midpoint", second order) or by two half-length
        factors with effective controls built from the 2-point Gauss nodes
        ("cf4", fourth-order commutator-free Magnus; valid because the
        generator is affine in the controls).
        """
        if self.kind == "piecewise-constant":
            return self.values_p[:, None], self.values_s[:, None]
        if substeps < 1:
            raise ValueError("substeps must be >= 1")
        start = np.arange(self.n_segments)[:, None] + np.arange(substeps)[None, :] / substeps
        h = 1.0 / substeps

        def sample(offset):
            t = (start + offset * h) * self.dt
            return tuple(np.broadcast_to(x, t.shape) for x in self.amplitudes(t))

        if scheme == "midpoint":
            return sample(0.5)
        if scheme != "cf4":
            raise ValueError(f"unknown scheme {scheme!r}")
        p1, s1 = sample(_GAUSS_1)
        p2, s2 = sample(_GAUSS_2)
        # the factor leaning on the earlier node acts first
        omega_p = np.stack([2 * (_CF_B * p1 + _CF_A * p2), 2 * (_CF_A * p1 + _CF_B * p2)], axis=-1)
        omega_s = np.stack([2 * (_CF_B * s1 + _CF_A * s2), 2 * (_CF_A * s1 + _CF_B * s2)], axis=-1)
        return omega_p.reshape(self.n_segments, -1), omega_s.reshape(self.n_segments, -1)

    def rescaled(self, alpha):
        """Time-stretched by ``alpha`` with amplitudes divided by ``alpha``."""
        if alpha <= 0:
            raise ValueError(f"scale factor must be > 0, got {alpha}")
        if self.kind == "analytic":
            fp, fs = self.funcs
            return PulseSchedule.analytic(
                lambda t: np.asarray(fp(np.asarray(t) / alpha)) / alpha,
                lambda t: np.asarray(fs(np.asarray(t) / alpha)) / alpha,
                self.horizon * alpha,
                self.n_segments,
            )
        return PulseSchedule(
            self.kind, self.n_segments, self.horizon * alpha,
            self.values_p / alpha, self.values_s / alpha,
        )

    def reversed(self):
        """Time-reversed copy (pump and Stokes keep their roles)."""
        if self.kind == "analytic":
            fp, fs = self.funcs
            T = self.horizon
            return PulseSchedule.analytic(
                lambda t: fp(T - np.asarray(t)), lambda t: fs(T - np.asarray(t)),
                T, self.n_segments,
            )
        return PulseSchedule(
            self.kind, self.n_segments, self.horizon,
            self.values_p[::-1], self.values_s[::-1],
        )

    def to_dict(self):
        if self.kind == "analytic":
            raise ValueError("analytic schedules hold callables; sample them before serializing")
        return {
            "kind": self.kind,
            "n_segments": int(self.n_segments),
            "horizon": float(self.horizon),
            "values_p": [float(v) for v in self.values_p],
            "values_s": [float(v) for v in self.values_s],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            data["kind"], int(data["n_segments"]), float(data["horizon"]),
            np.asarray(data["values_p"], dtype=float), np.asarray(data["values_s"], dtype=float),
        )


def zero_schedule(params, n_segments):
    zeros = np.zeros(n_segments)
    return PulseSchedule.constant(zeros, zeros, params.t_final)


# -- states ------------------------------------------------------------------

def projector(level):
    """|x><x| for a basis label ('g', 'e', 'r', 's') or index."""
    idx = BASIS.index(level) if isinstance(level, str) else int(level)
    rho = np.zeros((DIM, DIM), dtype=complex)
    rho[idx, idx] = 1.0
    return rho


def ket_to_density(psi):
    """Embed (g, e, r) amplitudes; the norm deficit becomes sink population."""
    psi = np.asarray(psi, dtype=complex)
    rho = np.zeros(psi.shape[:-1] + (DIM, DIM), dtype=complex)
    rho[..., :3, :3] = psi[..., :, None] * psi[..., None, :].conj()
    rho[..., S, S] = 1.0 - np.sum(np.abs(psi) ** 2, axis=-1)
    return rho


def check_density_matrix(rho, trace_tol=1e-9, herm_tol=1e-12, psd_tol=1e-9):
    """Raise NumericalError unless ``rho`` is a valid 4x4 density matrix."""
    rho = np.asarray(rho)
    if rho.shape != (DIM, DIM):
        raise NumericalError(f"density matrix must be {DIM}x{DIM}, got {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise NumericalError("density matrix has non-finite entries")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise NumericalError(f"density matrix not Hermitian (deviation {herm:.3e})")
    trace_err = abs(np.trace(rho) - 1.0)
    if trace_err > trace_tol:
        raise NumericalError(f"trace deviates from 1 by {trace_err:.3e}")
    lowest = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lowest < -psd_tol:
        raise NumericalError(f"density matrix not positive (eigenvalue {lowest:.3e})")


# -- generators --------------------------------------------------------------

def build_hamiltonian(params, omega_p, omega_s):
    """4x4 rotating-frame Hamiltonian; the sink row and column are zero."""
    h = np.zeros((DIM, DIM), dtype=complex)
    h[E, E] = params.delta_p
    h[R, R] = params.delta_3
    h[G, E] = h[E, G] = 0.5 * omega_p
    h[E, R] = h[R, E] = 0.5 * omega_s
    return h


def build_dissipator(gamma):
    """Superoperator of the e -> s decay with jump operator sqrt(gamma)|s><e|."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    jump = np.zeros((DIM, DIM))
    jump[S, E] = 1.0
    loss = jump.T @ jump
    eye = np.eye(DIM)
    sup = np.kron(jump.conj(), jump) - 0.5 * (np.kron(eye, loss) + np.kron(loss.T, eye))
    return gamma * sup.astype(complex)


def assemble_liouvillian(params, omega_p, omega_s):
    """16x16 generator L with vec(drho/dt) = L vec(rho) for constant controls."""
    h = build_hamiltonian(params, omega_p, omega_s)
    eye = np.eye(DIM)
    coherent = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    return coherent + build_dissipator(params.gamma)


def vec(rho):
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v):
    return np.asarray(v).reshape(DIM, DIM, order="F")


def propagate_segment(state, generator, dt):
    """Exact propagation of one constant-control segment: vec(rho') = e^{L dt} vec(rho)."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    with np.errstate(over="ignore", invalid="ignore"):
        prop = expm(np.asarray(generator) * dt)
    if not np.all(np.isfinite(prop)):
        raise NumericalError("matrix exponential overflowed")
    return unvec(prop @ vec(state))


def _segment_propagators(params, omega_p, omega_s, dt):
    """Batched e^{L dt} for flat arrays of controls, shape (n, 16, 16)."""
    omega_p = np.ravel(omega_p)
    omega_s = np.ravel(omega_s)
    eye = np.eye(DIM)
    dissipator = build_dissipator(params.gamma)
    gens = np.empty((len(omega_p), DIM * DIM, DIM * DIM), dtype=complex)
    for k, (wp, ws) in enumerate(zip(omega_p, omega_s)):
        h = build_hamiltonian(params, wp, ws)
        gens[k] = -1j * (np.kron(eye, h) - np.kron(h.T, eye)) + dissipator
    props = expm(gens * dt)
    if not np.all(np.isfinite(props)):
        raise NumericalError("matrix exponential overflowed")
    return props


def _check_horizon(schedule, params):
    if not np.isclose(schedule.horizon, params.t_final, rtol=1e-12, atol=0.0):
        raise ValueError(
            f"schedule horizon {schedule.horizon} does not match t_final {params.t_final}"
        )


def evolve(initial, schedule, params, substeps=DEFAULT_SUBSTEPS, scheme=DEFAULT_SCHEME):
    """Density matrices at the N+1 segment boundaries, shape (N+1, 4, 4)."""
    _check_horizon(schedule, params)
    omega_p, omega_s = schedule.segment_controls(substeps, scheme)
    n_seg, k_sub = omega_p.shape
    props = _segment_propagators(params, omega_p, omega_s, schedule.dt / k_sub)
    props = props.reshape(n_seg, k_sub, DIM * DIM, DIM * DIM)
    out = np.empty((n_seg + 1, DIM, DIM), dtype=complex)
    v = vec(np.asarray(initial, dtype=complex))
    out[0] = unvec(v)
    for j in range(n_seg):
        for k in range(k_sub):
            v = props[j, k] @ v
        out[j + 1] = unvec(v)
    return out


def fidelity(final):
    """Target population rho_rr."""
    value = np.asarray(final)[R, R]
    if abs(value.imag) > 1e-8:
        raise NumericalError(f"rho_rr has imaginary part {value.imag:.3e}")
    return float(min(1.0, max(0.0, value.real)))


# -- pure-state fast path ----------------------------------------------------

def effective_hamiltonian(params, omega_p, omega_s):
    """Non-Hermitian (g, e, r) block H - i gamma/2 |e><e|, broadcast over controls."""
    omega_p, omega_s = np.broadcast_arrays(np.asarray(omega_p, float), np.asarray(omega_s, float))
    h = np.zeros(omega_p.shape + (3, 3), dtype=complex)
    h[..., E, E] = params.delta_p - 0.5j * params.gamma
    h[..., R, R] = params.delta_3
    h[..., G, E] = h[..., E, G] = 0.5 * omega_p
    h[..., E, R] = h[..., R, E] = 0.5 * omega_s
    return h


def amplitude_propagators(params, omega_p, omega_s, dt):
    """exp(-i H_eff dt) for every control pair, shape (..., 3, 3)."""
    props = expm(-1j * dt * effective_hamiltonian(params, omega_p, omega_s))
    if not np.all(np.isfinite(props)):
        raise NumericalError("matrix exponential overflowed")
    return props


def evolve_amplitudes(psi0, schedule, params, substeps=DEFAULT_SUBSTEPS, scheme=DEFAULT_SCHEME):
    """Pure-state analogue of ``evolve``: (g, e, r) amplitudes, shape (N+1, 3)."""
    _check_horizon(schedule, params)
    omega_p, omega_s = schedule.segment_controls(substeps, scheme)
    n_seg, k_sub = omega_p.shape
    props = amplitude_propagators(params, omega_p, omega_s, schedule.dt / k_sub)
    out = np.empty((n_seg + 1, 3), dtype=complex)
    psi = np.asarray(psi0, dtype=complex)
    out[0] = psi
    for j in range(n_seg):
        for k in range(k_sub):
            psi = props[j, k] @ psi
        out[j + 1] = psi
    return out


GROUND_AMPLITUDES = np.array([1.0, 0.0, 0.0], dtype=complex)


def transfer_fidelity(schedule, params, substeps=DEFAULT_SUBSTEPS, scheme=DEFAULT_SCHEME):
    """Fidelity of g -> r under ``schedule`` via the pure-state route."""
    psi = evolve_amplitudes(GROUND_AMPLITUDES, schedule, params, substeps, scheme)[-1]
    return float(min(1.0, abs(psi[R]) ** 2))


# -- serialization -----------------------------------------------------------

def density_to_json(rho):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(rho)]


def density_from_json(data):
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def trajectory_to_json(traj: Sequence[np.ndarray]):
    return [density_to_json(rho) for rho in traj]


def trajectory_from_json(data):
    return np.array([density_from_json(rho) for rho in data])
