"""
Interactive dynamics on an image-space modal basis
==================================================

A spectral volume doubles as a bank of projected vibration mode shapes: each
band is a decoupled damped harmonic oscillator whose complex modal
coordinate modulates the band's per-pixel coefficients. Poking a pixel
projects the applied force onto every mode; superposing the modulated modes
gives back a dense displacement field.

The integrator is semi-implicit (symplectic) Euler, velocity first: a plain
forward-Euler position update gains energy, while the velocity-first variant
keeps free decay monotonically dissipative at practical step sizes. It is
still a single-step, non-iterative explicit scheme.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .spectral import SpectralVolume, _frozen

DEFAULT_DAMPING = 0.05
DEFAULT_MASS = 1.0

EVENT_KINDS = ("impulse", "sustained", "release")


@dataclass(frozen=True)
class OscillatorParams:
    """Per-band oscillator constants: angular frequency, damping ratio, mass."""

    omega: np.ndarray  # rad/s per band
    zeta: float = DEFAULT_DAMPING
    mass: float = DEFAULT_MASS

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=np.float64)
        if w.ndim != 1 or w.size == 0 or np.any(w <= 0):
            raise DataError("omega must be a 1-D array of positive rates")
        if self.zeta < 0:
            raise DataError(f"damping ratio must be >= 0, got {self.zeta}")
        if self.mass <= 0:
            raise DataError(f"mass must be positive, got {self.mass}")
        object.__setattr__(self, "omega", _frozen(w))

    @classmethod
    def from_volume(
        cls, vol: SpectralVolume, zeta: float = DEFAULT_DAMPING, mass: float = DEFAULT_MASS
    ) -> "OscillatorParams":
        return cls(omega=2.0 * np.pi * vol.frequencies, zeta=zeta, mass=mass)

    @property
    def num_bands(self) -> int:
        return self.omega.shape[0]

    def stable_dt(self) -> float:
        """Hard stability bound for the explicit update."""
        return 2.0 / float(self.omega.max())


@dataclass(frozen=True)
class ModalState:
    """Complex modal coordinates and velocities plus the clock."""

    q: np.ndarray
    qdot: np.ndarray
    t: float
    dt: float

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.complex128)
        qd = np.asarray(self.qdot, dtype=np.complex128)
        if q.shape != qd.shape or q.ndim != 1:
            raise DataError("q and qdot must be 1-D and equal length")
        if not (np.all(np.isfinite(q.view(np.float64))) and np.all(np.isfinite(qd.view(np.float64)))):
            raise DataError("modal state contains non-finite values")
        if self.dt <= 0:
            raise DataError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "q", _frozen(q))
        object.__setattr__(self, "qdot", _frozen(qd))

    @property
    def num_bands(self) -> int:
        return self.q.shape[0]


def initial_state(params: OscillatorParams, dt: float) -> ModalState:
    """Zero state at t=0; rejects step sizes at or beyond the stability bound."""
    _check_dt(params, dt)
    K = params.num_bands
    return ModalState(q=np.zeros(K, dtype=complex), qdot=np.zeros(K, dtype=complex),
                      t=0.0, dt=dt)


def _check_dt(params: OscillatorParams, dt: float) -> None:
    if dt <= 0 or dt >= params.stable_dt():
        raise DataError(
            f"dt={dt} violates stability bound 2/omega_max={params.stable_dt():.6g}"
        )


@dataclass(frozen=True)
class ForceEvent:
    """A user force at a pixel: poke (impulse), hold (sustained), or release."""

    kind: str
    x: int
    y: int
    fx: float = 0.0
    fy: float = 0.0

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise DataError(f"unknown event kind {self.kind!r}")
        if not (math.isfinite(self.fx) and math.isfinite(self.fy)):
            raise DataError("force direction must be finite")


def format_event(t_ms: float, ev: ForceEvent) -> str:
    """Wire encoding shared with the streaming service: 't_ms kind x y fx fy'."""
    return f"{t_ms:.6g} {ev.kind} {ev.x} {ev.y} {ev.fx:.6g} {ev.fy:.6g}"


def parse_event(line: str) -> tuple[float, ForceEvent]:
    parts = line.split()
    if len(parts) != 6:
        raise DataError(f"malformed event record: {line!r}")
    t_ms, kind, x, y, fx, fy = parts
    return float(t_ms), ForceEvent(kind=kind, x=int(x), y=int(y),
                                   fx=float(fx), fy=float(fy))


def project_force(vol: SpectralVolume, ev: ForceEvent) -> np.ndarray:
    """Project a pixel force onto every mode.

    Band j receives conj(S_x(p)) * fx + conj(S_y(p)) * fy, the conjugate
    inner product of the mode shape at the poked pixel with the force.
    """
    if not (0 <= ev.x < vol.width and 0 <= ev.y < vol.height):
        raise DataError(f"pixel ({ev.x}, {ev.y}) outside {vol.width}x{vol.height}")
    shape = vol.data[:, ev.y, ev.x, :]  # (K, 2)
    return np.conj(shape[:, 0]) * ev.fx + np.conj(shape[:, 1]) * ev.fy


def step(
    state: ModalState, params: OscillatorParams, modal_force: np.ndarray | None = None
) -> ModalState:
    """One semi-implicit Euler step of q'' = f/m - 2*zeta*omega*q' - omega^2*q.

    Velocity is updated before position.
    """
    if state.num_bands != params.num_bands:
        raise DataError("state and params band counts differ")
    _check_dt(params, state.dt)
    f = np.zeros(params.num_bands, dtype=complex) if modal_force is None else modal_force
    w = params.omega
    qdd = f / params.mass - 2.0 * params.zeta * w * state.qdot - w**2 * state.q
    qdot = state.qdot + state.dt * qdd
    q = state.q + state.dt * qdot
    return replace(state, q=q, qdot=qdot, t=state.t + state.dt)


def apply_impulse(state: ModalState, params: OscillatorParams,
                  modal_force: np.ndarray) -> ModalState:
    """Instantaneous kick: q' += f/m, independent of the step size."""
    return replace(state, qdot=state.qdot + modal_force / params.mass)


def displacement_field(vol: SpectralVolume, state: ModalState) -> np.ndarray:
    """Superpose modulated mode shapes into one (H, W, 2) displacement map.

    F(p) = sum_j Re(S_j(p) * q_j) per axis.
    """
    if vol.num_bands != state.num_bands:
        raise DataError("volume and state band counts differ")
    modulated = vol.data * state.q[:, None, None, None]
    return np.ascontiguousarray(modulated.real.sum(axis=0))


def band_energy(state: ModalState, params: OscillatorParams) -> np.ndarray:
    """Per-band oscillator energy 0.5*m*|q'|^2 + 0.5*m*omega^2*|q|^2."""
    m = params.mass
    return 0.5 * m * np.abs(state.qdot) ** 2 + 0.5 * m * params.omega**2 * np.abs(state.q) ** 2


def substeps_for_tick(params: OscillatorParams, tick: float, safety: float = 0.1) -> int:
    """Number of integrator substeps so that dt stays well inside stability."""
    limit = safety * params.stable_dt()
    return max(1, int(math.ceil(tick / limit)))


class SessionLoop:
    """One interactive simulation session: a modal state advanced at a fixed
    output frame rate, with events applied at tick boundaries.

    Impulses kick the modal velocity once; a sustained event installs a
    continuous drive (the latest one wins) that persists until a release.
    The loop is the sole mutator of its state.
    """

    def __init__(
        self,
        vol: SpectralVolume,
        params: OscillatorParams,
        output_fps: float = 25.0,
        force_scale: float = 1.0,
    ):
        if vol.num_bands != params.num_bands:
            raise DataError("volume and params band counts differ")
        if output_fps <= 0:
            raise DataError("output_fps must be positive")
        self.vol = vol
        self.params = params
        self.force_scale = force_scale
        self.tick_interval = 1.0 / output_fps
        self._n_sub = substeps_for_tick(params, self.tick_interval)
        self.state = initial_state(params, self.tick_interval / self._n_sub)
        self._drive = None
        self.tick_index = 0

    def apply(self, ev: ForceEvent) -> None:
        if ev.kind == "impulse":
            self.state = apply_impulse(
                self.state, self.params, self.force_scale * project_force(self.vol, ev)
            )
        elif ev.kind == "sustained":
            self._drive = self.force_scale * project_force(self.vol, ev)
        else:  # release
            self._drive = None

    def tick(self) -> np.ndarray:
        """Advance one frame interval and return the displacement field."""
        for _ in range(self._n_sub):
            self.state = step(self.state, self.params, self._drive)
        self.tick_index += 1
        return displacement_field(self.vol, self.state)

    def energies(self) -> np.ndarray:
        return band_energy(self.state, self.params)


def simulate(
    vol: SpectralVolume,
    params: OscillatorParams,
    schedule: list[tuple[float, ForceEvent]],
    duration: float,
    output_fps: float = 25.0,
    force_scale: float = 1.0,
) -> list[np.ndarray]:
    """Run a headless interactive session and return displacement fields,
    one per output frame interval; scheduled events fire at tick starts."""
    if any(t < 0 or t > duration for t, _ in schedule):
        raise DataError("schedule times must lie within the duration")
    loop = SessionLoop(vol, params, output_fps, force_scale)
    pending = sorted(schedule, key=lambda item: item[0])
    fields = []
    n_frames = int(round(duration * output_fps))
    for frame in range(n_frames):
        tick_start = frame * loop.tick_interval
        while pending and pending[0][0] <= tick_start + 1e-12:
            loop.apply(pending.pop(0)[1])
        fields.append(loop.tick())
    return fields
