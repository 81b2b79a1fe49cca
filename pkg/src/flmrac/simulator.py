"""Closed-loop simulation of the adaptive architecture.

One run integrates the stacked state [x; x_r; x_ri; e_L; vec(W_hat)] with
fixed-step RK4: the true plant (driven by the hidden uncertainty), the
modified and ideal reference systems, the low-pass error filter and the
weight update law, all coupled through the measured state.  Measurement
noise, when enabled, perturbs only what the controller sees (the basis, the
control and the error feeding the update law); the plant always integrates
truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import controllers, plantmodel, refsys
from .controllers import ControllerConfig
from .matrixcore import DimensionError, is_hurwitz
from .plantmodel import PlantModel, augment

# Abort threshold for the stacked-state infinity norm.
DIVERGENCE_LIMIT = 1e9


class DivergenceError(RuntimeError):
    """The integration produced a non-finite or unbounded state."""


@dataclass(frozen=True)
class CommandSpec:
    """Scalar command waveform, broadcast over the n_c command channels.

    kinds: "zero"; "step" (amplitude for t >= 0, plus offset); "square_wave"
    (offset + amplitude * sign(sin(2 pi t / period))); "custom"
    (zero-order-hold lookup in the given sample arrays).
    """

    kind: str = "zero"
    amplitude: float = 0.0
    period: float = 0.0
    offset: float = 0.0
    times: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("zero", "step", "square_wave", "custom"):
            raise ValueError(f"unknown command kind {self.kind!r}")
        if self.kind == "square_wave" and self.period <= 0:
            raise ValueError("square_wave command needs period > 0")
        if self.kind == "custom":
            if len(self.times) != len(self.values) or not self.times:
                raise ValueError("custom command needs matching, nonempty samples")
            object.__setattr__(self, "times", tuple(float(t) for t in self.times))
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def value(self, t: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "step":
            return self.offset + (self.amplitude if t >= 0.0 else 0.0)
        if self.kind == "square_wave":
            return self.offset + self.amplitude * float(np.sign(math.sin(2.0 * math.pi * t / self.period)))
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.values[max(idx, 0)]


def command(spec: CommandSpec, t: float, n_c: int = 1) -> np.ndarray:
    """Command vector c(t) for n_c channels (empty for n_c = 0)."""
    return np.full(n_c, spec.value(t), dtype=float)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian measurement noise on the augmented state.

    std is per-component (length n); sampling starts at start_time and is a
    pure function of (seed, step index), so a shared seed gives different
    controllers an identical noise stream.
    """

    enabled: bool = False
    std: tuple[float, ...] = ()
    start_time: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "std", tuple(float(s) for s in self.std))
        if any(s < 0 for s in self.std):
            raise ValueError("noise std entries must be nonnegative")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one reproducible run needs."""

    plant: PlantModel
    E_p: np.ndarray
    controller: ControllerConfig
    command: CommandSpec
    noise: NoiseSpec
    t_final: float
    h: float
    record_stride: int = 1
    x0: np.ndarray | None = None
    x_r0: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("step size h must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be nonnegative")
        if self.t_final > 0 and self.t_final < self.h:
            raise ValueError("t_final must be at least one step h")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")


@dataclass
class Trajectory:
    """Time-indexed record of one run.

    Per sample: true state x, modified reference x_r, ideal reference x_ri,
    system error e = x - x_r, filtered error e_L, high-frequency error
    e_H = e - e_L, applied control u (computed from the measured state), the
    weight estimate and the command.
    """

    t: np.ndarray
    x: np.ndarray
    x_r: np.ndarray
    x_ri: np.ndarray
    e: np.ndarray
    e_L: np.ndarray
    e_H: np.ndarray
    u: np.ndarray
    W_hat: np.ndarray  # (N, s+n, m)
    c: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.t.size


class ClosedLoopSystem:
    """Vector field of the coupled closed loop over the stacked state.

    Layout of the stacked state y: [x (n); x_r (n); x_ri (n); e_L (n);
    vec(W_hat) ((s+n)*m, row-major)].
    """

    def __init__(self, scenario: ScenarioConfig):
        plant = scenario.plant
        aug = augment(plant, scenario.E_p)
        cfg = scenario.controller
        n, m, n_p = aug.n, aug.m, aug.n_p
        if cfg.K.shape != (m, n):
            raise DimensionError(f"K is {cfg.K.shape}, expected ({m}, {n})")
        A_r = aug.A - aug.B @ cfg.K
        if not is_hurwitz(A_r):
            raise ValueError("A - B K is not Hurwitz; fix the nominal gain K")
        if cfg.lyap.P.shape != (n, n):
            raise DimensionError(f"Lyapunov P is {cfg.lyap.P.shape}, expected ({n}, {n})")
        if cfg.lyap.residual(A_r) > 1e-8 * max(1.0, float(np.linalg.norm(cfg.lyap.R))):
            raise ValueError("Lyapunov pair does not solve this closed loop's equation")

        self.scenario = scenario
        self.plant = plant
        self.aug = aug
        self.A_r = A_r
        self.K = cfg.K
        self.PB = cfg.lyap.P @ aug.B
        self.gamma = cfg.gamma
        self.kappa = cfg.kappa
        self.eta = cfg.eta
        self.projection = cfg.projection
        self.Lam = plant.Lambda
        self.n, self.m, self.n_p, self.n_c = n, m, n_p, aug.n_c
        self.s = plant.basis.dim
        self.basis = plant.basis
        self.truth = plant.truth
        self.command_spec = scenario.command

        w_len = (self.s + n) * m
        self.state_dim = 4 * n + w_len
        self.sl_x = slice(0, n)
        self.sl_xr = slice(n, 2 * n)
        self.sl_xri = slice(2 * n, 3 * n)
        self.sl_eL = slice(3 * n, 4 * n)
        self.sl_W = slice(4 * n, 4 * n + w_len)
        self.block_names = ("x", "x_r", "x_ri", "e_L", "W_hat")
        self.blocks = (self.sl_x, self.sl_xr, self.sl_xri, self.sl_eL, self.sl_W)

        std = np.asarray(scenario.noise.std, dtype=float)
        if scenario.noise.enabled and std.shape != (n,):
            raise DimensionError(f"noise std must have length {n}, got {std.shape}")
        self.noise_std = std if scenario.noise.enabled else np.zeros(n)

    def initial_state(self) -> np.ndarray:
        n = self.n
        x0 = np.zeros(n) if self.scenario.x0 is None else np.asarray(self.scenario.x0, dtype=float)
        if x0.shape != (n,):
            raise DimensionError(f"x0 must have length {n}")
        xr0 = x0 if self.scenario.x_r0 is None else np.asarray(self.scenario.x_r0, dtype=float)
        if xr0.shape != (n,):
            raise DimensionError(f"x_r0 must have length {n}")
        ref = refsys.ReferenceState.initial(xr0)
        W0 = self.scenario.controller.initial_estimate(self.s + n, self.m)
        y = np.empty(self.state_dim)
        y[self.sl_x] = x0
        y[self.sl_xr] = ref.x_r
        y[self.sl_xri] = ref.x_ri
        y[self.sl_eL] = ref.e_L
        y[self.sl_W] = W0.ravel()
        return y

    def deriv(self, t: float, y: np.ndarray, noise: np.ndarray) -> np.ndarray:
        n, m = self.n, self.m
        x = y[self.sl_x]
        x_r = y[self.sl_xr]
        x_ri = y[self.sl_xri]
        e_L = y[self.sl_eL]
        W_hat = y[self.sl_W].reshape(self.s + n, m)

        x_m = x + noise
        sigma_m = plantmodel.eval_basis(self.basis, t, x_m[: self.n_p], x_m)
        u = -(self.K @ x_m) - W_hat.T @ sigma_m
        c = command(self.command_spec, t, self.n_c)

        # Plant integrates truth: uncertainty evaluated at the true state.
        delta = self.truth.W_p(t).T @ self.basis.eval_plant(t, x[: self.n_p])
        x_dot = self.aug.A @ x + self.aug.B @ (self.Lam * u + delta) + self.aug.B_r @ c

        e_m = x_m - x_r
        eH_m = e_m - e_L
        xr_dot = self.A_r @ x_r + self.aug.B_r @ c + self.kappa * eH_m
        xri_dot = self.A_r @ x_ri + self.aug.B_r @ c
        eL_dot = self.A_r @ e_L + self.eta * eH_m

        Y = np.outer(sigma_m, e_m @ self.PB)
        if self.projection is not None:
            W_dot = self.gamma * controllers.proj_matrix(W_hat, Y, self.projection)
        else:
            W_dot = self.gamma * Y

        out = np.empty_like(y)
        out[self.sl_x] = x_dot
        out[self.sl_xr] = xr_dot
        out[self.sl_xri] = xri_dot
        out[self.sl_eL] = eL_dot
        out[self.sl_W] = W_dot.ravel()
        return out

    def control_at(self, t: float, y: np.ndarray, noise: np.ndarray) -> np.ndarray:
        """Applied control at a sample instant, from the measured state."""
        x_m = y[self.sl_x] + noise
        sigma_m = plantmodel.eval_basis(self.basis, t, x_m[: self.n_p], x_m)
        W_hat = y[self.sl_W].reshape(self.s + self.n, self.m)
        return -(self.K @ x_m) - W_hat.T @ sigma_m

    def diagnose_nonfinite(self, y: np.ndarray) -> str:
        for name, sl in zip(self.block_names, self.blocks):
            if not np.all(np.isfinite(y[sl])):
                return name
        return "state"


def assemble(scenario: ScenarioConfig) -> ClosedLoopSystem:
    """Validate the scenario and build its closed-loop vector field."""
    return ClosedLoopSystem(scenario)


def rk4_step(f, state: np.ndarray, t: float, h: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step of y' = f(t, y)."""
    k1 = f(t, state)
    k2 = f(t + 0.5 * h, state + (0.5 * h) * k1)
    k3 = f(t + 0.5 * h, state + (0.5 * h) * k2)
    k4 = f(t + h, state + h * k3)
    out = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise DivergenceError(f"non-finite derivative while stepping at t={t:.6g}")
    return out


def run(scenario: ScenarioConfig) -> Trajectory:
    """Integrate the scenario and record every record_stride-th step.

    The sample at t_final is always included.  Noise is drawn once per step
    (zero-order hold across the RK4 substeps) from a generator seeded by the
    scenario, so identical seeds give bit-identical trajectories.
    """
    sys = assemble(scenario)
    h = scenario.h
    n_steps = int(round(scenario.t_final / h)) if scenario.t_final > 0 else 0
    stride = scenario.record_stride

    rng = np.random.default_rng(scenario.noise.seed)
    noise_on = scenario.noise.enabled and np.any(sys.noise_std > 0)
    zero_noise = np.zeros(sys.n)

    def draw_noise(t: float) -> np.ndarray:
        if noise_on and t >= scenario.noise.start_time:
            return rng.standard_normal(sys.n) * sys.noise_std
        return zero_noise

    y = sys.initial_state()
    rec_t, rec_y, rec_u, rec_c = [], [], [], []

    def record(t: float, y: np.ndarray, noise: np.ndarray) -> None:
        rec_t.append(t)
        rec_y.append(y.copy())
        rec_u.append(sys.control_at(t, y, noise))
        rec_c.append(command(sys.command_spec, t, sys.n_c))

    for k in range(n_steps):
        t = k * h
        noise = draw_noise(t)
        if k % stride == 0:
            record(t, y, noise)
        f = lambda tt, yy: sys.deriv(tt, yy, noise)
        y = rk4_step(f, y, t, h)
        if not np.all(np.isfinite(y)) or float(np.max(np.abs(y))) > DIVERGENCE_LIMIT:
            bad = sys.diagnose_nonfinite(y) if not np.all(np.isfinite(y)) else "state"
            raise DivergenceError(
                f"simulation diverged at t={(k + 1) * h:.6g} (signal: {bad}); "
                "consider a smaller step size"
            )
    t_end = n_steps * h
    record(t_end, y, draw_noise(t_end))

    N = len(rec_t)
    ys = np.asarray(rec_y)
    x = ys[:, sys.sl_x]
    x_r = ys[:, sys.sl_xr]
    e = x - x_r
    e_L = ys[:, sys.sl_eL]
    traj = Trajectory(
        t=np.asarray(rec_t),
        x=x,
        x_r=x_r,
        x_ri=ys[:, sys.sl_xri],
        e=e,
        e_L=e_L,
        e_H=e - e_L,
        u=np.asarray(rec_u),
        W_hat=ys[:, sys.sl_W].reshape(N, sys.s + sys.n, sys.m),
        c=np.asarray(rec_c).reshape(N, sys.n_c),
        meta={
            "name": scenario.name,
            "h": h,
            "t_final": scenario.t_final,
            "record_stride": stride,
            "seed": scenario.noise.seed,
            "gamma": sys.gamma,
            "kappa": sys.kappa,
            "eta": sys.eta,
        },
    )
    return traj
