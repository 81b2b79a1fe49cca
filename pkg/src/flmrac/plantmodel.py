"""Uncertain plant models and their integrator-augmented form.

A plant is x_p' = A_p x_p + B_p (Lambda u + delta_p(t, x_p)) with the
uncertainty parameterized as delta_p = W_p(t)' sigma_p(x_p) over a known
basis.  W_p and Lambda are hidden truth: the simulator integrates them, the
analysis layer may inspect them, the controller never sees them.

Augmenting with the command-tracking integrator state x_c' = E_p x_p - c
gives the (A, B, B_r) triple the adaptive architecture operates on.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .matrixcore import DimensionError

# Numerical rank threshold (relative to sigma_max) for the controllability test.
CTRB_RANK_TOL = 1e-8


def _bias(t, x_p):
    return 1.0


def _abs_x1_x2(t, x_p):
    return abs(x_p[0]) * x_p[1]


def _abs_x2_x2(t, x_p):
    return abs(x_p[1]) * x_p[1]


def _x1_cubed(t, x_p):
    return x_p[0] ** 3


#: Named scalar features of (t, x_p).  Scenario files reference these by name;
#: "x<k>" resolves to the k-th plant state component for any k.
BASIS_FEATURES = {
    "bias": _bias,
    "abs_x1_x2": _abs_x1_x2,
    "abs_x2_x2": _abs_x2_x2,
    "x1_cubed": _x1_cubed,
}

_COMPONENT_RE = re.compile(r"^x(\d+)$")


def resolve_feature(name: str):
    """Look up a feature by name, accepting the generic component pattern x<k>."""
    if name in BASIS_FEATURES:
        return BASIS_FEATURES[name]
    m = _COMPONENT_RE.match(name)
    if m:
        k = int(m.group(1)) - 1
        if k < 0:
            raise KeyError(name)
        return lambda t, x_p, _k=k: float(x_p[_k])
    raise KeyError(f"unknown basis feature {name!r}")


@dataclass(frozen=True)
class BasisSpec:
    """Ordered list of named scalar features of (t, x_p)."""

    names: tuple[str, ...]
    _funcs: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "_funcs", tuple(resolve_feature(n) for n in self.names))

    @property
    def dim(self) -> int:
        return len(self.names)

    def eval_plant(self, t: float, x_p) -> np.ndarray:
        """sigma_p(x_p), the plant-basis part only."""
        return np.array([f(t, x_p) for f in self._funcs], dtype=float)


@dataclass(frozen=True)
class Modulation:
    """Time modulation of one entry of the truth weight matrix.

    kind "step": entry is 0 before `start`, the base value after.
    kind "sin":  entry is 0 before `start`, base * sin(t) after.
    """

    row: int
    col: int
    kind: str
    start: float = 0.0

    def __post_init__(self):
        if self.kind not in ("step", "sin"):
            raise ValueError(f"unknown modulation kind {self.kind!r}")

    def factor(self, t: float) -> float:
        if t < self.start:
            return 0.0
        return math.sin(t) if self.kind == "sin" else 1.0


@dataclass(frozen=True)
class UncertaintyTruth:
    """Hidden weight matrix W_p(t) plus its declared norm bounds.

    `W_p_base` holds the constant entries; each Modulation rescales one entry
    over time (e.g. a sinusoidal disturbance switched on mid-run).  The bounds
    w_p_max >= sup ||W_p(t)||_F and w_p_dot_max >= sup ||W_p'(t)||_F are data
    supplied with the model and can be spot-checked by sampling.
    """

    W_p_base: np.ndarray
    modulations: tuple[Modulation, ...] = ()
    w_p_max: float = 0.0
    w_p_dot_max: float = 0.0

    def __post_init__(self):
        base = np.atleast_2d(np.asarray(self.W_p_base, dtype=float))
        object.__setattr__(self, "W_p_base", base)
        object.__setattr__(self, "modulations", tuple(self.modulations))
        s, m = base.shape
        for mod in self.modulations:
            if not (0 <= mod.row < s and 0 <= mod.col < m):
                raise DimensionError(f"modulation index ({mod.row},{mod.col}) outside {base.shape}")
        if self.w_p_max < 0 or self.w_p_dot_max < 0:
            raise ValueError("truth norm bounds must be nonnegative")

    @property
    def is_constant(self) -> bool:
        return not self.modulations

    def W_p(self, t: float) -> np.ndarray:
        if not self.modulations:
            return self.W_p_base
        W = self.W_p_base.copy()
        for mod in self.modulations:
            W[mod.row, mod.col] *= mod.factor(t)
        return W

    def check_bounds(self, t_grid) -> None:
        """Verify ||W_p(t)||_F <= w_p_max on a sample grid (and the rate bound
        by forward differences).  Raises ValueError on violation."""
        ts = np.asarray(t_grid, dtype=float)
        prev = None
        for i, t in enumerate(ts):
            W = self.W_p(float(t))
            if np.linalg.norm(W) > self.w_p_max + 1e-9:
                raise ValueError(f"||W_p({t})||_F exceeds declared bound {self.w_p_max}")
            if prev is not None:
                dt = float(t - ts[i - 1])
                # Skip difference quotients across switch instants: the declared
                # rate bound covers the smooth motion, not the jump itself.
                if dt > 0 and not self._crosses_switch(float(ts[i - 1]), float(t)):
                    rate = np.linalg.norm(W - prev) / dt
                    if rate > self.w_p_dot_max + 1e-6:
                        raise ValueError(
                            f"||dW_p/dt|| ~ {rate:.3g} near t={t} exceeds bound {self.w_p_dot_max}"
                        )
            prev = W

    def _crosses_switch(self, t0: float, t1: float) -> bool:
        return any(t0 < mod.start <= t1 for mod in self.modulations)


@dataclass(frozen=True)
class PlantModel:
    """Known matrices, hidden truth and basis of one uncertain plant."""

    A_p: np.ndarray
    B_p: np.ndarray
    Lambda: np.ndarray  # diagonal entries, length m, all > 0
    truth: UncertaintyTruth
    basis: BasisSpec

    def __post_init__(self):
        A_p = np.atleast_2d(np.asarray(self.A_p, dtype=float))
        B_p = np.atleast_2d(np.asarray(self.B_p, dtype=float))
        lam = np.atleast_1d(np.asarray(self.Lambda, dtype=float))
        object.__setattr__(self, "A_p", A_p)
        object.__setattr__(self, "B_p", B_p)
        object.__setattr__(self, "Lambda", lam)
        n_p = A_p.shape[0]
        if A_p.shape != (n_p, n_p):
            raise DimensionError(f"A_p must be square, got {A_p.shape}")
        if B_p.shape[0] != n_p:
            raise DimensionError(f"B_p has {B_p.shape[0]} rows, expected {n_p}")
        m = B_p.shape[1]
        if lam.shape != (m,):
            raise DimensionError(f"Lambda must have {m} diagonal entries, got {lam.shape}")
        if np.any(lam <= 0):
            raise ValueError("control effectiveness Lambda must be strictly positive")
        if self.truth.W_p_base.shape != (self.basis.dim, m):
            raise DimensionError(
                f"truth W_p is {self.truth.W_p_base.shape}, expected ({self.basis.dim}, {m})"
            )
        if not self._controllable():
            raise ValueError("(A_p, B_p) is not controllable")

    def _controllable(self) -> bool:
        n_p = self.A_p.shape[0]
        blocks = [self.B_p]
        for _ in range(n_p - 1):
            blocks.append(self.A_p @ blocks[-1])
        ctrb = np.hstack(blocks)
        sv = np.linalg.svd(ctrb, compute_uv=False)
        return bool(np.sum(sv > CTRB_RANK_TOL * sv[0]) == n_p)

    @property
    def n_p(self) -> int:
        return self.A_p.shape[0]

    @property
    def m(self) -> int:
        return self.B_p.shape[1]


@dataclass(frozen=True)
class AugmentedSystem:
    """(A, B, B_r) triple of the integrator-augmented plant."""

    A: np.ndarray
    B: np.ndarray
    B_r: np.ndarray
    E_p: np.ndarray
    n_p: int
    n_c: int

    @property
    def n(self) -> int:
        return self.n_p + self.n_c

    @property
    def m(self) -> int:
        return self.B.shape[1]


def eval_basis(basis: BasisSpec, t: float, x_p, x) -> np.ndarray:
    """Aggregated basis sigma(x) = [sigma_p(x_p); x]."""
    x_p = np.asarray(x_p, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x_p.ndim != 1 or x_p.size > x.size:
        raise DimensionError(f"inconsistent state shapes x_p {x_p.shape}, x {x.shape}")
    return np.concatenate([basis.eval_plant(t, x_p), x])


def eval_uncertainty(truth: UncertaintyTruth, basis: BasisSpec, t: float, x_p) -> np.ndarray:
    """delta_p(t, x_p) = W_p(t)' sigma_p(x_p), an m-vector."""
    sigma_p = basis.eval_plant(t, np.asarray(x_p, dtype=float))
    W = truth.W_p(t)
    if W.shape[0] != sigma_p.size:
        raise DimensionError(f"W_p has {W.shape[0]} rows, basis dimension is {sigma_p.size}")
    return W.T @ sigma_p


def augment(plant: PlantModel, E_p) -> AugmentedSystem:
    """Stack the plant with the command-tracking integrator.

    A = [[A_p, 0], [E_p, 0]], B = [B_p; 0], B_r = [0; -I].  n_c = 0 (no
    integrator, pure stabilization) degenerates to A = A_p, B = B_p and an
    empty B_r.
    """
    E_p = np.asarray(E_p, dtype=float)
    if E_p.size == 0:
        E_p = E_p.reshape(0, plant.n_p)
    E_p = np.atleast_2d(E_p)
    n_p, m = plant.n_p, plant.m
    n_c = E_p.shape[0]
    if E_p.shape != (n_c, n_p):
        raise DimensionError(f"E_p must be (n_c, {n_p}), got {E_p.shape}")
    n = n_p + n_c
    A = np.zeros((n, n))
    A[:n_p, :n_p] = plant.A_p
    A[n_p:, :n_p] = E_p
    B = np.vstack([plant.B_p, np.zeros((n_c, m))])
    B_r = np.vstack([np.zeros((n_p, n_c)), -np.eye(n_c)])
    return AugmentedSystem(A=A, B=B, B_r=B_r, E_p=E_p, n_p=n_p, n_c=n_c)


def aggregate_true_weights(truth, Lambda, K, t: float = 0.0) -> np.ndarray:
    """Aggregated truth W with W' = [Lambda^-1 W_p', (Lambda^-1 - I) K].

    `truth` may be an UncertaintyTruth (evaluated at time t) or a plain
    (s, m) array.  Analysis-only: the controller never receives this.
    """
    W_p = truth.W_p(t) if isinstance(truth, UncertaintyTruth) else np.atleast_2d(np.asarray(truth, dtype=float))
    lam = np.atleast_1d(np.asarray(Lambda, dtype=float))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    m = K.shape[0]
    if lam.shape != (m,):
        raise DimensionError(f"Lambda must have {m} entries, got {lam.shape}")
    if np.any(lam == 0):
        raise ValueError("Lambda is singular")
    if W_p.shape[1] != m:
        raise DimensionError(f"W_p has {W_p.shape[1]} columns, expected {m}")
    lam_inv = 1.0 / lam
    upper = W_p * lam_inv[np.newaxis, :]  # Lambda^-1 W_p' transposed
    lower = ((np.diag(lam_inv) - np.eye(m)) @ K).T  # ((Lambda^-1 - I) K)'
    return np.vstack([upper, lower])
