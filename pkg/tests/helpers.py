"""Shared scenario builders for the test suite."""

from __future__ import annotations

import dataclasses

import numpy as np

from flmrac.controllers import ControllerConfig
from flmrac.matrixcore import LyapunovPair
from flmrac.plantmodel import BasisSpec, PlantModel, UncertaintyTruth, augment
from flmrac.simulator import CommandSpec, NoiseSpec, ScenarioConfig

WINGROCK_ALPHAS = (0.25, 0.5, 1.0, -5.0, 5.0, 10.0)


def constant_wingrock_truth() -> UncertaintyTruth:
    """Wing-rock truth with the exogenous sinusoid disabled (constant weights)."""
    w = np.array([0.0, *WINGROCK_ALPHAS[1:]]).reshape(6, 1)
    return UncertaintyTruth(W_p_base=w, w_p_max=12.31, w_p_dot_max=0.0)


def quiet_wingrock(scn: ScenarioConfig, gamma=None, kappa=None, eta=None,
                   t_final=40.0, command=None, record_stride=None) -> ScenarioConfig:
    """Noise-free, constant-truth, projection-free variant of a bundled scenario."""
    plant = dataclasses.replace(scn.plant, truth=constant_wingrock_truth())
    ctrl = scn.controller
    ctrl = dataclasses.replace(
        ctrl,
        gamma=ctrl.gamma if gamma is None else gamma,
        kappa=ctrl.kappa if kappa is None else kappa,
        eta=ctrl.eta if eta is None else eta,
        projection=None,
    )
    return dataclasses.replace(
        scn,
        plant=plant,
        controller=ctrl,
        noise=dataclasses.replace(scn.noise, enabled=False),
        command=scn.command if command is None else command,
        t_final=t_final,
        record_stride=scn.record_stride if record_stride is None else record_stride,
    )


def scalar_plant(w_truth: float = 1.5) -> PlantModel:
    """First-order stabilization plant with a linear-in-state uncertainty."""
    truth = UncertaintyTruth(W_p_base=np.array([[w_truth]]),
                             w_p_max=abs(w_truth), w_p_dot_max=0.0)
    return PlantModel(A_p=[[-1.0]], B_p=[[1.0]], Lambda=[1.0], truth=truth,
                      basis=BasisSpec(("x1",)))


def scalar_scenario(gamma=50.0, kappa=100.0, eta=0.0, h=1e-4, t_final=2.0,
                    x0=0.5, x_r0=None, w_truth=1.5, R=None) -> ScenarioConfig:
    plant = scalar_plant(w_truth)
    E_p = np.zeros((0, 1))
    K = np.array([[1.0]])
    aug = augment(plant, E_p)
    lyap = LyapunovPair.for_closed_loop(aug.A - aug.B @ K,
                                        np.eye(1) if R is None else R)
    ctrl = ControllerConfig(K=K, gamma=gamma, kappa=kappa, eta=eta, lyap=lyap)
    return ScenarioConfig(
        plant=plant, E_p=E_p, controller=ctrl,
        command=CommandSpec(kind="zero"), noise=NoiseSpec(),
        t_final=t_final, h=h, record_stride=1,
        x0=np.array([float(x0)]),
        x_r0=None if x_r0 is None else np.array([float(x_r0)]),
        name="scalar",
    )


def decay_scenario(kappa: float, eta: float = 2.0, h: float = 5e-5,
                   t_final: float = 1.5) -> ScenarioConfig:
    """Linear tracking plant used for the boundary-layer decay checks.

    x_r0 != x0 seeds the fast transient; the unit step command then drives a
    slow closed-loop transient whose uncertainty mismatch sustains the
    O(1/kappa) high-frequency residual well after the boundary layer.
    """
    truth = UncertaintyTruth(W_p_base=np.array([[2.0]]), w_p_max=2.0, w_p_dot_max=0.0)
    plant = PlantModel(A_p=[[-1.0]], B_p=[[1.0]], Lambda=[1.0], truth=truth,
                       basis=BasisSpec(("x1",)))
    E_p = np.array([[1.0]])
    K = np.array([[2.0, 2.0]])
    aug = augment(plant, E_p)
    lyap = LyapunovPair.for_closed_loop(aug.A - aug.B @ K, np.eye(2))
    ctrl = ControllerConfig(K=K, gamma=10.0, kappa=kappa, eta=eta, lyap=lyap)
    return ScenarioConfig(
        plant=plant, E_p=E_p, controller=ctrl,
        command=CommandSpec(kind="step", amplitude=1.0), noise=NoiseSpec(),
        t_final=t_final, h=h, record_stride=1,
        x0=np.array([0.0, 0.0]), x_r0=np.array([0.25, 0.0]),
        name=f"decay_k{kappa:g}",
    )


def random_hurwitz(rng: np.random.Generator, n: int, margin: float = 0.5) -> np.ndarray:
    A = rng.standard_normal((n, n))
    shift = float(np.max(np.linalg.eigvals(A).real)) + margin
    return A - shift * np.eye(n)


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    M = rng.standard_normal((n, n))
    return M @ M.T + 0.1 * np.eye(n)
