"""Joint-space PD tracking with gravity compensation.

The inverse-kinematics stage publishes desired configurations at a slow
rate; between updates the reference is held constant (zero-order hold)
and each robot runs the decentralized law

    tau = -K_p (q - q_des) - K_v qd + g(q).

The Lyapunov value V = 1/2 qd' M qd + 1/2 e' K_p e is exposed for the
stability diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .robot_model import SerialChainModel, gravity_vector, mass_matrix


@dataclass(frozen=True)
class GainSet:
    """Per-joint diagonal PD gains, strictly positive."""

    kp: np.ndarray
    kv: np.ndarray

    def __post_init__(self):
        kp = np.atleast_1d(np.asarray(self.kp, dtype=float))
        kv = np.atleast_1d(np.asarray(self.kv, dtype=float))
        if np.any(kp <= 0) or np.any(kv <= 0):
            raise ValueError("PD gains must be strictly positive")
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kv", kv)

    @classmethod
    def for_model(cls, model: SerialChainModel, kp_base, kv_base, kp_arm, kv_arm):
        kp = np.concatenate([np.full(2, float(kp_base)), np.full(model.n - 2, float(kp_arm))])
        kv = np.concatenate([np.full(2, float(kv_base)), np.full(model.n - 2, float(kv_arm))])
        return cls(kp, kv)

    @classmethod
    def bandwidth(
        cls,
        model: SerialChainModel,
        q_ref,
        omega_base: float = 3.2,
        omega_arm: float = 20.0,
        zeta: float = 1.0,
    ):
        """Uniform closed-loop bandwidth: kp_j = M_jj w^2, kv_j = 2 zeta w M_jj.

        Keeps every joint's natural frequency well under the control
        Nyquist rate regardless of how small its reflected inertia is
        (a flat kp pushes wrist modes past what a zero-order-hold loop
        can stabilize).
        """
        Mdiag = np.diag(mass_matrix(model, np.asarray(q_ref, dtype=float)))
        omega = np.concatenate(
            [np.full(2, float(omega_base)), np.full(model.n - 2, float(omega_arm))]
        )
        kp = Mdiag * omega ** 2
        kv = 2.0 * zeta * omega * Mdiag
        return cls(kp, kv)

    @classmethod
    def critically_damped(
        cls,
        model: SerialChainModel,
        q_ref,
        kp_base: float = 400.0,
        kp_arm: float = 100.0,
        zeta: float = 1.0,
    ):
        """Stiffness per the usual defaults, damping scaled to inertia.

        A constant kv over-damps distal joints whose reflected inertia
        is tiny (the decay pole kv/M_jj gets stiffer than any sane
        integrator step); kv_j = 2 zeta sqrt(kp_j M_jj) keeps every
        joint near the requested damping ratio instead.
        """
        kp = np.concatenate(
            [np.full(2, float(kp_base)), np.full(model.n - 2, float(kp_arm))]
        )
        Mdiag = np.diag(mass_matrix(model, np.asarray(q_ref, dtype=float)))
        kv = 2.0 * zeta * np.sqrt(kp * Mdiag)
        return cls(kp, kv)

    def expand(self, n: int):
        kp = self.kp if self.kp.size == n else np.full(n, float(self.kp[0]))
        kv = self.kv if self.kv.size == n else np.full(n, float(self.kv[0]))
        return kp, kv


def pd_torque(
    model: SerialChainModel, q, qd, q_des_held, gains: GainSet, gravity
) -> np.ndarray:
    """PD with gravity compensation against the held reference sample."""
    q = np.asarray(q, dtype=float).reshape(model.n)
    qd = np.asarray(qd, dtype=float).reshape(model.n)
    q_des = np.asarray(q_des_held, dtype=float).reshape(model.n)
    kp, kv = gains.expand(model.n)
    return -kp * (q - q_des) - kv * qd + gravity_vector(model, q, gravity)


def lyapunov_value(
    model: SerialChainModel, q, qd, q_des_held, gains: GainSet
) -> float:
    """V = 1/2 qd' M(q) qd + 1/2 e' K_p e (zero only at zero error state)."""
    q = np.asarray(q, dtype=float).reshape(model.n)
    qd = np.asarray(qd, dtype=float).reshape(model.n)
    e = q - np.asarray(q_des_held, dtype=float).reshape(model.n)
    kp, _ = gains.expand(model.n)
    return 0.5 * float(qd @ mass_matrix(model, q) @ qd) + 0.5 * float(e @ (kp * e))


def lyapunov_decay_bound(gains: GainSet, qd, w=None) -> float:
    """Upper bound on dV/dt: -min(K_v) |qd|^2 + qd . w."""
    qd = np.asarray(qd, dtype=float)
    kv_min = float(np.min(gains.kv))
    bound = -kv_min * float(qd @ qd)
    if w is not None:
        bound += float(qd @ np.asarray(w, dtype=float))
    return bound
