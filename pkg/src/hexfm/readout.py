"""Online recursive-least-squares readout with a batch ridge oracle.

Three readout columns, one per gait; only the column of the currently active
gait is ever touched by an update.  Each column keeps its own
inverse-correlation matrix over the rate stream seen while its gait was
active, initialized as P(0) = I / delta_c.  With no forgetting, a column's
running weights equal the batch ridge solution
argmin ||R w - d||^2 + delta_c ||w||^2 over its own samples, which is what
:func:`batch_ridge_oracle` computes directly.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, InputError, NumericError

GAITS = ("wave", "tetrapod", "caterpillar")
GAIT_INDEX = {name: i for i, name in enumerate(GAITS)}


class RlsReadout:
    """Per-leg readout: N reservoir rates to one prediction per gait."""

    def __init__(self, size: int, delta_c: float = 1e-4, n_outputs: int = len(GAITS)):
        if size < 1:
            raise ConfigurationError(f"size must be >= 1, got {size}")
        if delta_c <= 0.0:
            raise ConfigurationError(f"delta_c must be > 0, got {delta_c}")
        self.delta_c = delta_c
        self.p = np.stack([np.eye(size) / delta_c for _ in range(n_outputs)])
        self.w_out = np.zeros((size, n_outputs))
        self.learning_enabled = True

    @staticmethod
    def gait_column(gait: int | str) -> int:
        if isinstance(gait, str):
            try:
                return GAIT_INDEX[gait]
            except KeyError:
                raise ConfigurationError(f"unknown gait {gait!r}") from None
        if not 0 <= gait < len(GAITS):
            raise ConfigurationError(f"gait index out of range: {gait}")
        return gait

    def predict(self, r: np.ndarray, gait: int | str) -> float:
        """z = w_out[:, gait] . r"""
        col = self.gait_column(gait)
        r = np.asarray(r, dtype=float)
        if r.shape != (self.w_out.shape[0],):
            raise InputError(f"rate vector shape {r.shape}, expected ({self.w_out.shape[0]},)")
        return float(self.w_out[:, col] @ r)

    def step(self, r: np.ndarray, d: float, gait: int | str) -> tuple[float, float]:
        """One RLS update against target ``d`` on the active gait column.

        Returns (z, e): the pre-update prediction and error e = z - d.  The
        active column's inverse-correlation matrix shrinks first, then the
        column moves by -e * (P_new r); other columns and their matrices are
        untouched.
        """
        if not self.learning_enabled:
            raise ConfigurationError("rls step with learning disabled")
        col = self.gait_column(gait)
        r = np.asarray(r, dtype=float)
        if not np.all(np.isfinite(r)) or not np.isfinite(d):
            raise InputError("non-finite rls input")
        z = float(self.w_out[:, col] @ r)
        e = z - float(d)
        p = self.p[col]
        pr = p @ r
        denom = 1.0 + float(r @ pr)
        p = p - np.outer(pr, pr) / denom
        self.p[col] = 0.5 * (p + p.T)
        self.w_out[:, col] -= e * (self.p[col] @ r)
        return z, e


def batch_ridge_oracle(rates: np.ndarray, targets: np.ndarray, delta_c: float) -> np.ndarray:
    """Direct solve of (R^T R + delta_c I) w = R^T d.

    Independent check for the online updates; kept deliberately free of any
    RLS machinery.
    """
    rates = np.asarray(rates, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if rates.ndim != 2 or len(rates) != len(targets):
        raise InputError(
            f"rate history {rates.shape} incompatible with targets {targets.shape}"
        )
    if len(rates) < 1:
        raise InputError("empty rate history")
    if delta_c < 0.0:
        raise ConfigurationError(f"delta_c must be >= 0, got {delta_c}")
    gram = rates.T @ rates + delta_c * np.eye(rates.shape[1])
    rhs = rates.T @ targets
    try:
        weights = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular ridge system: {exc}") from exc
    if not np.all(np.isfinite(weights)):
        raise NumericError("ridge solve produced non-finite weights")
    return weights
