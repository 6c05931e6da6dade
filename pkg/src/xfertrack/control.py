"""Transfer controller: offline inverse plus online error-prediction correction.

The applied input decomposes as u(k) = u1(k) + u2(k). u1 comes from the
offline inverse module queried with (x(k), y_d(k+r)); u2 = alpha * e_p(k+r)
corrects it with the online error prediction, engaging once the online
model's sliding window is full. Observations are paired per the r-step
alignment: at step k the record enqueued at step k - r retires with label
y_d(k) - y(k).
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .systems import SimTrace, SimulationDiverged, step

EPS_GAIN_DENOMINATOR = 1e-8


@dataclass(frozen=True)
class FixedGain:
    alpha: float


@dataclass(frozen=True)
class EstimatedGain:
    """alpha = -1 / (d e_p / d u1), clamped to [floor, cap] by magnitude.

    smoothing, when set, blends the new estimate with the previous one:
    alpha <- smoothing * alpha_prev + (1 - smoothing) * alpha_new.
    """

    floor: float = 0.05
    cap: float = 20.0
    smoothing: Optional[float] = None


@dataclass(frozen=True)
class ControlDecision:
    u1: float
    e_p: float
    variance: float
    alpha: float
    u2: float
    u: float


@dataclass(frozen=True)
class StepRecord:
    k: int
    x: np.ndarray
    y: float
    y_d: float
    u1: float
    e_p: float
    alpha: float
    u2: float
    u: float
    e_p_star: float = math.nan


class AffineErrorOracle:
    """Exact error predictor for a known linear target.

    Implements the online-module interface (predict / mean_derivative /
    observe) from the target's lifted gains, for exactness checks:
    e_p(k+r) = y_d(k+r) - lifted_A x - lifted_B u1.
    """

    def __init__(self, target):
        self.target = target
        self.n = target.n
        self.size = 1  # never cold

    def observe(self, xi, e):
        return self

    def predict(self, xi):
        xi = np.asarray(xi, dtype=float)
        x, u1, yd = xi[:self.n], xi[self.n], xi[self.n + 1]
        return float(yd - self.target.lifted_A @ x - self.target.lifted_B * u1), 0.0

    def mean_derivative(self, xi, dim: int) -> float:
        if dim < self.n:
            return float(-self.target.lifted_A[dim])
        if dim == self.n:
            return -self.target.lifted_B
        return 1.0


class TransferController:
    """Combines an offline inverse with an optional online error predictor."""

    def __init__(self, inverse, r: int, online=None, gain=None,
                 u_max: float = 1e6, eps_denominator: float = EPS_GAIN_DENOMINATOR):
        self.inverse = inverse
        self.r = int(r)
        self.online = online
        self.gain = gain if gain is not None else EstimatedGain()
        self.u_max = float(u_max)
        self.eps_denominator = float(eps_denominator)
        self._pending = deque()
        self._last_alpha = None
        if self.r < 1:
            raise ValueError("relative degree must be >= 1")

    def reset(self):
        self._pending.clear()
        self._last_alpha = None

    def select_gain(self, xi_query, u1_dim: int) -> float:
        if isinstance(self.gain, FixedGain):
            return float(self.gain.alpha)
        g = self.gain
        denom = 0.0
        if self.online is not None and getattr(self.online, "size", 0) > 0:
            denom = self.online.mean_derivative(xi_query, u1_dim)
        if abs(denom) < self.eps_denominator:
            # degenerate estimate: hold the last valid gain, else the floor
            return self._last_alpha if self._last_alpha is not None else g.floor
        alpha = -1.0 / denom
        alpha = math.copysign(min(max(abs(alpha), g.floor), g.cap), alpha)
        if g.smoothing is not None and self._last_alpha is not None:
            alpha = g.smoothing * self._last_alpha + (1.0 - g.smoothing) * alpha
            if alpha == 0.0:
                alpha = g.floor
            alpha = math.copysign(min(max(abs(alpha), g.floor), g.cap), alpha)
        return alpha

    def control_step(self, k: int, x, y_d_future: float, y_now: float) -> ControlDecision:
        """One control decision; also retires the r-step-old pending record."""
        x = np.asarray(x, dtype=float)
        if len(self._pending) == self.r:
            k0, x0, u0, yd_k = self._pending.popleft()
            if self.online is not None:
                xi = np.concatenate([x0, [u0], [yd_k]])
                self.online.observe(xi, yd_k - y_now)
        u1 = float(self.inverse.reference(x, y_d_future))
        if self.online is None:
            e_p, var, alpha, u2, u = 0.0, math.inf, 0.0, 0.0, u1
        elif not getattr(self.online, "full", True):
            # warm-up: the prediction is logged but the correction stays
            # off until the model's window is full. A part-filled window
            # gives derivative (hence gain) estimates of arbitrary sign,
            # and alpha * e_p with a wrong-sign gain can kick the plant
            # hard enough to poison the window it is learning from.
            xi_query = np.concatenate([x, [u1], [y_d_future]])
            e_p, var = self.online.predict(xi_query)
            alpha, u2, u = 0.0, 0.0, u1
            if (isinstance(self.gain, EstimatedGain)
                    and self.gain.smoothing is not None):
                # seed the smoother so the first live gain starts at the
                # floor instead of jumping straight to the raw estimate
                self._last_alpha = self.gain.floor
        else:
            xi_query = np.concatenate([x, [u1], [y_d_future]])
            e_p, var = self.online.predict(xi_query)
            alpha = self.select_gain(xi_query, u1_dim=x.shape[0])
            self._last_alpha = alpha
            u2 = alpha * e_p
            u = u1 + u2
        if not np.isfinite(u) or abs(u) > self.u_max:
            raise SimulationDiverged(
                f"input guard tripped: |u|={abs(u):.3e} exceeds {self.u_max:.3e}", k)
        self._pending.append((k, x.copy(), u, float(y_d_future)))
        return ControlDecision(u1=u1, e_p=e_p, variance=var, alpha=alpha, u2=u2, u=u)


class StepLog:
    """Column-oriented record of a controlled run; serializes to CSV."""

    def __init__(self, n: int):
        self.n = n
        self.rows: list[StepRecord] = []

    def append(self, rec: StepRecord):
        self.rows.append(rec)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.asarray([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def states(self) -> np.ndarray:
        return np.vstack([r.x for r in self.rows]) if self.rows else np.zeros((0, self.n))

    def to_csv(self, path):
        headers = (["k"] + [f"x{i}" for i in range(self.n)]
                   + ["y", "y_d", "u1", "e_p", "alpha", "u2", "u", "e_p_star"])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(headers)
            for r in self.rows:
                w.writerow([r.k] + [repr(float(v)) for v in r.x]
                           + [repr(float(v)) for v in (r.y, r.y_d, r.u1, r.e_p,
                                                       r.alpha, r.u2, r.u,
                                                       r.e_p_star)])

    @classmethod
    def from_csv(cls, path) -> "StepLog":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            headers = next(reader)
            n = sum(1 for h in headers if h.startswith("x") and h[1:].isdigit())
            log = cls(n)
            for row in reader:
                vals = [float(v) for v in row]
                log.append(StepRecord(
                    k=int(vals[0]), x=np.asarray(vals[1:1 + n]),
                    y=vals[1 + n], y_d=vals[2 + n], u1=vals[3 + n],
                    e_p=vals[4 + n], alpha=vals[5 + n], u2=vals[6 + n],
                    u=vals[7 + n], e_p_star=vals[8 + n]))
        return log


def track_trajectory(system, controller: TransferController, trajectory,
                     x0=None, error_oracle_target=None):
    """Run a controller against a plant along a trajectory.

    Returns (SimTrace, StepLog). When error_oracle_target (a linear system
    with lifted gains) is given, the analytic error map is evaluated at
    each query and logged as e_p_star for prediction-accuracy audits.
    On divergence the raised error carries the partial trace and log.
    """
    r = controller.r
    T = trajectory.n_steps
    yd = trajectory.values(T + r)
    x = np.zeros(system.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    states = np.empty((T + 1, system.n))
    inputs = np.empty(T)
    outputs = np.empty(T + 1)
    states[0] = x
    log = StepLog(system.n)
    k = 0
    try:
        for k in range(T):
            y = system.output(x)
            outputs[k] = y
            dec = controller.control_step(k, x, yd[k + r], y)
            if error_oracle_target is not None:
                e_star = float(yd[k + r] - error_oracle_target.lifted_A @ x
                               - error_oracle_target.lifted_B * dec.u1)
            else:
                e_star = math.nan
            log.append(StepRecord(k=k, x=x.copy(), y=y, y_d=yd[k], u1=dec.u1,
                                  e_p=dec.e_p, alpha=dec.alpha, u2=dec.u2,
                                  u=dec.u, e_p_star=e_star))
            inputs[k] = dec.u
            x = step(system, x, dec.u, k)
            states[k + 1] = x
    except SimulationDiverged as err:
        # outputs[k] is assigned before either raise point in the loop body
        err.partial_trace = SimTrace(states=states[:k + 1].copy(),
                                     inputs=inputs[:k].copy(),
                                     outputs=outputs[:k + 1].copy(), dt=trajectory.dt)
        err.partial_log = log
        raise
    outputs[T] = system.output(x)
    return SimTrace(states=states, inputs=inputs, outputs=outputs,
                    dt=trajectory.dt), log
