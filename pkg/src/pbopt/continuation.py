"""Continuation-path optimization: temperature-annealed sigmoid masks.

The smooth objective J(sigmoid(x / tau)) is minimized by gradient descent at a
fixed tau, then tau is lowered along an exponential schedule, warm-starting
each stage from the previous solution.  Reported losses always threshold x,
since only the hypercube corners are valid solutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .optim import make_optimizer
from .params import sigmoid
from .pbcore import PBFunction

TAU_FLOOR = 1e-12


@dataclass(frozen=True)
class TemperatureSchedule:
    tau0: float = 1.0
    tau_final: float = 1.0 / 200.0
    steps_per_tau: int = 100

    def stage_temps(self, total_iters: int) -> np.ndarray:
        """Strictly decreasing stage temperatures tau0 * gamma^k ending at tau_final."""
        if total_iters < 1:
            raise ValueError("total_iters must be positive")
        n_stages = -(-total_iters // self.steps_per_tau)
        if n_stages < 2:
            if self.tau0 != self.tau_final:
                raise ValueError(
                    "schedule needs at least two stages to anneal; "
                    f"got {total_iters} iters at {self.steps_per_tau} steps per stage"
                )
            return np.array([self.tau0])
        gamma = (self.tau_final / self.tau0) ** (1.0 / (n_stages - 1))
        temps = self.tau0 * gamma ** np.arange(n_stages)
        temps[-1] = self.tau_final
        return temps

    def temp_at(self, iteration: int, total_iters: int) -> float:
        temps = self.stage_temps(total_iters)
        return float(temps[min(iteration // self.steps_per_tau, temps.size - 1)])


@dataclass
class CPState:
    x: np.ndarray
    tau: float
    optimizer: object = None
    iteration: int = 0


def cp_gradient(f: PBFunction, x, tau: float) -> np.ndarray:
    """Chain-rule gradient of J(sigmoid(x / tau)) w.r.t. x."""
    f.require_smooth()
    tau = max(tau, TAU_FLOOR)
    u = sigmoid(np.asarray(x, dtype=np.float64) / tau)
    return np.asarray(f.grad_smooth(u), dtype=np.float64) * u * (1.0 - u) / tau


def cp_step(f: PBFunction, state: CPState, lr: float) -> CPState:
    """One descent update of the logits at the current temperature."""
    if state.optimizer is None:
        state.optimizer = make_optimizer("sgd", lr)
    state.optimizer.lr = lr
    grad = cp_gradient(f, state.x, state.tau)
    state.x = state.optimizer.update(state.x, grad)
    state.iteration += 1
    return state


def threshold(x) -> np.ndarray:
    return (np.asarray(x) > 0.0).astype(np.float64)


def cp_run(
    f: PBFunction,
    schedule: TemperatureSchedule,
    lr: float,
    x_init,
    optimizer: str = "sgd",
    total_iters: int = 2000,
    on_iteration=None,
    before_iteration=None,
):
    """Run the full annealing loop.

    Returns ``(rows, state)`` where rows hold one record per iteration and
    state carries the final logits.  Each stage warm-starts from the final x
    of the previous one (the logits simply persist across temperature changes).
    """
    f.require_smooth()
    temps = schedule.stage_temps(total_iters)
    state = CPState(
        x=np.asarray(x_init, dtype=np.float64).copy(),
        tau=float(temps[0]),
        optimizer=make_optimizer(optimizer, lr),
    )
    rows = []
    for it in range(total_iters):
        state.tau = float(temps[min(it // schedule.steps_per_tau, temps.size - 1)])
        if before_iteration is not None:
            before_iteration(state)
        state = cp_step(f, state, lr)
        z = threshold(state.x)
        row = {
            "iteration": it,
            "discrete_loss": f.eval_discrete(z),
            "tau": state.tau,
        }
        rows.append(row)
        if on_iteration is not None:
            on_iteration(state, row)
    return rows, state
