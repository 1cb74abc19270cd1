"""Concrete model families.

* Capacitated periodic-review inventory with fixed ordering cost and lost
  sales, on an exact grid ``{0, step, ..., C}`` plus the lost-sale marker
  state ``0_L``.
* The one-action chain on ``{0} U grid U {ell}`` with
  ``ell = (sqrt 5 - 1) / 2`` whose expected hitting time of ``ell`` jumps
  at ``ell``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from . import kernels
from .core import FiniteMdp, ModelError, check_policy, ensure_valid

LOST_SALE = "0_L"
GOLDEN_ELL = (math.sqrt(5.0) - 1.0) / 2.0
ELL_LABEL = "ell"


# -- inventory -----------------------------------------------------------
def _units(value, step, what):
    k = value / step
    if abs(k - round(k)) > 1e-9:
        raise ModelError(f"{what}={value} is not a multiple of the grid step {step}")
    return int(round(k))


def _fmt(x):
    return f"{x:.12g}"


@dataclass(frozen=True)
class InventorySpec:
    """Inventory model parameters.

    ``holding`` is either a callable evaluated on the grid, a sequence of
    values at grid points ``0, step, ..., C``, or a number giving a linear
    rate ``h(x) = rate * x``.
    """

    capacity: float
    max_order: float
    demand_pmf: Mapping[float, float]
    fixed_cost: float
    unit_cost: float
    holding: Callable | Sequence[float] | float = 0.0
    grid_step: float = 1.0
    _holding_values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.grid_step <= 0:
            raise ModelError("grid_step must be positive")
        n_c = _units(self.capacity, self.grid_step, "capacity")
        n_m = _units(self.max_order, self.grid_step, "max_order")
        if n_c <= 0 or n_m <= 0:
            raise ModelError("capacity and max_order must be positive")
        if self.fixed_cost < 0 or self.unit_cost < 0:
            raise ModelError("costs must be nonnegative")
        pmf = dict(self.demand_pmf)
        if not pmf:
            raise ModelError("empty demand pmf")
        for d, g in pmf.items():
            _units(float(d), self.grid_step, "demand")
            if float(d) < 0 or g < 0:
                raise ModelError("demand values and probabilities must be nonnegative")
        if abs(math.fsum(pmf.values()) - 1.0) > 1e-12:
            raise ModelError("demand pmf must sum to 1")
        levels = np.arange(n_c + 1) * self.grid_step
        h = self.holding
        if callable(h):
            vals = np.array([h(x) for x in levels], dtype=float)
        elif np.ndim(h) == 0:
            vals = float(h) * levels
        else:
            vals = np.asarray(h, dtype=float)
            if vals.shape != levels.shape:
                raise ModelError(f"holding table needs {levels.size} values")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ModelError("holding costs must be finite and nonnegative")
        object.__setattr__(self, "_holding_values", vals)

    @property
    def levels(self) -> int:
        return _units(self.capacity, self.grid_step, "capacity") + 1

    @property
    def orders(self) -> int:
        return _units(self.max_order, self.grid_step, "max_order") + 1

    @property
    def holding_values(self) -> np.ndarray:
        return self._holding_values


def fix_inv() -> InventorySpec:
    """The small reference instance used throughout the tests."""
    return InventorySpec(capacity=4, max_order=2, grid_step=1,
                         demand_pmf={0: 0.3, 1: 0.3, 2: 0.2, 3: 0.2},
                         fixed_cost=5.0, unit_cost=1.0, holding=0.5)


def _inventory_rows(spec: InventorySpec, lost_sales_terminate: bool):
    n_lv, n_or = spec.levels, spec.orders
    step = spec.grid_step
    cap = n_lv - 1
    lost = n_lv
    h = spec.holding_values
    demand = [(_units(float(d), step, "demand"), float(g))
              for d, g in sorted(spec.demand_pmf.items()) if g > 0]
    states = [_fmt(i * step) for i in range(n_lv)] + [LOST_SALE]
    orders = [_fmt(j * step) for j in range(n_or)]
    kernel, cost = [], []
    for x in range(n_lv + 1):
        stock = 0 if x == lost else x          # 0_L + y := y
        rows, costs = [], []
        for a in range(n_or):
            row = {}
            hold = 0.0
            for d, g in demand:
                if stock + a >= d:
                    y = min(stock + a - d, cap)
                    hold += g * h[y]
                else:
                    y = lost
                    hold += g * h[0]           # lost-sale state holds no stock
                    if lost_sales_terminate:
                        continue
                row[y] = row.get(y, 0.0) + g
            rows.append(row)
            costs.append(spec.fixed_cost * (a > 0) + spec.unit_cost * a * step + hold)
        kernel.append(rows)
        cost.append(costs)
    return states, [orders] * (n_lv + 1), kernel, cost


def build_inventory_mdp(spec: InventorySpec) -> FiniteMdp:
    """Row-stochastic inventory model; the lost-sale state is labelled ``0_L``."""
    return FiniteMdp.from_rows(*_inventory_rows(spec, False))


def build_lost_sale_total_cost_mdp(spec: InventorySpec) -> FiniteMdp:
    """Inventory model stopped at the first lost sale (sub-stochastic rows)."""
    ok, _ = check_assumption_D(spec)
    if not ok:
        raise ModelError("Assumption D fails: total cost before the first lost sale "
                         "need not be finite")
    return FiniteMdp.from_rows(*_inventory_rows(spec, True))


def _exact(x) -> Fraction:
    # decimal reading of the float, so 0.2 counts as 1/5
    return Fraction(repr(float(x)))


def check_assumption_D(spec: InventorySpec):
    """``(holds, gamma)`` with ``gamma = P(D > M)``."""
    tail = sum((_exact(g) for d, g in spec.demand_pmf.items()
                if float(d) > spec.max_order + 1e-9 * spec.grid_step), Fraction(0))
    return tail > 0, float(tail)


def k_ell_bound(spec: InventorySpec) -> float:
    """``(ceil(C/M) + 1) / gamma^(ceil(C/M) + 1)``, a bound on the expected
    time to the first lost sale under any policy.

    Evaluated in rational arithmetic from the decimal pmf entries.
    """
    tail = sum((_exact(g) for d, g in spec.demand_pmf.items()
                if float(d) > spec.max_order + 1e-9 * spec.grid_step), Fraction(0))
    if tail <= 0:
        raise ModelError("Assumption D fails (gamma = 0)")
    k = math.ceil(Fraction(_units(spec.capacity, spec.grid_step, "capacity"),
                           _units(spec.max_order, spec.grid_step, "max_order"))) + 1
    return float(Fraction(k) / tail**k)


# -- the hitting-time chain with a jump at ell ---------------------------
@dataclass(frozen=True)
class Remark1Spec:
    interior_grid: tuple
    cost: float = 1.0

    def __post_init__(self):
        grid = tuple(float(x) for x in self.interior_grid)
        if any(not 0.0 < x < GOLDEN_ELL for x in grid):
            raise ModelError("grid points must lie strictly between 0 and ell")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ModelError("grid must be strictly increasing")
        if self.cost < 0:
            raise ModelError("cost must be nonnegative")
        object.__setattr__(self, "interior_grid", grid)


def build_remark1_mdp(spec) -> FiniteMdp:
    """States ``0``, the interior grid, then ``ell``; one action ``a0``.

    From 0 the chain jumps to ``ell``; from interior ``x`` it stays with
    probability ``x^2``, drops to 0 with probability ``x`` and jumps to
    ``ell`` otherwise; from ``ell`` it drops to 0 with probability ``ell``.
    """
    if not isinstance(spec, Remark1Spec):
        spec = Remark1Spec(tuple(spec))
    grid = spec.interior_grid
    ell = len(grid) + 1
    states = ["0"] + [repr(x) for x in grid] + [ELL_LABEL]
    kernel = [[{ell: 1.0}]]
    for i, x in enumerate(grid, start=1):
        kernel.append([{i: x * x, ell: 1.0 - x - x * x, 0: x}])
    kernel.append([{0: GOLDEN_ELL, ell: 1.0 - GOLDEN_ELL}])
    cost = [[spec.cost]] * len(states)
    return FiniteMdp.from_rows(states, [["a0"]] * len(states), kernel, cost)


def remark1_closed_form(grid):
    """Worst-case expected epochs before hitting ``ell`` on the grid model."""
    return np.array([1.0] + [1.0 / (1.0 - x) for x in grid] + [1.0 + GOLDEN_ELL])


# -- simulation ----------------------------------------------------------
@dataclass(frozen=True)
class SimulationResult:
    mean: float
    stderr: float
    per_replication: np.ndarray


def simulate_policy(m: FiniteMdp, policy, start, horizon, replications, seed) -> SimulationResult:
    """Monte-Carlo long-run average cost of a stationary policy.

    Replication ``i`` draws its uniforms from the ``i``-th child of
    ``SeedSequence(seed)``, so results depend only on ``seed``.
    """
    ensure_valid(m)
    if not m.is_stochastic():
        raise ModelError("simulation needs a stochastic kernel")
    if horizon < 1 or replications < 1:
        raise ValueError("horizon and replications must be positive")
    phi = check_policy(m, policy)
    x0 = m.state_index(start)
    children = np.random.SeedSequence(seed).spawn(replications)
    uniforms = np.stack([np.random.default_rng(s).random(horizon) for s in children])
    per = kernels.simulate(m.row_start, m.indptr, m.indices, m.data, m.cost,
                           phi, x0, uniforms)
    per = np.asarray(per, dtype=float)
    se = float(per.std(ddof=1) / math.sqrt(replications)) if replications > 1 else 0.0
    return SimulationResult(float(per.mean()), se, per)
