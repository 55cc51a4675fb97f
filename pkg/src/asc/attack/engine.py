"""F-ASC / O-ASC pipelines and the fixed-mask baseline."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from ..contour import GroundTruth, budget_pixels, prior_contour
from ..evaluation.metrics import is_detected
from ..imagecore import Pattern, apply_pattern, mask_of, pixel_set
from .colors import optimize_colors
from .loss import LossSpec
from .sampling import sample_pixel_set

INIT_COLOR = 0.5


class BudgetViolation(AssertionError):
    pass


@dataclass(frozen=True)
class AttackConfig:
    step_size: float = 0.01
    color_steps_per_round: int = 40
    rounds: int = 60
    sample_radius: int = 3
    move_fraction: float = 0.1
    budget_fraction: float = 0.05
    rng_seed: int = 0
    loss: LossSpec = field(default_factory=LossSpec)
    # "greedy" accepts strictly better candidates only; "anneal" also accepts
    # worse ones with probability exp(delta / temperature)
    acceptance: str = "greedy"
    temperature: float = 0.0
    success_check: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.step_size <= 0 or self.color_steps_per_round < 0 or self.rounds < 0:
            raise ValueError("step_size must be positive; steps and rounds non-negative")
        if self.sample_radius < 1:
            raise ValueError("sample_radius must be >= 1")
        if not 0.0 < self.move_fraction <= 1.0:
            raise ValueError("move_fraction must lie in (0, 1]")
        if not 0.0 < self.budget_fraction <= 1.0:
            raise ValueError("budget_fraction must lie in (0, 1]")
        if self.acceptance not in ("greedy", "anneal"):
            raise ValueError(f"unknown acceptance rule {self.acceptance!r}")

    def echo(self) -> dict:
        d = asdict(replace(self, success_check=None))
        d.pop("success_check")
        return d


@dataclass
class AttackResult:
    pattern: Pattern
    trace: list
    incumbent_trace: list
    success: bool
    l0_used: int
    budget: int
    rounds_used: int
    wall_time: float
    value: float
    evaluations: int = 0
    dead: bool = False
    diagnostic: str = ""
    method: str = ""
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        coords = pixel_set(self.pattern.mask)
        return {
            "method": self.method,
            "success": self.success,
            "l0_used": self.l0_used,
            "budget": self.budget,
            "rounds_used": self.rounds_used,
            "value": self.value,
            "evaluations": self.evaluations,
            "wall_time": self.wall_time,
            "dead_gradient": self.dead,
            "diagnostic": self.diagnostic,
            "incumbent_trace": list(self.incumbent_trace),
            "trace": list(self.trace),
            "pixels": [list(p) for p in coords],
            "colors": [self.pattern.colors[r, c].tolist() for r, c in coords],
            "config": self.config,
        }


def default_success(model, composite, gt) -> bool:
    """The attack succeeds once the target no longer meets the detection criterion."""
    return not is_detected(model.detect(composite), gt)


class _Run:
    """Bookkeeping shared by one attack: budget guard, traces, success checks."""

    def __init__(self, model, x, gt, config, method):
        self.model, self.x, self.gt, self.cfg = model, x, gt, config
        self.budget = budget_pixels(gt, config.budget_fraction)
        self.check = config.success_check or default_success
        self.trace, self.incumbent_trace = [], []
        self.evaluations = 0
        self.method = method
        self.t0 = time.perf_counter()

    def colors(self, mask, colors0):
        n = int(mask.sum())
        if n > self.budget:
            raise BudgetViolation(f"mask with {n} pixels exceeds budget {self.budget}")
        res = optimize_colors(self.model, self.x, mask, colors0, self.cfg.color_steps_per_round,
                              self.cfg.step_size, self.gt, self.cfg.loss)
        self.trace.extend(res.trace)
        self.evaluations += res.evaluations
        return res

    def succeeded(self, mask, colors) -> bool:
        return bool(self.check(self.model, apply_pattern(self.x, Pattern(mask, colors)), self.gt))

    def result(self, mask, colors, value, success, rounds, dead=False, diagnostic=""):
        return AttackResult(
            pattern=Pattern(mask, colors),
            trace=self.trace,
            incumbent_trace=self.incumbent_trace,
            success=success,
            l0_used=int(mask.sum()),
            budget=self.budget,
            rounds_used=rounds,
            wall_time=time.perf_counter() - self.t0,
            value=float(value),
            evaluations=self.evaluations,
            dead=dead,
            diagnostic=diagnostic,
            method=self.method,
            config=self.cfg.echo(),
        )


def _grow(coords, colors, gt, budget, seed):
    """Top ``coords`` up to ``budget`` with unused prior-contour pixels (mid-grey)."""
    taken = set(coords)
    extra = [p for p in pixel_set(prior_contour(gt, budget, seed)) if p not in taken]
    extra += [p for p in pixel_set(gt.segmentation) if p not in taken and p not in set(extra)]
    add = extra[:budget - len(coords)]
    colors = colors.copy()
    for r, c in add:
        colors[r, c] = INIT_COLOR
    return list(coords) + add, colors


def asc_optimize(model, x, gt: GroundTruth, config: AttackConfig, init: Pattern | None = None,
                 method: str = "oasc") -> AttackResult:
    """Alternate color ascent with local pixel relocation, greedily.

    Without ``init`` the search starts from the budget-fitted prior contour
    and first optimizes its colors (that first step alone is F-ASC). With
    ``init`` it starts from that pattern as the incumbent; if the pattern is
    below budget, the first proposal tops it up with contour pixels.
    """
    x = np.asarray(x, dtype=np.float64)
    run = _Run(model, x, gt, config, method)
    rng = np.random.default_rng(config.rng_seed)
    seg = gt.segmentation
    h, w = seg.shape

    if init is None:
        coords = pixel_set(prior_contour(gt, run.budget, config.rng_seed))
        colors = np.full(x.shape, INIT_COLOR)
        if not coords:
            return run.result(np.zeros((h, w), np.uint8), colors, 0.0, False, 0, True, "empty prior")
        mask = mask_of(coords, h, w)
        res = run.colors(mask, colors)
        colors, value, dead_all = res.colors, res.value, res.dead
    else:
        coords = pixel_set(init.mask)
        mask = mask_of(coords, h, w)
        if len(coords) > run.budget:
            raise BudgetViolation(f"initial pattern has {len(coords)} pixels, budget {run.budget}")
        colors = np.array(init.colors)
        lg = model.loss_and_grad(apply_pattern(x, Pattern(mask, colors)), gt, config.loss)
        run.trace.append(lg.value)
        run.evaluations += 1
        value, dead_all = lg.value, lg.dead
    run.incumbent_trace.append(value)
    if run.succeeded(mask, colors):
        return run.result(mask, colors, value, True, 0)

    # the search point may wander under annealing; the incumbent is the best seen
    best = (coords, mask, colors, value)
    pending_grow = init is not None and len(coords) < run.budget
    for k in range(1, config.rounds + 1):
        res = run.colors(mask, colors)
        dead_all = dead_all and res.dead
        if res.value >= value:
            colors, value = res.colors, res.value
        if value > best[3]:
            best = (coords, mask, colors, value)
            if run.succeeded(mask, colors):
                run.incumbent_trace.append(value)
                return run.result(mask, colors, value, True, k)

        if pending_grow:
            cand_coords, cand_colors = _grow(coords, colors, gt, run.budget, config.rng_seed)
            pending_grow = False
        else:
            cand_coords = sample_pixel_set(coords, seg, config.sample_radius,
                                           config.move_fraction, run.budget, rng)
            cand_colors = colors.copy()
            for old, new in zip(coords, cand_coords):
                if old != new:
                    if max(abs(old[0] - new[0]), abs(old[1] - new[1])) > config.sample_radius:
                        raise AssertionError("relocation exceeded the sampling radius")
                    cand_colors[new] = INIT_COLOR
        cand_mask = mask_of(cand_coords, h, w)
        cand = run.colors(cand_mask, cand_colors)
        dead_all = dead_all and cand.dead
        delta = cand.value - value
        accept = delta > 0
        if not accept and config.acceptance == "anneal" and config.temperature > 0:
            accept = rng.uniform() < math.exp(delta / config.temperature)
        if accept:
            coords, mask, colors, value = cand_coords, cand_mask, cand.colors, cand.value
        improved = value > best[3]
        if improved:
            best = (coords, mask, colors, value)
        run.incumbent_trace.append(best[3])
        if improved and run.succeeded(mask, colors):
            return run.result(mask, colors, value, True, k)

    coords, mask, colors, value = best
    diagnostic = "gradient dead on every round" if dead_all else ""
    return run.result(mask, colors, value, False, config.rounds, dead_all, diagnostic)


def f_asc(model, x, gt, config: AttackConfig) -> AttackResult:
    """Prior contour mask with optimized colors; no mask search."""
    return asc_optimize(model, x, gt, replace(config, rounds=0), method="fasc")


def o_asc(model, x, gt, config: AttackConfig) -> AttackResult:
    """F-ASC first; only failures go on to the full alternating search."""
    first = f_asc(model, x, gt, config)
    if first.success:
        first.method = "oasc"
        first.config = config.echo()
        return first
    res = asc_optimize(model, x, gt, config, init=first.pattern)
    res.trace = first.trace + res.trace
    res.incumbent_trace = first.incumbent_trace + res.incumbent_trace
    res.evaluations += first.evaluations
    res.wall_time += first.wall_time
    return res


def attack_with_pattern(model, x, gt, mask, config: AttackConfig, method: str = "pattern") -> AttackResult:
    """Baseline: a fixed mask with optimized colors."""
    x = np.asarray(x, dtype=np.float64)
    run = _Run(model, x, gt, config, method)
    mask = np.asarray(mask, dtype=np.uint8)
    colors = np.full(x.shape, INIT_COLOR)
    if not mask.any():
        lg = model.loss_and_grad(x, gt, config.loss)
        run.trace.append(lg.value)
        run.incumbent_trace.append(lg.value)
        return run.result(mask, colors, lg.value, run.succeeded(mask, colors), 0, True, "empty mask")
    res = run.colors(mask, colors)
    run.incumbent_trace.append(res.value)
    diagnostic = "gradient dead" if res.dead else ""
    return run.result(mask, res.colors, res.value, run.succeeded(mask, res.colors), 0, res.dead, diagnostic)
