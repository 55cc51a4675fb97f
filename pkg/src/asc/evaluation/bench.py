"""Successful-detection-rate benchmark: every pattern at every budget on every scene."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..attack.engine import AttackConfig, asc_optimize, attack_with_pattern, f_asc, o_asc
from ..contour import budget_pixels
from ..imagecore import apply_pattern
from ..patterns import FIXED_PATTERNS, PATTERN_NAMES, make_pattern_mask
from .metrics import best_match, is_detected, sdr

log = logging.getLogger(__name__)

BUDGETS = (0.05, 0.035)
ROW_FIELDS = ("image_id", "pattern", "budget_fraction", "detected", "best_iou", "best_conf",
              "l0_used", "rounds", "wall_ms")


def run_seed(seed: int, image_id: int, pattern: str, budget: float) -> int:
    """Independent RNG seed for one (global seed, image, pattern, budget) cell."""
    ss = np.random.SeedSequence([seed, image_id, PATTERN_NAMES.index(pattern), round(budget * 10000)])
    return int(ss.generate_state(1)[0])


@dataclass
class BenchReport:
    patterns: tuple
    budgets: tuple
    clean_sdr: float
    table: dict
    rows: list
    clean_rows: list
    ordering: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def table_csv(self) -> str:
        """SDR grid: a clean row, then one row per pattern and budget (percent)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pattern", "budget_percent", "sdr"])
        w.writerow(["clean", "", f"{self.clean_sdr:.4f}"])
        for name in self.patterns:
            for b in self.budgets:
                w.writerow([name, f"{b * 100:.1f}", f"{self.table[(name, b)]:.4f}"])
        return buf.getvalue()

    def rows_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, ROW_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in self.clean_rows + self.rows:
            w.writerow(row if timing else {**row, "wall_ms": 0})
        return buf.getvalue()

    def ordering_violations(self) -> list:
        """Images whose warm-started larger-budget loss fell below the smaller-budget one."""
        return [o for o in self.ordering if o["j_large"] < o["j_small"]]

    def to_json(self) -> dict:
        return {
            "clean_sdr": self.clean_sdr,
            "table": [{"pattern": p, "budget_fraction": b, "sdr": self.table[(p, b)]}
                      for p in self.patterns for b in self.budgets],
            "rows": self.clean_rows + self.rows,
            "ordering": self.ordering,
            "skipped": self.skipped,
            "config": self.config,
            "wall_time": self.wall_time,
        }


def _row(model, scene, pattern, budget, composite, l0, rounds, wall):
    dets = model.detect(composite)
    biou, bconf = best_match(dets, scene.target.bbox)
    return {
        "image_id": scene.image_id, "pattern": pattern, "budget_fraction": budget,
        "detected": int(is_detected(dets, scene.target)),
        "best_iou": round(biou, 6), "best_conf": round(bconf, 6),
        "l0_used": l0, "rounds": rounds, "wall_ms": round(wall * 1000.0, 1),
    }


def attack_scene(model, scene, patterns, budgets, config: AttackConfig, seed: int,
                 check_ordering: bool = True):
    """All rows for one scene, plus the warm-start ordering record."""
    gt, x = scene.target, scene.image
    rows, ordering = [], None
    results = {}
    for name in patterns:
        for b in budgets:
            cfg = replace(config, budget_fraction=b, rng_seed=run_seed(seed, scene.image_id, name, b))
            if name in FIXED_PATTERNS:
                mask = make_pattern_mask(name, gt, budget_pixels(gt, b))
                res = attack_with_pattern(model, x, gt, mask, cfg, method=name)
            elif name == "fasc":
                res = f_asc(model, x, gt, cfg)
            else:
                res = o_asc(model, x, gt, cfg)
            results[(name, b)] = (res, cfg)
            rows.append(_row(model, scene, name, b, apply_pattern(x, res.pattern),
                             res.l0_used, res.rounds_used, res.wall_time))
    if check_ordering and "oasc" in patterns and len(budgets) >= 2:
        small, large = min(budgets), max(budgets)
        res_small, cfg_small = results[("oasc", small)]
        warm = asc_optimize(model, x, gt, replace(cfg_small, budget_fraction=large),
                            init=res_small.pattern)
        ordering = {"image_id": scene.image_id, "j_small": res_small.value, "j_large": warm.value,
                    "budget_small": small, "budget_large": large}
    return rows, ordering


_WORKER = {}


def _init_worker(model, patterns, budgets, config, seed, check_ordering):
    _WORKER.update(model=model, args=(patterns, budgets, config, seed, check_ordering))


def _work(scene):
    patterns, budgets, config, seed, check = _WORKER["args"]
    return attack_scene(_WORKER["model"], scene, patterns, budgets, config, seed, check)


def run_bench(model, scenes, patterns=PATTERN_NAMES, budgets=BUDGETS, config: AttackConfig | None = None,
              seed: int = 0, workers: int = 1, check_ordering: bool = True, progress=None) -> BenchReport:
    """Attack every scene with every pattern at every budget and tabulate SDR.

    Scenes whose image does not fit the model are skipped and listed in
    the report. Results do not depend on ``workers``: each cell draws from
    its own seed and rows are ordered by image id.
    """
    config = config or AttackConfig()
    patterns, budgets = tuple(patterns), tuple(budgets)
    for name in patterns:
        if name not in PATTERN_NAMES:
            raise ValueError(f"unknown pattern {name!r}; expected one of {PATTERN_NAMES}")
    t0 = time.perf_counter()
    size = getattr(model, "input_size", None)
    usable, skipped = [], []
    for s in scenes:
        if size is not None and s.image.shape != (size, size, 3):
            skipped.append({"image_id": s.image_id, "reason": f"image shape {s.image.shape}"})
            log.warning("skipping image %d: shape %s", s.image_id, s.image.shape)
        else:
            usable.append(s)
    if not usable:
        raise ValueError("no usable scenes to benchmark")

    clean_rows = []
    for s in usable:
        t = time.perf_counter()
        clean_rows.append(_row(model, s, "clean", 0.0, s.image, 0, 0, time.perf_counter() - t))

    outputs = []
    if workers <= 1:
        for i, s in enumerate(usable):
            outputs.append(attack_scene(model, s, patterns, budgets, config, seed, check_ordering))
            if progress:
                progress(i + 1, len(usable))
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker,
                                 initargs=(model, patterns, budgets, config, seed, check_ordering)) as pool:
            for i, out in enumerate(pool.map(_work, usable)):
                outputs.append(out)
                if progress:
                    progress(i + 1, len(usable))

    rows = [r for out, _ in outputs for r in out]
    ordering = [o for _, o in outputs if o is not None]
    table = {}
    for name in patterns:
        for b in budgets:
            table[(name, b)] = sdr([r["detected"] for r in rows
                                    if r["pattern"] == name and r["budget_fraction"] == b])
    return BenchReport(
        patterns=patterns, budgets=budgets,
        clean_sdr=sdr([r["detected"] for r in clean_rows]),
        table=table, rows=rows, clean_rows=clean_rows, ordering=ordering, skipped=skipped,
        config={"seed": seed, "patterns": list(patterns), "budgets": list(budgets),
                "attack": config.echo()},
        wall_time=time.perf_counter() - t0,
    )


def write_report(report: BenchReport, out_dir, timing: bool = True):
    """Write ``sdr_table.csv``, ``rows.csv`` and ``bench.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sdr_table.csv").write_text(report.table_csv())
    (out / "rows.csv").write_text(report.rows_csv(timing))
    (out / "bench.json").write_text(json.dumps(report.to_json(), indent=2))
    return out
