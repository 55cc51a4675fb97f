"""Command-line entry point: ``asc gen-data | train | attack | bench | render``."""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_CONFIG = 0, 1, 2, 3

log = logging.getLogger("asc")

# attack settings that may come from a config file or a flag
TUNABLE = {
    "step_size": float,
    "color_steps_per_round": int,
    "rounds": int,
    "sample_radius": int,
    "move_fraction": float,
    "acceptance": str,
    "temperature": float,
}


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _setup_logging():
    level = os.environ.get("ASC_LOG", "error").lower()
    levels = {"error": logging.ERROR, "warning": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"ASC_LOG must be one of {sorted(levels)}, got {level!r}")
    logging.basicConfig(stream=sys.stderr, level=levels[level],
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def read_config_file(path) -> dict:
    """``key = value`` lines (``#`` comments, optional ``[section]`` headers) into typed values."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text if text.lstrip().startswith("[") else "[asc]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            if key not in TUNABLE:
                raise ConfigError(f"{path}: unknown key {key!r}; expected one of {sorted(TUNABLE)}")
            raw = raw.strip().strip('"').strip("'")
            try:
                out[key] = TUNABLE[key](raw)
            except ValueError as exc:
                raise ConfigError(f"{path}: bad value for {key}: {raw!r}") from exc
    return out


def attack_config(args, budget: float, seed: int):
    from .attack.engine import AttackConfig

    values = read_config_file(args.config) if args.config else {}
    for key in TUNABLE:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    try:
        return AttackConfig(budget_fraction=budget, rng_seed=seed, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _add_tunables(p):
    g = p.add_argument_group("attack settings (override the config file)")
    g.add_argument("--step-size", dest="step_size", type=float)
    g.add_argument("--color-steps", dest="color_steps_per_round", type=int)
    g.add_argument("--rounds", type=int)
    g.add_argument("--sample-radius", dest="sample_radius", type=int)
    g.add_argument("--move-fraction", dest="move_fraction", type=float)
    g.add_argument("--acceptance", choices=("greedy", "anneal"))
    g.add_argument("--temperature", type=float)


def _budget(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"budget must be a number, got {text!r}")
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"budget must lie in (0, 1], got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    from .patterns import PATTERN_NAMES

    parser = _Parser(prog="asc", description="Contour-prior sparse attacks on object detectors.")
    parser.add_argument("--config", help="key=value file of attack settings")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="render a synthetic scene dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the toy detector")
    p.add_argument("--data", required=True, help="dataset directory or annotations.json")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.005)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="weights file to write")

    p = sub.add_parser("attack", help="attack one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--ann", required=True, help="COCO-style annotation file")
    p.add_argument("--ann-id", type=int, help="annotation to attack (default: first one of the image)")
    p.add_argument("--pattern", required=True, choices=PATTERN_NAMES)
    p.add_argument("--budget", type=_budget, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    _add_tunables(p)

    p = sub.add_parser("bench", help="SDR table over a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--patterns", default=",".join(PATTERN_NAMES))
    p.add_argument("--budgets", default="0.05,0.035")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--limit", type=int, help="only the first N images")
    p.add_argument("--out", required=True, help="output directory")
    _add_tunables(p)

    p = sub.add_parser("render", help="side-by-side panel from an attack result")
    p.add_argument("--result", required=True, help="result.json written by 'attack'")
    p.add_argument("--out", required=True, help="PNG to write")
    p.add_argument("--scale", type=int, default=4)
    return parser


# -- commands -----------------------------------------------------------------

def cmd_gen_data(args):
    from .victim.scenes import gen_scenes, save_dataset

    if args.n < 1:
        raise ConfigError("--n must be positive")
    path = save_dataset(gen_scenes(args.n, args.seed), args.out)
    print(json.dumps({"annotations": str(path), "n": args.n, "seed": args.seed}))


def cmd_train(args):
    from .victim.scenes import load_dataset
    from .victim.train import train_tiny

    if args.epochs < 0 or args.lr < 0:
        raise ConfigError("--epochs and --lr must be non-negative")
    scenes = load_dataset(args.data)
    model = train_tiny(scenes, epochs=args.epochs, lr=args.lr, seed=args.seed)
    model.save(args.out)
    print(json.dumps({"val_sdr": model.history.get("val_sdr"), "final_loss":
                      (model.history["loss"] or [None])[-1], "weights": args.out}))


def _target(ann_path, image_path, image, ann_id):
    from .contour import gt_from_coco

    doc = json.loads(Path(ann_path).read_text())
    anns = doc["annotations"] if isinstance(doc, dict) and "annotations" in doc else doc
    if isinstance(anns, dict):
        anns = [anns]
    if ann_id is not None:
        anns = [a for a in anns if int(a.get("id", -1)) == ann_id]
    elif isinstance(doc, dict) and "images" in doc:
        name = Path(image_path).name
        ids = [int(i["id"]) for i in doc["images"] if Path(i["file_name"]).name == name]
        if ids:
            anns = [a for a in anns if int(a["image_id"]) == ids[0]]
    if not anns:
        raise ConfigError(f"no matching annotation in {ann_path}")
    ann = min(anns, key=lambda a: int(a.get("id", 0)))
    h, w = image.shape[:2]
    return gt_from_coco(ann, h, w, "object"), int(ann.get("id", 0))


def cmd_attack(args):
    from .attack.engine import attack_with_pattern, f_asc, o_asc
    from .contour import budget_pixels
    from .imagecore import apply_pattern, load_image, save_image, save_mask
    from .patterns import FIXED_PATTERNS, make_pattern_mask
    from .render import panel, pattern_tiles
    from .victim.tiny import TinyDetector

    model = TinyDetector.load(args.model)
    x = load_image(args.image)
    gt, ann_id = _target(args.ann, args.image, x, args.ann_id)
    cfg = attack_config(args, args.budget, args.seed)
    if args.pattern in FIXED_PATTERNS:
        try:
            mask = make_pattern_mask(args.pattern, gt, budget_pixels(gt, args.budget))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        res = attack_with_pattern(model, x, gt, mask, cfg, method=args.pattern)
    elif args.pattern == "fasc":
        res = f_asc(model, x, gt, cfg)
    else:
        res = o_asc(model, x, gt, cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    composite = apply_pattern(x, res.pattern)
    save_mask(res.pattern.mask, out / "mask.png")
    save_image(np.where(res.pattern.mask[..., None].astype(bool), res.pattern.colors, 0.0),
               out / "colors.png")
    save_image(composite, out / "composite.png")
    save_image(panel(pattern_tiles(x, res.pattern)), out / "panel.png")
    doc = res.to_json()
    doc.update(pattern=args.pattern, image=str(Path(args.image).resolve()), ann_id=ann_id,
               object_area=gt.object_area, seed=args.seed)
    (out / "result.json").write_text(json.dumps(doc, indent=1))
    print(json.dumps({"success": res.success, "l0_used": res.l0_used, "budget": res.budget,
                      "value": res.value, "out": str(out)}))


def _split(text, cast, what):
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise ConfigError(f"bad {what} list {text!r}") from exc


def cmd_bench(args):
    from .evaluation.bench import run_bench, write_report
    from .patterns import PATTERN_NAMES
    from .victim.scenes import load_dataset
    from .victim.tiny import TinyDetector

    patterns = _split(args.patterns, str.strip, "pattern")
    unknown = [p for p in patterns if p not in PATTERN_NAMES]
    if unknown or not patterns:
        raise UsageError(f"unknown pattern(s) {unknown}; expected a subset of {list(PATTERN_NAMES)}")
    budgets = _split(args.budgets, _budget, "budget")
    if not budgets:
        raise ConfigError("no budgets given")
    if args.workers < 1:
        raise ConfigError("--workers must be positive")
    model = TinyDetector.load(args.model)
    scenes = load_dataset(args.data)
    if args.limit is not None:
        scenes = scenes[:args.limit]
    cfg = attack_config(args, budgets[0], args.seed)
    report = run_bench(model, scenes, patterns, budgets, cfg, seed=args.seed, workers=args.workers,
                       progress=lambda i, n: log.info("bench %d/%d", i, n))
    write_report(report, args.out)
    sys.stdout.write(report.table_csv())


def cmd_render(args):
    from .imagecore import Pattern, load_image, save_image, mask_of
    from .render import panel, pattern_tiles

    doc = json.loads(Path(args.result).read_text())
    x = load_image(doc["image"])
    h, w = x.shape[:2]
    coords = [tuple(p) for p in doc["pixels"]]
    colors = np.zeros_like(x)
    for (r, c), rgb in zip(coords, doc.get("colors", [])):
        colors[r, c] = rgb
    pattern = Pattern(mask_of(coords, h, w), colors)
    save_image(panel(pattern_tiles(x, pattern), scale=max(1, args.scale)), args.out)
    print(json.dumps({"out": args.out}))


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "attack": cmd_attack,
            "bench": cmd_bench, "render": cmd_render}


def main(argv=None) -> int:
    from .imagecore import ImageIOError
    from .victim.tiny import WeightsFormatError

    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
        return EXIT_OK
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"asc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ImageIOError, WeightsFormatError, json.JSONDecodeError, KeyError) as exc:
        print(f"asc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"asc: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
