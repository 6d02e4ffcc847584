"""Command-line surface: cost reports, cost tables, search, sampling,
frontier selection, visualization, and synthetic data generation.

Every subcommand is reproducible given its inputs and --seed. Progress goes
to stderr; reports go to stdout or output files, written atomically.
Exit codes: 0 success, 1 usage error, 2 invalid input, 3 runtime abort.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import cost_model, pareto, search_space, toy_task
from .gumbel import ThetaMatrix
from .supernet import (
    SearchAbort,
    SearchConfig,
    Supernet,
    result_to_json,
    search,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_ABORT = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _log(msg: str):
    print(msg, file=sys.stderr)


def _atomic_write(path, data: str | bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise UsageError(f"resolution must look like 1024x2048, got {text!r}") from None


def _load_space(name_or_path: str) -> search_space.MacroArch:
    if name_or_path in ("small", "large", "xlarge"):
        return search_space.builtin_space(name_or_path)
    if name_or_path in toy_task.TOY_SPACES:
        return toy_task.TOY_SPACES[name_or_path]()
    with open(name_or_path) as fh:
        return search_space.load_search_space(fh)


def _load_arch_path(name_or_path: str) -> search_space.ArchPath:
    try:
        return search_space.builtin_paths(name_or_path)
    except search_space.SearchSpaceError:
        pass
    with open(name_or_path) as fh:
        return search_space.load_path(fh)


# ----- cost ------------------------------------------------------------------


def _cmd_cost(args) -> int:
    macro = _load_space(args.space)
    path = _load_arch_path(args.path)
    res = _parse_resolution(args.res)
    rows = cost_model.stage_report(path, macro, res)
    total_macs = sum(r["macs"] for r in rows)
    total_params = sum(r["params"] for r in rows)
    intensity = cost_model.arithmetic_intensity(path, macro, res)
    if args.csv:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["stage", "op", "macs", "params"])
        for r in rows:
            writer.writerow([r["stage"], r["op"], r["macs"], r["params"]])
        writer.writerow(["total", "", total_macs, total_params])
        sys.stdout.write(buf.getvalue())
    else:
        print(f"space {macro.name}  resolution {res[0]}x{res[1]}")
        print(f"{'stage':<14} {'op':<14} {'MACs':>14} {'params':>10}")
        for r in rows:
            print(f"{r['stage']:<14} {r['op']:<14} {r['macs']:>14,} {r['params']:>10,}")
        print(f"{'total':<14} {'':<14} {total_macs:>14,} {total_params:>10,}")
        print(f"GMACs: {total_macs / 1e9:.3f}")
        print(f"params (M): {total_params / 1e6:.3f}")
        print(f"arithmetic intensity (MACs/byte): {intensity:.3f}")
    return EXIT_OK


# ----- table -----------------------------------------------------------------


def _mac_table_csv(table: cost_model.CostTable, macro) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["superblock", "candidate", "macs"])
    for sb in macro.superblocks:
        for j, cand in enumerate(search_space.CANDIDATES):
            if sb.admissible(cand):
                writer.writerow([sb.index, j, int(table.costs[sb.index, j])])
    return buf.getvalue()


def _cmd_table(args) -> int:
    macro = _load_space(args.space)
    res = _parse_resolution(args.res)
    if args.action == "build":
        table = cost_model.build_mac_table(macro, res)
        text = _mac_table_csv(table, macro)
    elif args.action == "synth":
        model = cost_model.RooflineModel(
            peak_mac_rate=args.peak, memory_bandwidth=args.bandwidth,
            bytes_per_element=args.bytes_per_element,
        )
        table = cost_model.synth_latency_table(macro, model, res)
        text = cost_model.dump_latency_table(table, macro)
    else:  # load: validate a measured table
        with open(args.file) as fh:
            table = cost_model.load_latency_table(fh, macro, res)
        _log(f"latency table ok: {table.costs.shape[0]} superblocks")
        text = cost_model.dump_latency_table(table, macro)
    if args.out:
        _atomic_write(args.out, text)
        _log(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ----- search ----------------------------------------------------------------


def _dataset_from_args(args, config: SearchConfig):
    if args.data:
        train = toy_task.read_dataset(Path(args.data) / "train.bin", split="train")
        val = toy_task.read_dataset(Path(args.data) / "val.bin", split="val")
        descriptor = {"source": str(args.data)}
        return train, val, descriptor
    seed = config.seed if args.data_seed is None else args.data_seed
    train = toy_task.generate(seed, args.train_size, args.difficulty, "train",
                              image_size=args.image_size)
    val = toy_task.generate(seed, args.val_size, args.difficulty, "val",
                            image_size=args.image_size)
    descriptor = {
        "seed": seed,
        "train_size": args.train_size,
        "val_size": args.val_size,
        "difficulty": args.difficulty,
        "image_size": args.image_size,
    }
    return train, val, descriptor


def _objective_table(args, macro, res) -> cost_model.CostTable:
    if args.objective == "macs":
        return cost_model.build_mac_table(macro, res)
    if args.latency_table:
        with open(args.latency_table) as fh:
            return cost_model.load_latency_table(fh, macro, res)
    peak, bw, bpe = (float(x) for x in args.roofline.split(","))
    model = cost_model.RooflineModel(peak, bw, int(bpe))
    return cost_model.synth_latency_table(macro, model, res)


def _cmd_search(args) -> int:
    with open(args.config) as fh:
        cfg_doc = json.load(fh)
    if args.alpha is not None:
        cfg_doc["alpha"] = args.alpha
    if args.seed is not None:
        cfg_doc["seed"] = args.seed
    config = SearchConfig.from_dict(cfg_doc)
    macro = _load_space(args.space)
    res = _parse_resolution(args.res)
    table = _objective_table(args, macro, res)
    train, _val, descriptor = _dataset_from_args(args, config)
    _log(f"searching {macro.name} with {config.epochs} epochs "
         f"x {config.steps_per_epoch} steps (objective {table.metric})")
    result = search(config, macro, table, train)
    out = Path(args.out)
    doc = result.to_dict()
    doc["dataset"] = descriptor
    doc["table_resolution"] = list(table.resolution)
    _atomic_write(out / "result.json",
                  json.dumps(doc, sort_keys=True, indent=2) + "\n")
    buf = io.BytesIO()
    np.savez(buf, **result.supernet.state_dict())
    _atomic_write(out / "weights.npz", buf.getvalue())
    traj = io.StringIO()
    writer = csv.writer(traj, lineterminator="\n")
    writer.writerow(["epoch", "loss", "task_loss", "resource_loss"])
    for i, row in enumerate(result.trajectory):
        writer.writerow([i, row["loss"], row["task_loss"], row["resource_loss"]])
    _atomic_write(out / "trajectory.csv", traj.getvalue())
    if table.metric == "latency_ms":
        _atomic_write(out / "table.csv", cost_model.dump_latency_table(table, macro))
    else:
        _atomic_write(out / "table.csv", _mac_table_csv(table, macro))
    _log(f"search complete; artifacts in {out}")
    return EXIT_OK


def _load_result_dir(result_dir: Path):
    with open(result_dir / "result.json") as fh:
        doc = json.load(fh)
    space_name = doc["space"]
    macro = _load_space(space_name)
    net = Supernet(macro, seed=doc["config"]["seed"])
    with np.load(result_dir / "weights.npz") as archive:
        net.load_state_dict(dict(archive))
    theta = ThetaMatrix(np.array(doc["theta"]), np.array(doc["active_mask"], dtype=bool))
    net.set_theta(theta)
    metric = doc["cost_metric"]
    res = tuple(doc["table_resolution"])
    if metric == "latency_ms":
        with open(result_dir / "table.csv") as fh:
            table = cost_model.load_latency_table(fh, macro, res)
    else:
        table = cost_model.build_mac_table(macro, res)
    return doc, macro, net, theta, table


def _regen_val(doc) -> toy_task.ToyDataset:
    ds = doc["dataset"]
    if "source" in ds:
        return toy_task.read_dataset(Path(ds["source"]) / "val.bin", split="val")
    return toy_task.generate(ds["seed"], ds["val_size"], ds["difficulty"], "val",
                             image_size=ds["image_size"])


def _cmd_sample(args) -> int:
    result_dir = Path(args.result)
    doc, macro, net, theta, table = _load_result_dir(result_dir)
    val = _regen_val(doc)
    rng = np.random.default_rng(args.seed)
    paths = pareto.sample_paths(theta, args.n, rng)
    _log(f"scoring {len(paths)} sampled paths ({len(set(p.choices for p in paths))} unique)")
    points = pareto.score_paths(paths, net, val, table)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["cost", "score", "path"])
    for p in points:
        writer.writerow([repr(p.cost), repr(p.score), " ".join(p.path.mnemonics())])
    _atomic_write(args.out, buf.getvalue())
    _log(f"wrote {args.out}")
    return EXIT_OK


def _read_samples(path) -> list[pareto.ParetoPoint]:
    points = []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            points.append(
                pareto.ParetoPoint(
                    path=search_space.ArchPath(
                        tuple(search_space.candidate_index(m)
                              for m in row["path"].split())
                    ),
                    cost=float(row["cost"]),
                    score=float(row["score"]),
                )
            )
    return points


def _frontier_svg(points, frontier) -> str:
    width, height, margin = 640, 480, 50
    costs = [p.cost for p in points]
    scores = [p.score for p in points]
    lo_c, hi_c = min(costs), max(costs)
    lo_s, hi_s = min(scores), max(scores)
    span_c = (hi_c - lo_c) or 1.0
    span_s = (hi_s - lo_s) or 1.0

    def xy(p):
        x = margin + (p.cost - lo_c) / span_c * (width - 2 * margin)
        y = height - margin - (p.score - lo_s) / span_s * (height - 2 * margin)
        return x, y

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width // 2}" y="{height - 10}" text-anchor="middle" '
        f'font-size="12">cost</text>',
        f'<text x="14" y="{height // 2}" font-size="12" '
        f'transform="rotate(-90 14 {height // 2})">score</text>',
    ]
    for p in points:
        x, y = xy(p)
        parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="#9dafc4"/>')
    coords = " ".join(f"{xy(p)[0]:.1f},{xy(p)[1]:.1f}" for p in frontier)
    parts.append(f'<polyline points="{coords}" fill="none" stroke="#c0392b" '
                 f'stroke-width="1.5"/>')
    for p in frontier:
        x, y = xy(p)
        parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="4" fill="#c0392b"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _cmd_pareto(args) -> int:
    points = _read_samples(args.samples)
    frontier = pareto.pareto_frontier(points)
    prefix = Path(args.out_prefix)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["cost", "score", "path"])
    for p in frontier:
        writer.writerow([repr(p.cost), repr(p.score), " ".join(p.path.mnemonics())])
    _atomic_write(prefix.with_suffix(".csv"), buf.getvalue())
    doc = [
        {"cost": p.cost, "score": p.score, "path": p.path.mnemonics()}
        for p in frontier
    ]
    _atomic_write(prefix.with_suffix(".json"),
                  json.dumps(doc, sort_keys=True, indent=2) + "\n")
    _atomic_write(prefix.with_suffix(".svg"), _frontier_svg(points, frontier))
    if args.target is not None:
        chosen, within = pareto.select(frontier, args.target)
        _atomic_write(
            prefix.parent / "selected_path.json",
            json.dumps(chosen.path.mnemonics(), indent=2) + "\n",
        )
        flag = "" if within else " (over budget: cheapest point)"
        _log(f"selected cost={chosen.cost:.6g} score={chosen.score:.4f}{flag}")
    _log(f"frontier size {len(frontier)} of {len(points)} points")
    return EXIT_OK


# ----- visualize ---------------------------------------------------------------


def render_path_text(macro, path) -> str:
    check = search_space.validate_path(path, macro)
    if not check.valid:
        raise search_space.SearchSpaceError(f"invalid path: {check.reason}")
    lines = [f"space {macro.name}  ({macro.num_superblocks} superblocks)"]
    lines.append("idx  os   channels      block")
    for sb, j in zip(macro.superblocks, path.choices):
        cand = search_space.CANDIDATES[j]
        marker = "v" if sb.stride == 2 else " "
        name = cand.mnemonic if not cand.is_skip else "--pass-through--"
        lines.append(
            f"{sb.index:>3} {sb.output_stride:>3} {marker} "
            f"{sb.c_in:>4}->{sb.c_out:<4}  {name}"
        )
    return "\n".join(lines) + "\n"


def _cmd_visualize(args) -> int:
    macro = _load_space(args.space)
    path = _load_arch_path(args.path)
    text = render_path_text(macro, path)
    if args.out:
        _atomic_write(args.out, text)
        _log(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ----- synth-data --------------------------------------------------------------


def _cmd_synth_data(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train = toy_task.generate(args.seed, args.train_size, args.difficulty, "train",
                              image_size=args.image_size)
    val = toy_task.generate(args.seed, args.val_size, args.difficulty, "val",
                            image_size=args.image_size)
    m_train = toy_task.write_dataset(train, out / "train.bin")
    m_val = toy_task.write_dataset(val, out / "val.bin")
    manifest = {"train": m_train, "val": m_val}
    _atomic_write(out / "manifest.json",
                  json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    _log(f"wrote {out}/train.bin, {out}/val.bin, {out}/manifest.json")
    return EXIT_OK


# ----- wiring -------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="gumbelnas", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cost", help="report MACs/params/intensity for a path")
    p.add_argument("--space", required=True)
    p.add_argument("--path", required=True)
    p.add_argument("--res", default="1024x2048")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=_cmd_cost)

    p = sub.add_parser("table", help="build, synthesize, or validate cost tables")
    p.add_argument("action", choices=["build", "synth", "load"])
    p.add_argument("--space", required=True)
    p.add_argument("--res", default="1024x2048")
    p.add_argument("--peak", type=float, default=1.0e12)
    p.add_argument("--bandwidth", type=float, default=1.0e11)
    p.add_argument("--bytes-per-element", type=int, default=4)
    p.add_argument("--file", help="measured latency CSV (for load)")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_table)

    p = sub.add_parser("search", help="run the supernetwork search")
    p.add_argument("--config", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--objective", choices=["macs", "latency"], default="macs")
    p.add_argument("--latency-table")
    p.add_argument("--roofline", default="1e12,1e11,4",
                   help="peak_mac_rate,bandwidth,bytes_per_element")
    p.add_argument("--res", default="256x256", help="cost table resolution")
    p.add_argument("--data", help="directory from synth-data")
    p.add_argument("--data-seed", type=int)
    p.add_argument("--train-size", type=int, default=512)
    p.add_argument("--val-size", type=int, default=128)
    p.add_argument("--difficulty", type=float, default=1.0)
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("sample", help="sample and score discrete paths")
    p.add_argument("--result", required=True)
    p.add_argument("--n", type=int, default=pareto.DEFAULT_SAMPLE_COUNT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("pareto", help="extract the frontier and select a point")
    p.add_argument("--samples", required=True)
    p.add_argument("--target", type=float)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=_cmd_pareto)

    p = sub.add_parser("visualize", help="render a path as a block diagram")
    p.add_argument("--space", required=True)
    p.add_argument("--path", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_visualize)

    p = sub.add_parser("synth-data", help="generate the synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-size", type=int, default=512)
    p.add_argument("--val-size", type=int, default=128)
    p.add_argument("--difficulty", type=float, default=1.0)
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return EXIT_USAGE
    try:
        return args.func(args)
    except SearchAbort as exc:
        _log(f"aborted: {exc}")
        return EXIT_ABORT
    except (search_space.SearchSpaceError, cost_model.CostModelError, ValueError,
            KeyError, OSError) as exc:
        _log(f"error: {exc}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
