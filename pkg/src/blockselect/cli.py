"""Command-line entry point: ``blockselect {gen,select,compare,backtest,ratecheck}``.

Settings are resolved as built-in defaults, then the ``--config`` JSON file,
then explicit flags (flags win). One global ``--seed`` feeds every random
component through :func:`blockselect.seeds.derive_seed`; the derived values
are written to each command's ``meta.json``.

Outputs are assembled in memory and only written once the command has
succeeded, each file through a temporary name and an atomic rename, so a
failing command leaves no partial files behind.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import compare_methods, equity_curve, filter_trades, pnl_histogram
from .baselines import RfeConfig, run_bca, run_rfe
from .benchmark import BENCHMARK_OCA, BENCHMARK_PARAMS
from .convergence import check_rate_bounds, random_problem, rcd_minimize
from .data import (DataError, SplitSpec, infer_blocks, load_block_map, load_csv,
                   mask_to_json, write_block_map, write_csv)
from .datagen import (TradeList, TradeRecord, benchmark_spec, gen_block_dataset, gen_trades,
                      trades_dataset)
from .gbt import GbtParams
from .oca import OcaConfig, run_oca
from .results import SelectionResult
from .scorer import GbtScorer
from .seeds import derive_seed

METHODS = ("oca", "bca", "rfe")

DEFAULTS = {
    "seed": 0,
    "threads": None,
    "out_dir": ".",
    "preset": "blocks",
    "n": None,
    "data": None,
    "block_map": None,
    "label_column": "label",
    "pnl_column": "pnl",
    "split": "randomized",
    "test_fraction": 1.0 / 3.0,
    "method": "oca",
    "target_fraction": None,
    "trace_out": None,
    "results": [],
    "on": "score",
    "threshold": 0.5,
    "n_bins": 50,
    "timeout_fraction": 0.05,
    "seeds": 50,
    "k_max": 500,
    "cond": 100.0,
    "instances": 1,
    "gbt": {},
    "oca": {},
}


class CliError(Exception):
    pass


# -- settings --------------------------------------------------------------

def _threads(value) -> int:
    if value is None:
        env = os.environ.get("BLOCKSELECT_THREADS")
        if env:
            try:
                value = int(env)
            except ValueError:
                raise CliError(f"BLOCKSELECT_THREADS must be an integer, got {env!r}") from None
        else:
            value = os.cpu_count() or 1
    if value < 1:
        raise CliError("--threads must be >= 1")
    return value


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then every flag that was given."""
    cfg = dict(DEFAULTS)
    if args.config is not None:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise CliError(f"config {args.config} must hold a JSON object")
        unknown = sorted(set(doc) - set(DEFAULTS))
        if unknown:
            raise CliError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(doc)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            cfg[key] = value
    cfg["threads"] = _threads(cfg["threads"])
    return cfg


def _gbt_params(cfg: dict, benchmark: bool) -> GbtParams:
    base = BENCHMARK_PARAMS.to_dict() if benchmark else GbtParams().to_dict()
    base.update(cfg["gbt"])
    base["seed"] = derive_seed(cfg["seed"], "gbt")
    try:
        return GbtParams(**base)
    except TypeError as exc:
        raise CliError(f"bad gbt settings: {exc}") from None


def _oca_config(cfg: dict, benchmark: bool) -> OcaConfig:
    base = BENCHMARK_OCA.to_dict() if benchmark else OcaConfig().to_dict()
    base.update(cfg["oca"])
    try:
        return OcaConfig(**base)
    except TypeError as exc:
        raise CliError(f"bad oca settings: {exc}") from None


def _split(cfg: dict) -> SplitSpec:
    return SplitSpec(cfg["split"], float(cfg["test_fraction"]), derive_seed(cfg["seed"], "split"))


def _meta(command: str, cfg: dict, **extra) -> str:
    seed = int(cfg["seed"])
    doc = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "sub_seeds": {name: derive_seed(seed, name)
                      for name in ("datagen", "split", "gbt", "rcd", "problem")},
        # output locations and worker counts never change the content
        "settings": {k: v for k, v in sorted(cfg.items())
                     if k not in ("threads", "out_dir", "trace_out")},
    }
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"


# -- output ----------------------------------------------------------------

def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out_dir"])
    if not out.is_dir():
        raise CliError(f"output directory {out} does not exist")
    return out


def _commit(files: dict[Path, str]) -> None:
    """Write every file through a temporary sibling, then rename them all."""
    staged = []
    try:
        for path, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
    except OSError:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


def _csv_text(writer_fn, *args, **kw) -> str:
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "t.csv"
        writer_fn(p, *args, **kw)
        return p.read_text()


def _block_map_text(spec, names) -> str:
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "b.json"
        write_block_map(p, spec, names)
        return p.read_text()


# -- commands --------------------------------------------------------------

def cmd_gen(cfg: dict) -> dict[Path, str]:
    out = _out_dir(cfg)
    seed = int(cfg["seed"])
    files = {}
    if cfg["preset"] == "blocks":
        spec = benchmark_spec(derive_seed(seed, "datagen"))
        if cfg["n"] is not None:
            spec = dataclasses.replace(spec, n_samples=int(cfg["n"]))
        X, y, blocks, truth = gen_block_dataset(spec)
        files[out / "data.csv"] = _csv_text(write_csv, X, y)
        files[out / "truth.json"] = json.dumps(
            mask_to_json(truth, X.column_names), indent=2) + "\n"
    elif cfg["preset"] == "trades":
        n = int(cfg["n"]) if cfg["n"] is not None else 1500
        trades = gen_trades(n, timeout_fraction=float(cfg["timeout_fraction"]),
                            seed=derive_seed(seed, "datagen"))
        X, y, pnl, blocks = trades_dataset(trades)
        files[out / "data.csv"] = _csv_text(write_csv, X, y, pnl)
    else:
        raise CliError(f"unknown preset {cfg['preset']!r}; valid presets: blocks, trades")
    files[out / "blocks.json"] = _block_map_text(blocks, X.column_names)
    files[out / "meta.json"] = _meta("gen", cfg, n_rows=X.n_samples, n_features=X.n_features)
    return files


def _load(cfg: dict, with_pnl: bool = False):
    if cfg["data"] is None:
        raise CliError("--data is required")
    X, y, pnl = load_csv(cfg["data"], cfg["label_column"],
                         pnl_column=cfg["pnl_column"] if with_pnl else None)
    if cfg["block_map"] is not None:
        spec = load_block_map(cfg["block_map"], X.column_names)
    else:
        spec = infer_blocks(X.column_names)
    return X, y, pnl, spec


def _trace_csv(result: SelectionResult) -> str:
    lines = ["evaluation,score,popcount,phase"]
    lines += [f"{r.evaluation},{r.score!r},{r.popcount},{r.phase}" for r in result.trace]
    return "\n".join(lines) + "\n"


def cmd_select(cfg: dict) -> dict[Path, str]:
    out = _out_dir(cfg)
    method = cfg["method"]
    if method not in METHODS:
        raise CliError(f"unknown method {method!r}; valid methods: {', '.join(METHODS)}")
    X, y, _, spec = _load(cfg)
    benchmark = cfg["preset"] == "blocks"
    params, oca_cfg = _gbt_params(cfg, benchmark), _oca_config(cfg, benchmark)
    scorer = GbtScorer(X, y, _split(cfg), params, threads=cfg["threads"])
    if method == "oca":
        result = run_oca(scorer, spec, oca_cfg)
    elif method == "bca":
        result = run_bca(scorer, oca_cfg)
    else:
        if cfg["target_fraction"] is None:
            raise CliError("rfe needs --target-fraction")
        frac = float(cfg["target_fraction"])
        if not 0.0 < frac <= 1.0:
            raise CliError("--target-fraction must lie in (0, 1]")
        # round half up, then keep at least one feature
        count = max(1, int(np.floor(frac * X.n_features + 0.5)))
        result = run_rfe(scorer, RfeConfig(count))
    result.config = {**result.config, "gbt": params.to_dict(), "split": cfg["split"]}
    trace_path = Path(cfg["trace_out"]) if cfg["trace_out"] else out / f"trace_{method}.csv"
    if not trace_path.parent.is_dir():
        raise CliError(f"trace directory {trace_path.parent} does not exist")
    return {
        out / f"result_{method}.json": result.to_json(X.column_names, seed=int(cfg["seed"])),
        trace_path: _trace_csv(result),
        out / f"meta_{method}.json": _meta("select", cfg, evaluations=result.evaluations),
    }


def cmd_compare(cfg: dict) -> dict[Path, str]:
    out = _out_dir(cfg)
    if not cfg["results"]:
        raise CliError("compare needs at least one result file")
    results = []
    for path in cfg["results"]:
        try:
            with open(path) as fh:
                results.append(SelectionResult.from_dict(json.load(fh)))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read result {path}: {exc}") from None
    try:
        table = compare_methods(results, on=cfg["on"])
    except ValueError as exc:
        raise CliError(str(exc)) from None
    text = table.to_text()
    print(text, end="")
    return {
        out / "comparison.csv": table.to_csv(),
        out / "comparison.txt": text,
        out / "meta_compare.json": _meta("compare", cfg),
    }


def _trades_from_csv(cfg: dict) -> TradeList:
    X, y, pnl, _ = _load(cfg, with_pnl=True)
    return TradeList((TradeRecord(i, float(pnl[i]), X.values[i], int(y[i]))
                      for i in range(X.n_samples)), X.column_names)


def cmd_backtest(cfg: dict) -> dict[Path, str]:
    out = _out_dir(cfg)
    seed = int(cfg["seed"])
    if cfg["data"] is not None:
        trades = _trades_from_csv(cfg)
    else:
        n = int(cfg["n"]) if cfg["n"] is not None else 1500
        trades = gen_trades(n, timeout_fraction=float(cfg["timeout_fraction"]),
                            seed=derive_seed(seed, "datagen"))
    X, y, _, inferred = trades_dataset(trades)
    spec = load_block_map(cfg["block_map"], X.column_names) if cfg["block_map"] else inferred
    params, oca_cfg = _gbt_params(cfg, False), _oca_config(cfg, False)
    scorer = GbtScorer(X, y, _split(cfg), params, threads=cfg["threads"])
    selection = run_oca(scorer, spec, oca_cfg)
    model = scorer.outer_model(selection.mask)
    test = [trades[i] for i in scorer.test_idx]
    included = filter_trades(model, test, selection.mask, float(cfg["threshold"]))
    filtered, unfiltered = equity_curve(test, included), equity_curve(test)
    hist = pnl_histogram(trades, int(cfg["n_bins"]))
    summary = {
        "split": cfg["split"],
        "n_test": len(test),
        "n_included": len(included),
        "terminal_filtered": filtered.terminal,
        "terminal_unfiltered": unfiltered.terminal,
        "histogram_degenerate": hist.degenerate,
    }
    print(f"seed={seed} split={cfg['split']} filtered={filtered.terminal:.4f} "
          f"unfiltered={unfiltered.terminal:.4f} kept={len(included)}/{len(test)}")
    return {
        out / "equity_filtered.csv": filtered.to_csv("filtered"),
        out / "equity_unfiltered.csv": unfiltered.to_csv("unfiltered"),
        out / "histogram.csv": hist.to_csv(),
        out / "selection.json": selection.to_json(X.column_names, seed=seed),
        out / "meta_backtest.json": _meta("backtest", cfg, summary=summary),
    }


def cmd_ratecheck(cfg: dict) -> dict[Path, str]:
    out = _out_dir(cfg)
    seed = int(cfg["seed"])
    n = int(cfg["n"]) if cfg["n"] is not None else 10
    files, total = {}, 0
    for inst in range(int(cfg["instances"])):
        problem = random_problem(n, derive_seed(seed, f"problem{inst}"), float(cfg["cond"]))
        x0 = np.zeros(n)
        traj = rcd_minimize(problem, x0, int(cfg["k_max"]), int(cfg["seeds"]),
                            seed=derive_seed(seed, f"rcd{inst}"))
        report = check_rate_bounds(traj, problem, x0)
        total += len(report.violations)
        name = "ratecheck.csv" if int(cfg["instances"]) == 1 else f"ratecheck_{inst}.csv"
        files[out / name] = report.to_csv()
    print(f"seed={seed} n={n} instances={cfg['instances']} violations={total}")
    files[out / "meta_ratecheck.json"] = _meta("ratecheck", cfg, violations=total)
    return files


COMMANDS = {
    "gen": cmd_gen,
    "select": cmd_select,
    "compare": cmd_compare,
    "backtest": cmd_backtest,
    "ratecheck": cmd_ratecheck,
}


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON settings file; flags override it")
    common.add_argument("--seed", type=int, help="global seed (default 0)")
    common.add_argument("--threads", type=int,
                        help="worker cap (default $BLOCKSELECT_THREADS, else CPU count)")
    common.add_argument("--out-dir", dest="out_dir", help="existing output directory")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="CSV with a header row and a 0/1 label column")
    data.add_argument("--block-map", dest="block_map",
                      help="JSON block sidecar (default: infer from base__lag names)")
    data.add_argument("--label-column", dest="label_column")
    data.add_argument("--split", choices=("temporal", "randomized"))
    data.add_argument("--test-fraction", dest="test_fraction", type=float)

    p = argparse.ArgumentParser(prog="blockselect", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="write a synthetic dataset")
    g.add_argument("--preset", choices=("blocks", "trades"))
    g.add_argument("--n", type=int, help="number of rows")
    g.add_argument("--timeout-fraction", dest="timeout_fraction", type=float)

    s = sub.add_parser("select", parents=[common, data], help="run one selector")
    # validated by hand so the error lists the valid methods
    s.add_argument("--method")
    s.add_argument("--target-fraction", dest="target_fraction", type=float)
    s.add_argument("--trace-out", dest="trace_out")
    s.add_argument("--preset", choices=("blocks", "custom"),
                   help="'blocks' uses the benchmark scorer settings (default)")

    c = sub.add_parser("compare", parents=[common], help="tabulate result files")
    c.add_argument("results", nargs="*")
    c.add_argument("--on", choices=("score", "inner_score"))

    b = sub.add_parser("backtest", parents=[common, data], help="filter trades with OCA")
    b.add_argument("--pnl-column", dest="pnl_column")
    b.add_argument("--n", type=int, help="synthetic trades when --data is absent")
    b.add_argument("--timeout-fraction", dest="timeout_fraction", type=float)
    b.add_argument("--threshold", type=float)
    b.add_argument("--n-bins", dest="n_bins", type=int)

    r = sub.add_parser("ratecheck", parents=[common], help="coordinate descent rate check")
    r.add_argument("--n", type=int, help="dimension (default 10)")
    r.add_argument("--seeds", type=int)
    r.add_argument("--k-max", dest="k_max", type=int)
    r.add_argument("--cond", type=float)
    r.add_argument("--instances", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        files = COMMANDS[args.command](cfg)
        _commit(files)
    except (CliError, DataError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"blockselect {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
