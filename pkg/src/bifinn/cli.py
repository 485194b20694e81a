"""Command-line front end: ``bifinn {generate,train,evaluate,figure,verify}``.

Every verb reads an :class:`ExperimentConfig` (JSON file via ``--config``,
individual fields overridable by flags) and works inside ``output_dir``::

    data/      basis.bfnn test.bfnn train_s{seed}_N{N}.bfnn val_s{seed}_N{N}.bfnn manifest.json
    models/    basis_high.bfnn basis_low.bfnn {variant}_N{N}_r{r}_s{seed}.bfnn manifest.json
    history/   {variant}_N{N}_r{r}_s{seed}_c{i}.csv
    eval/      metrics.csv errors.csv timings.csv bound_report.txt
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig
from .experiment import build_bases, evaluate_model, generate_split, solver_configs, train_cell, train_options
from .pipelines import truncated
from .solvers import CountingSolver

log = logging.getLogger("bifinn")

METRIC_FIELDS = ["variant", "problem", "N_train", "r", "H", "seed", "eps_a", "eps_c", "eps_p", "M",
                 "low_solves", "high_solves"]
ERROR_FIELDS = ["variant", "N_train", "r", "seed", "sample_id", "e_a", "e_p", "e_c"]
TIMING_FIELDS = ["variant", "N_train", "r", "seed", "seconds"]
FIGURES = ("ea-vs-r", "ec-vs-n")


class CliError(RuntimeError):
    """A user-facing failure; reported without a traceback."""


# --- paths -------------------------------------------------------------------

def data_dir(cfg) -> Path:
    return Path(cfg.output_dir) / "data"


def model_dir(cfg) -> Path:
    return Path(cfg.output_dir) / "models"


def eval_dir(cfg) -> Path:
    return Path(cfg.output_dir) / "eval"


def split_name(kind: str, seed: int | None = None, N: int | None = None) -> str:
    return f"{kind}.bfnn" if seed is None else f"{kind}_s{seed}_N{N}.bfnn"


def model_name(variant: str, N: int, r: int, seed: int) -> str:
    return f"{variant}_N{N}_r{r}_s{seed}"


def _require(path: Path) -> Path:
    if not path.exists():
        raise CliError(f"missing file: expected {path}")
    return path


def _load_manifest(path: Path) -> dict:
    return json.loads(path.read_text()) if path.exists() else {}


def _write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def check_hashes(directory: Path, manifest: dict) -> None:
    for name, entry in manifest.get("files", {}).items():
        path = directory / name
        got = io.sha256_file(_require(path))
        if got != entry["sha256"]:
            raise CliError(f"hash mismatch for {path}: manifest {entry['sha256'][:12]}, file {got[:12]}")


# --- generate ----------------------------------------------------------------

def _data_plan(cfg: ExperimentConfig):
    """(file name, n, sampler, sampler seed) for every split."""
    plan = []
    base = cfg.data_seeds()
    plan.append((split_name("basis"), cfg.n_basis, cfg.basis_sampler, base["basis"]))
    plan.append((split_name("test"), cfg.n_test, cfg.test_sampler, base["test"]))
    for seed in cfg.seeds:
        for N in cfg.N_train:
            s = cfg.data_seeds(seed, N)
            plan.append((split_name("train", seed, N), N, cfg.train_sampler, s["train"]))
            plan.append((split_name("val", seed, N), cfg.n_val(N), cfg.train_sampler, s["val"]))
    return plan


def cmd_generate(cfg: ExperimentConfig, force: bool = False) -> dict:
    """Sample parameters and solve both fidelities for every split.

    Existing files whose hash matches the manifest entry for the same request
    are kept; a mismatching file is an error unless ``force``.
    """
    out = data_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    mpath = out / "manifest.json"
    manifest = _load_manifest(mpath)
    files = manifest.get("files", {})
    lo, hi = solver_configs(cfg)
    created = []
    for name, n, sampler, seed in _data_plan(cfg):
        request = {"problem": cfg.problem, "n": n, "sampler": sampler, "seed": seed,
                   "low_config": lo.to_dict(), "high_config": hi.to_dict()}
        path = out / name
        entry = files.get(name)
        if not force and path.exists() and entry is not None and entry["request"] == request:
            got = io.sha256_file(path)
            if got != entry["sha256"]:
                raise CliError(f"hash mismatch for {path}: manifest {entry['sha256'][:12]}, file {got[:12]}")
            continue
        log.info("generating %s (%d samples)", name, n)
        tmp = path.with_suffix(".partial")
        try:
            split = generate_split(cfg.problem, n, sampler, seed, lo, hi)
            io.save_split(tmp, split["Z"], split["high"], split["low"], split["meta"])
            tmp.replace(path)
        finally:
            tmp.unlink(missing_ok=True)
        files[name] = {"sha256": io.sha256_file(path), "request": request}
        created.append(name)
    manifest = {"problem": cfg.problem, "files": files}
    _write_manifest(mpath, manifest)
    return {"created": created, "manifest": manifest}


# --- train -------------------------------------------------------------------

def _load_data(cfg, name):
    return io.load_split(_require(data_dir(cfg) / name))


def cmd_train(cfg: ExperimentConfig) -> list[str]:
    """Build bases once, then train every (variant, N, r, seed) cell.

    ``mpodnn`` cells at ranks below the largest requested r are truncations of
    the largest model (its component nets do not depend on r).
    """
    ddir, mdir = data_dir(cfg), model_dir(cfg)
    dman = _load_manifest(_require(ddir / "manifest.json"))
    check_hashes(ddir, dman)
    mdir.mkdir(parents=True, exist_ok=True)
    hdir = Path(cfg.output_dir) / "history"
    hdir.mkdir(parents=True, exist_ok=True)

    basis_split = _load_data(cfg, split_name("basis"))
    bh, bl = build_bases(basis_split)
    io.save_basis(mdir / "basis_high.bfnn", bh)
    if bl is not None:
        io.save_basis(mdir / "basis_low.bfnn", bl)
    r_list = sorted(set(cfg.r))
    if r_list[-1] > bh.R:
        raise CliError(f"requested rank {r_list[-1]} exceeds numerical rank {bh.R} of the high-fidelity basis")

    provenance = {"problem": cfg.problem, "low_config": basis_split["meta"].get("low_config"),
                  "high_config": basis_split["meta"].get("high_config")}
    written, failures = [], []
    for seed in cfg.seeds:
        for N in sorted(set(cfg.N_train)):
            tname, vname = split_name("train", seed, N), split_name("val", seed, N)
            train, val = _load_data(cfg, tname), _load_data(cfg, vname)
            inputs = {k: dman["files"][k]["sha256"] for k in (split_name("basis"), tname, vname)}
            opts = train_options(cfg, seed)
            for variant in cfg.variants:
                ranks = [r_list[-1]] if variant == "mpodnn" else r_list
                for r in ranks:
                    meta = {"problem": cfg.problem, "N": N, "seed": seed, "inputs": inputs,
                            "provenance": provenance}
                    try:
                        model = train_cell(variant, train, val, bh, bl, r, opts, cfg.H, meta)
                    except Exception as exc:  # noqa: BLE001 - logged per cell
                        log.error("cell %s failed: %s", model_name(variant, N, r, seed), exc)
                        failures.append(model_name(variant, N, r, seed))
                        continue
                    models = {r: model}
                    if variant == "mpodnn":
                        models = {rr: (model if rr == r else truncated(model, rr)) for rr in r_list}
                    for rr, m in models.items():
                        name = model_name(variant, N, rr, seed)
                        io.save_model(mdir / f"{name}.bfnn", m)
                        for i, rep in enumerate(m.reports):
                            (hdir / f"{name}_c{i}.csv").write_text(io.history_csv(rep))
                        written.append(name)
    man = {"files": {f"{n}.bfnn": {"sha256": io.sha256_file(mdir / f"{n}.bfnn")} for n in written},
           "bases": {p.name: {"sha256": io.sha256_file(p)} for p in sorted(mdir.glob("basis_*.bfnn"))},
           "data_manifest": io.sha256_file(ddir / "manifest.json")}
    _write_manifest(mdir / "manifest.json", man)
    if failures:
        raise CliError(f"{len(failures)} training cells failed: {', '.join(failures)}")
    return written


# --- evaluate ----------------------------------------------------------------

def cmd_evaluate(cfg: ExperimentConfig, online_low: bool = True) -> dict:
    """Online predictions for every stored model against the test split.

    Writes ``metrics.csv`` (one row per model), ``errors.csv`` (one row per
    model and test sample), ``timings.csv`` and ``bound_report.txt``.  Raises
    :class:`CliError` when the error bound is violated anywhere.
    """
    mdir, edir = model_dir(cfg), eval_dir(cfg)
    mman = _load_manifest(_require(mdir / "manifest.json"))
    check_hashes(mdir, mman)
    test = _load_data(cfg, split_name("test"))
    test_prov = {"problem": test["meta"].get("problem"), "low_config": test["meta"].get("low_config"),
                 "high_config": test["meta"].get("high_config")}
    lo, _ = solver_configs(cfg)
    edir.mkdir(parents=True, exist_ok=True)
    metrics, errors, timings, report_lines, bad = [], [], [], [], False
    for fname in sorted(mman["files"]):
        model = io.load_model(mdir / fname)
        m = model.meta
        if m.get("provenance") != test_prov:
            warnings.warn(f"{fname}: test data provenance differs from training provenance", stacklevel=2)
        solver = CountingSolver(lo) if (online_low and model.variant == "bifinn") else None
        ev = evaluate_model(model, test, solver)
        if solver is not None and solver.calls != len(test["Z"]):
            raise CliError(f"{fname}: {solver.calls} low-fidelity solves for {len(test['Z'])} queries")
        agg = ev.aggregate
        metrics.append({"variant": model.variant, "problem": m.get("problem"), "N_train": m.get("N"),
                        "r": model.r, "H": m.get("H"), "seed": m.get("seed"), "eps_a": agg.eps_a,
                        "eps_c": agg.eps_c, "eps_p": agg.eps_p, "M": agg.M, "low_solves": ev.low_solves,
                        "high_solves": ev.high_solves})
        key = {"variant": model.variant, "N_train": m.get("N"), "r": model.r, "seed": m.get("seed")}
        errors += [{**key, "sample_id": e.sample_id, "e_a": e.e_a, "e_p": e.e_p, "e_c": e.e_c}
                   for e in ev.errors]
        timings.append({**key, "seconds": ev.seconds})
        report_lines.append(f"[{fname}] {ev.bound.format()}")
        bad |= not ev.bound.holds
    io.write_csv(edir / "metrics.csv", METRIC_FIELDS, metrics)
    io.write_csv(edir / "errors.csv", ERROR_FIELDS, errors)
    io.write_csv(edir / "timings.csv", TIMING_FIELDS, timings)
    (edir / "bound_report.txt").write_text("\n".join(report_lines) + "\n")
    if bad:
        raise CliError(f"error bound violated; see {edir / 'bound_report.txt'}")
    return {"metrics": metrics, "n_models": len(metrics)}


# --- figure ------------------------------------------------------------------

def _num(v):
    return float(v) if v not in ("", None) else math.nan


def figure_rows(rows: list[dict], figure: str, r: int | None = None):
    """Pivot metrics rows into a figure table.  Returns ``(fieldnames, rows)``.

    ``ea-vs-r`` has one row per (N, r) with the seed-mean eps_a of every
    variant; ``ec-vs-n`` has one row per N at a fixed r with the seed-mean
    eps_c.  Missing cells are left empty.
    """
    if figure not in FIGURES:
        raise CliError(f"unknown figure {figure!r}; expected one of {FIGURES}")
    seen = {}
    for row in rows:
        key = (row["variant"], int(row["N_train"]), int(row["r"]), int(row["seed"]))
        if key in seen:
            raise CliError(f"duplicate metrics cell variant={key[0]} N_train={key[1]} r={key[2]} seed={key[3]}")
        seen[key] = row
    variants = sorted({k[0] for k in seen})
    metric = "eps_a" if figure == "ea-vs-r" else "eps_c"
    if figure == "ec-vs-n" and seen:
        r = r if r is not None else max(k[2] for k in seen)
        seen = {k: v for k, v in seen.items() if k[2] == r}
    cells = defaultdict(list)
    eps_p = defaultdict(list)
    for (v, N, rr, _), row in seen.items():
        rkey = (N, rr) if figure == "ea-vs-r" else (N,)
        cells[(rkey, v)].append(_num(row[metric]))
        eps_p[rkey].append(_num(row["eps_p"]))
    keys = sorted(eps_p)
    fieldnames = ["N_train", "r"] +[f"{metric}_{v}" for v in variants] + ["eps_p", "n_seeds"]
    out = []
    for k in keys:
        row = {"N_train": k[0], "r": k[1] if figure == "ea-vs-r" else r}
        counts = []
        for v in variants:
            vals = cells.get((k, v))
            row[f"{metric}_{v}"] = float(np.mean(vals)) if vals else None
            counts.append(len(vals or []))
        row["eps_p"] = float(np.mean(eps_p[k]))
        row["n_seeds"] = max(counts)
        out.append(row)
    return fieldnames, out


def cmd_figure(metric_paths, figure: str, out_path, r: int | None = None) -> list[dict]:
    rows = []
    for p in metric_paths:
        rows += io.read_csv(_require(Path(p)))
    fieldnames, out = figure_rows(rows, figure, r)
    io.write_csv(out_path, fieldnames, out)
    return out


# --- verify ------------------------------------------------------------------

def cmd_verify(cfg: ExperimentConfig, tol: float = 1e-12) -> list[str]:
    """Re-check stored artifacts: hashes, basis orthonormality, error bounds and eps_p monotonicity.

    Returns the list of problems found (empty when everything holds).
    """
    problems = []
    for d in (data_dir(cfg), model_dir(cfg)):
        mpath = d / "manifest.json"
        if mpath.exists():
            try:
                check_hashes(d, _load_manifest(mpath))
            except CliError as exc:
                problems.append(str(exc))
    mdir = model_dir(cfg)
    for p in sorted(mdir.glob("*.bfnn")) if mdir.exists() else []:
        cs = io.read_containers(p)
        for name in sorted({c.meta["name"] for c in cs if c.role == "basis"}):
            V = io.basis_from_containers(cs, name).V
            dev = float(np.max(np.abs(V.T @ V - np.eye(V.shape[1]))))
            if dev > tol:
                problems.append(f"{p.name}:{name} not orthonormal (max |VtV - I| = {dev:.3e})")
    edir = eval_dir(cfg)
    if (edir / "errors.csv").exists():
        for row in io.read_csv(edir / "errors.csv"):
            e_a, e_p, e_c = _num(row["e_a"]), _num(row["e_p"]), _num(row["e_c"])
            t = tol * (1 + e_a)
            if e_p > e_a + t or e_a > e_p + e_c + t:
                problems.append(f"bound violated for {row['variant']} N={row['N_train']} r={row['r']} "
                                f"seed={row['seed']} sample={row['sample_id']}")
    if (edir / "metrics.csv").exists():
        by_r = {}
        for row in io.read_csv(edir / "metrics.csv"):
            by_r.setdefault(int(row["r"]), _num(row["eps_p"]))
        rs = sorted(by_r)
        for a, b in zip(rs, rs[1:]):
            if by_r[b] > by_r[a] * (1 + tol) + tol:
                problems.append(f"eps_p increases from r={a} ({by_r[a]:.3e}) to r={b} ({by_r[b]:.3e})")
    return problems


# --- argument parsing --------------------------------------------------------

def _int_list(s: str) -> list[int]:
    out = []
    for part in s.split(","):
        if "-" in part.strip("-"):
            a, b = part.split("-")
            out += list(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _str_list(s: str) -> list[str]:
    return [p for p in s.split(",") if p]


_OVERRIDES = {
    "problem": str, "variants": _str_list, "N_train": _int_list, "r": _int_list, "H": _int_list,
    "n_restarts": int, "max_iters": int, "patience": int, "val_fraction": float, "seeds": _int_list,
    "data_seed": int, "n_basis": int, "n_test": int, "basis_sampler": str, "train_sampler": str,
    "test_sampler": str, "low_resolution": int, "high_resolution": int, "noise_seed": int,
    "output_dir": str,
}


def _add_config_args(p):
    p.add_argument("--config", help="JSON experiment config")
    for name, typ in _OVERRIDES.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None)


def config_from_args(args) -> ExperimentConfig:
    d = json.loads(Path(args.config).read_text()) if args.config else {}
    for name in _OVERRIDES:
        v = getattr(args, name, None)
        if v is not None:
            d[name] = v
    if "problem" not in d:
        raise CliError("no problem given: pass --problem or a --config file")
    return ExperimentConfig.from_dict(d)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bifinn", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)
    g = sub.add_parser("generate", help="sample parameters and solve both fidelities")
    _add_config_args(g)
    g.add_argument("--force", action="store_true", help="regenerate existing files")
    t = sub.add_parser("train", help="build bases and train every cell")
    _add_config_args(t)
    e = sub.add_parser("evaluate", help="online predictions, metrics and bound report")
    _add_config_args(e)
    e.add_argument("--stored-low", action="store_true",
                   help="use stored low-fidelity test snapshots instead of online solves")
    f = sub.add_parser("figure", help="pivot metrics CSVs into a figure table")
    f.add_argument("figure", choices=FIGURES)
    f.add_argument("metrics", nargs="+")
    f.add_argument("-o", "--out", required=True)
    f.add_argument("--r", type=int, default=None, help="fixed rank for ec-vs-n (default: largest)")
    v = sub.add_parser("verify", help="re-check invariants on stored artifacts")
    _add_config_args(v)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "figure":
            rows = cmd_figure(args.metrics, args.figure, args.out, args.r)
            print(f"wrote {len(rows)} rows to {args.out}")
            return 0
        cfg = config_from_args(args)
        if args.verb == "generate":
            res = cmd_generate(cfg, force=args.force)
            print(f"generated {len(res['created'])} files in {data_dir(cfg)}")
        elif args.verb == "train":
            names = cmd_train(cfg)
            print(f"trained {len(names)} models in {model_dir(cfg)}")
        elif args.verb == "evaluate":
            res = cmd_evaluate(cfg, online_low=not args.stored_low)
            print(f"evaluated {res['n_models']} models; bound holds")
        else:
            problems = cmd_verify(cfg)
            for line in problems:
                print(line)
            print("verify: OK" if not problems else f"verify: {len(problems)} problems")
            return 0 if not problems else 1
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
