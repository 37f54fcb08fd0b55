"""Command-line interface: ingest, basis, simulate, fit, summarize, eval, plotdata, pipeline.

Exit codes: 0 success, 1 numerical failure, 2 I/O or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import subprocess
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import FEATURE_KINDS, build_features, kmeans, mean_shift, rand_index
from .basis import build_design, intensity_matrix, nmf, read_matrix_csv, write_matrix_csv
from .court import (
    CourtGrid,
    IngestError,
    bin_shots,
    count_histogram,
    filter_players,
    read_counts_csv,
    read_shots_csv,
    write_counts_csv,
)
from .mfm import SeriesError
from .posterior import summarize
from .sampler import FitConfig, MCMCTrace, SamplerError, run_chain
from .simgen import generate, study_design, replicate_rngs
from .study import default_workers

log = logging.getLogger("mfmzip")

EXIT_OK, EXIT_NUMERIC, EXIT_IO = 0, 1, 2


class ConfigError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


# helpers ---------------------------------------------------------------


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; keys mirror long flags."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (p.strip() for p in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _coerce(action, value):
    if isinstance(action, argparse._StoreTrueAction):
        return str(value).lower() in ("1", "true", "yes", "on")
    if action.nargs in ("+", "*"):
        return [action.type(v) if action.type else v for v in str(value).split(",") if v]
    if action.type is not None:
        return action.type(value)
    return value


def apply_config(parser: argparse.ArgumentParser, values: dict) -> None:
    actions = {a.dest: a for a in parser._actions}
    unknown = sorted(set(values) - actions.keys())
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    parser.set_defaults(**{k: _coerce(actions[k], v) for k, v in values.items()})
    for a in parser._actions:
        if a.dest in values:
            a.required = False


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def git_revision():
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        return out.stdout.strip() or None if out.returncode == 0 else None
    except (OSError, subprocess.SubprocessError):
        return None


def write_manifest(out_dir: Path, stage: str, config: dict, inputs=(), seeds=None) -> None:
    cfg_json = json.dumps(config, sort_keys=True, default=str)
    manifest = {
        "stage": stage,
        "version": __version__,
        "git_revision": git_revision(),
        "config": json.loads(cfg_json),
        "config_hash": hashlib.sha256(cfg_json.encode()).hexdigest(),
        "seeds": seeds,
        "inputs": {str(p): sha256_file(p) for p in inputs if Path(p).is_file()},
    }
    (out_dir / f"manifest_{stage}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input not found: {p}")
    return p


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


def read_labels_csv(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        return {row[0]: row[1] for row in reader}


# plot data -------------------------------------------------------------


def emit_plotdata(values, grid: CourtGrid, path, labels=None, label_name="surface") -> int:
    """Long-format grid dump ``block, block_x, block_y, value, <label_name>``.

    ``values`` is S x J; ``labels`` names each surface. Returns rows written.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[1] != grid.J:
        raise ValueError(f"surfaces have {values.shape[1]} blocks, grid has {grid.J}")
    labels = list(range(values.shape[0])) if labels is None else list(labels)
    cx, cy = grid.centroids()
    rows = []
    for lab, surf in zip(labels, values):
        for j in range(grid.J):
            rows.append([j, _fmt(cx[j]), _fmt(cy[j]), _fmt(surf[j]), lab])
    _write_rows(path, ["block", "block_x", "block_y", "value", label_name], rows)
    return len(rows)


# subcommands -----------------------------------------------------------


def cmd_ingest(args) -> int:
    out = _outdir(args.out)
    records = read_shots_csv(_require(args.shots), reflect=args.reflect)
    exclude = set(args.exclude or ())
    if args.exclude_file:
        exclude |= {ln.strip() for ln in _require(args.exclude_file).read_text().splitlines() if ln.strip()}
    records = filter_players(records, args.min_attempts, exclude)
    counts = bin_shots(records, CourtGrid())
    write_counts_csv(counts, out / "counts.csv")
    rows = []
    for i, pid in enumerate(counts.player_ids):
        h = count_histogram(counts, i)
        rows.append([pid] + [h[k] for k in (0, 1, 2, 3, 4, 5, "6+")])
    _write_rows(out / "histogram.csv", ["player_id", "0", "1", "2", "3", "4", "5", "6+"], rows)
    write_manifest(out, "ingest", vars_clean(args), inputs=[args.shots])
    log.info("ingested %d players, %d shots", counts.n, len(records))
    return EXIT_OK


def cmd_basis(args) -> int:
    out = _outdir(args.out)
    grid = CourtGrid()
    records = read_shots_csv(_require(args.shots), reflect=args.reflect)
    records = filter_players(records, args.min_attempts)
    by_player: dict = {}
    for r in records:
        by_player.setdefault(r.player_id, []).append(r)
    if not by_player:
        raise IngestError("no players left after filtering")
    Lam = intensity_matrix(by_player, grid, args.bandwidth)
    factors = nmf(Lam, args.rank, max_iter=args.max_iter, tol=args.tol, restarts=args.restarts, seed=args.seed)
    X = build_design(factors.B)
    write_matrix_csv(factors.B, out / "basis.csv", [str(j) for j in range(grid.J)])
    write_matrix_csv(X, out / "design.csv", ["intercept"] + [f"basis{m + 1}" for m in range(args.rank)])
    emit_plotdata(factors.B, grid, out / "basis_grid.csv", [f"basis{m + 1}" for m in range(args.rank)], "basis")
    write_manifest(out, "basis", vars_clean(args), inputs=[args.shots], seeds=[args.seed])
    log.info("basis: %d players, KL divergence %.6g", Lam.shape[0], factors.divergence)
    return EXIT_OK


def cmd_simulate(args) -> int:
    out = _outdir(args.out)
    X = read_matrix_csv(_require(args.design)) if args.design else None
    design = study_design(args.type, X=X, scale=args.scale, seed=args.seed)
    write_matrix_csv(design.X, out / "design.csv", ["intercept"] + [f"basis{m}" for m in range(1, design.X.shape[1])])
    for r, rng in enumerate(replicate_rngs(args.seed, args.replicates)):
        counts, labels = generate(design, rng)
        rep = _outdir(out / f"rep{r:03d}")
        write_counts_csv(counts, rep / "counts.csv")
        _write_rows(rep / "truth.csv", ["player_id", "cluster"], zip(counts.player_ids, labels + 1))
    truth = {
        "type": args.type,
        "scale": args.scale,
        "group_sizes": list(design.group_sizes),
        "beta": design.true_betas.tolist(),
        "rho": design.true_rhos.tolist(),
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    write_manifest(out, "simulate", vars_clean(args), seeds=[args.seed])
    return EXIT_OK


def fit_config_from_args(args, seed) -> FitConfig:
    return FitConfig(
        n_iter=args.iters,
        n_burnin=args.burnin,
        thin=args.thin,
        sigma0_scale=args.sigma0,
        m_aux=args.m_aux,
        psi=args.psi,
        update_psi=args.psi_gamma_prior,
        k_prior=args.kprior,
        init_clusters=args.init_clusters,
        seed=seed,
    )


def _fit_one(job):
    y, X, cfg = job
    return run_chain(y, X, cfg)


def chain_seeds(seed: int, chains: int) -> list:
    if chains == 1:
        return [seed]
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(chains)]


def cmd_fit(args) -> int:
    out = _outdir(args.out)
    counts = read_counts_csv(_require(args.counts))
    X = read_matrix_csv(_require(args.design))
    if X.shape[0] != counts.J:
        raise ValueError(f"design has {X.shape[0]} rows but counts have {counts.J} blocks")
    seeds = chain_seeds(args.seed, args.chains)
    jobs = [(counts.y, X, fit_config_from_args(args, s)) for s in seeds]
    workers = args.workers or default_workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(min(workers, len(jobs))) as pool:
            traces = list(pool.map(_fit_one, jobs))
    else:
        traces = [_fit_one(j) for j in jobs]
    for c, tr in enumerate(traces):
        tr.write_ndjson(out / f"trace_chain{c}.ndjson")
    meta = {
        "player_ids": counts.player_ids,
        "chains": len(traces),
        "config": [asdict(j[2]) for j in jobs],
        "step_sizes": [tr.step_sizes.tolist() for tr in traces],
    }
    (out / "fit_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    write_manifest(out, "fit", vars_clean(args), inputs=[args.counts, args.design], seeds=seeds)
    return EXIT_OK


def cmd_summarize(args) -> int:
    out = _outdir(args.out)
    trace = MCMCTrace.read_ndjson(*[_require(p) for p in args.trace])
    if args.meta:
        ids = json.loads(_require(args.meta).read_text())["player_ids"]
    elif args.counts:
        ids = read_counts_csv(_require(args.counts)).player_ids
    else:
        ids = [str(i) for i in range(trace.z.shape[1])]
    summ = summarize(trace, level=args.level)
    P = summ.player_beta.shape[1]
    _write_rows(out / "partition.csv", ["player_id", "cluster"], zip(ids, summ.z_hat + 1))
    _write_rows(
        out / "estimates.csv",
        ["cluster", "size", "rho"] + [f"beta{m}" for m in range(P)],
        [[h + 1, int(summ.cluster_sizes[h])] + [_fmt(v) for v in row] for h, row in enumerate(summ.estimates_table())],
    )
    rows = []
    for i, pid in enumerate(ids):
        rows.append([pid, "rho", _fmt(summ.player_rho[i]), _fmt(summ.rho_hpd[i, 0]), _fmt(summ.rho_hpd[i, 1])])
        for m in range(P):
            b = summ.beta_hpd[i, m]
            rows.append([pid, f"beta{m}", _fmt(summ.player_beta[i, m]), _fmt(b[0]), _fmt(b[1])])
    _write_rows(out / "hpd.csv", ["player_id", "parameter", "mean", "hpd_lo", "hpd_hi"], rows)
    info = {"k_hat": summ.k_hat, "dahl_index": summ.dahl_index, "draws": trace.T,
            "cluster_sizes": summ.cluster_sizes.tolist()}
    (out / "summary.json").write_text(json.dumps(info, indent=2) + "\n")
    write_manifest(out, "summarize", vars_clean(args), inputs=args.trace)
    print(f"k_hat={summ.k_hat} sizes={summ.cluster_sizes.tolist()}")
    return EXIT_OK


def cmd_eval(args) -> int:
    truth = read_labels_csv(_require(args.truth))
    rows = []
    for spec in args.pred:
        name, _, path = spec.partition("=")
        if not path:
            name, path = Path(spec).stem, spec
        pred = read_labels_csv(_require(path))
        missing = set(truth) - set(pred)
        if missing:
            raise ConfigError(f"{path}: missing {len(missing)} players present in the truth file")
        ids = list(truth)
        rows.append([name, _fmt(rand_index([truth[i] for i in ids], [pred[i] for i in ids]))])
    if args.out:
        _write_rows(_require_parent(args.out), ["method", "rand_index"], rows)
    for name, ri in rows:
        print(f"RI_{name}\t{float(ri):.4f}")
    return EXIT_OK


def _require_parent(path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def cmd_baselines(args) -> int:
    out = _outdir(args.out)
    counts = read_counts_csv(_require(args.counts))
    X = read_matrix_csv(_require(args.design))
    feats = build_features(counts, X, args.features)
    sd = feats.std(axis=0)
    labels = {"meanshift": mean_shift(feats, args.bandwidth)}
    if args.k:
        labels["kmeans"] = kmeans(feats / np.where(sd > 0, sd, 1.0), args.k, args.restarts, args.seed)
    for name, lab in labels.items():
        _write_rows(out / f"partition_{name}.csv", ["player_id", "cluster"], zip(counts.player_ids, np.asarray(lab) + 1))
    return EXIT_OK


def cmd_plotdata(args) -> int:
    grid = CourtGrid()
    out = _require_parent(args.out)
    if args.kind == "counts":
        counts = read_counts_csv(_require(args.input))
        keep = range(counts.n) if not args.players else [counts.player_ids.index(p) for p in args.players]
        emit_plotdata(counts.y[list(keep)], grid, out, [counts.player_ids[i] for i in keep], "player_id")
    elif args.kind == "basis":
        B = read_matrix_csv(_require(args.input))
        emit_plotdata(B, grid, out, [f"basis{m + 1}" for m in range(B.shape[0])], "basis")
    else:
        counts = read_counts_csv(_require(args.input))
        part = read_labels_csv(_require(args.partition))
        lab = np.array([int(part[p]) for p in counts.player_ids])
        groups = sorted(set(lab))
        means = np.stack([counts.y[lab == g].mean(axis=0) for g in groups])
        emit_plotdata(means, grid, out, groups, "cluster")
    return EXIT_OK


def _stage(name, fn, args):
    try:
        return fn(args)
    except (OSError, IngestError, ConfigError) as exc:
        raise StageError(name, exc) from exc
    except (SamplerError, SeriesError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def cmd_pipeline(args) -> int:
    """Staged run: (simulate | ingest [+ basis]) -> fit -> summarize [-> baselines -> eval]."""
    out = _outdir(args.out)
    ns = argparse.Namespace(**vars(args))
    if args.preset:
        kind, _, scale = args.preset.partition("-")
        ns.type, ns.scale, ns.replicates, ns.out, ns.design = kind, scale or "desk", 1, str(out / "data"), args.design
        _stage("simulate", cmd_simulate, ns)
        counts_path = out / "data" / "rep000" / "counts.csv"
        design_path = out / "data" / "design.csv"
        truth_path = out / "data" / "rep000" / "truth.csv"
    else:
        if not args.shots:
            raise ConfigError("pipeline needs --preset or --shots")
        ns.out = str(out / "ingest")
        _stage("ingest", cmd_ingest, ns)
        counts_path = out / "ingest" / "counts.csv"
        if args.design:
            design_path = _require(args.design)
        else:
            if not args.historical:
                raise ConfigError("pipeline on real data needs --design or --historical")
            ns.shots, ns.out = args.historical, str(out / "basis")
            ns.min_attempts = args.historical_min_attempts
            _stage("basis", cmd_basis, ns)
            design_path = out / "basis" / "design.csv"
        truth_path = None
    ns.counts, ns.design, ns.out = str(counts_path), str(design_path), str(out / "fit")
    _stage("fit", cmd_fit, ns)
    ns.trace = [str(p) for p in sorted((out / "fit").glob("trace_chain*.ndjson"))]
    ns.meta, ns.out = str(out / "fit" / "fit_meta.json"), str(out / "summary")
    _stage("summarize", cmd_summarize, ns)
    if truth_path is not None:
        k_hat = json.loads((out / "summary" / "summary.json").read_text())["k_hat"]
        ns.out, ns.k, ns.features, ns.bandwidth, ns.restarts = str(out / "baselines"), k_hat, "zip_mle", None, 10
        _stage("baselines", cmd_baselines, ns)
        ns.truth = str(truth_path)
        ns.pred = [
            f"mfm={out / 'summary' / 'partition.csv'}",
            f"kmeans={out / 'baselines' / 'partition_kmeans.csv'}",
            f"meanshift={out / 'baselines' / 'partition_meanshift.csv'}",
        ]
        ns.out = str(out / "eval.csv")
        _stage("eval", cmd_eval, ns)
    write_manifest(out, "pipeline", vars_clean(args), seeds=[args.seed])
    return EXIT_OK


def vars_clean(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "config") and not callable(v)}


# parser ----------------------------------------------------------------


def _add_fit_flags(p):
    p.add_argument("--iters", type=int, default=15000)
    p.add_argument("--burnin", type=int, default=5000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--workers", type=int, default=0, help="parallel chains (default: $MFMZIP_WORKERS or 1)")
    p.add_argument("--psi", type=float, default=1.0)
    p.add_argument("--psi-gamma-prior", action="store_true", help="update psi under a Gamma(1,1) prior")
    p.add_argument("--sigma0", type=float, default=5.0, help="prior sd of each coefficient")
    p.add_argument("--kprior", choices=["truncated", "shifted"], default="shifted")
    p.add_argument("--m-aux", type=int, default=2)
    p.add_argument("--init-clusters", type=int, default=10)


def _add_ingest_flags(p):
    p.add_argument("--reflect", action="store_true", help="rotate back-court shots onto the offensive half")
    p.add_argument("--min-attempts", type=int, default=0, help="keep players with more attempts than this")
    p.add_argument("--exclude", nargs="*", default=[], help="player ids to drop")
    p.add_argument("--exclude-file", default=None)


def _add_basis_flags(p):
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--bandwidth", type=float, default=2.5)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfmzip", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", default=None, help="key = value file; flags override it")
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "bin shot locations into per-player block counts")
    p.add_argument("--shots", required=True)
    p.add_argument("--out", required=True)
    _add_ingest_flags(p)

    p = add("basis", cmd_basis, "KDE + NMF basis surfaces and the design matrix")
    p.add_argument("--shots", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reflect", action="store_true")
    p.add_argument("--min-attempts", type=int, default=0)
    _add_basis_flags(p)

    p = add("simulate", cmd_simulate, "synthetic three-group ZIP datasets")
    p.add_argument("--type", choices=["balanced", "imbalanced"], default="balanced")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--scale", choices=["full", "desk"], default="desk")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--design", default=None, help="design CSV to use instead of a synthetic one")
    p.add_argument("--out", required=True)

    p = add("fit", cmd_fit, "run the MFM-ZIP sampler")
    p.add_argument("--counts", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--out", required=True)
    _add_fit_flags(p)

    p = add("summarize", cmd_summarize, "Dahl partition, estimates and HPD intervals from traces")
    p.add_argument("--trace", nargs="+", required=True)
    p.add_argument("--meta", default=None, help="fit_meta.json for player ids")
    p.add_argument("--counts", default=None, help="counts CSV for player ids")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out", required=True)

    p = add("baselines", cmd_baselines, "k-means and mean-shift partitions")
    p.add_argument("--counts", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--k", type=int, default=0, help="clusters for k-means (skipped when 0)")
    p.add_argument("--features", choices=FEATURE_KINDS, default="zip_mle")
    p.add_argument("--bandwidth", type=float, default=None)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, "Rand index of predicted partitions against the truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", nargs="+", required=True, help="NAME=partition.csv entries")
    p.add_argument("--out", default=None)

    p = add("plotdata", cmd_plotdata, "long-format grid dumps for plotting")
    p.add_argument("--kind", choices=["counts", "basis", "partition"], required=True)
    p.add_argument("--input", required=True, help="counts CSV or basis CSV")
    p.add_argument("--partition", default=None)
    p.add_argument("--players", nargs="*", default=None)
    p.add_argument("--out", required=True)

    p = add("pipeline", cmd_pipeline, "run the staged workflow end to end")
    p.add_argument("--out", required=True)
    p.add_argument("--preset", default=None, help="balanced-desk, imbalanced-desk, balanced-full, ...")
    p.add_argument("--shots", default=None)
    p.add_argument("--historical", default=None, help="historical shots CSV for the basis stage")
    p.add_argument("--historical-min-attempts", type=int, default=100)
    p.add_argument("--design", default=None)
    p.add_argument("--level", type=float, default=0.95)
    _add_ingest_flags(p)
    _add_basis_flags(p)
    _add_fit_flags(p)
    return parser


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv=None) -> argparse.Namespace:
    """Parse flags; values from ``--config`` become defaults that flags override."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    cfg = _config_path(argv)
    if cfg is not None:
        command = next((t for t in argv if not t.startswith("-")), None)
        if command is None:
            raise ConfigError("--config given without a subcommand")
        apply_config(_subparser(parser, command), read_config_file(_require(cfg)))
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except (ConfigError, OSError, ValueError, KeyError) as exc:
        print(f"mfmzip: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SystemExit as exc:
        return EXIT_IO if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except StageError as exc:
        print(f"mfmzip: error: {exc}", file=sys.stderr)
        numeric = isinstance(exc.cause, (SamplerError, SeriesError, ArithmeticError, np.linalg.LinAlgError))
        if isinstance(exc.cause, SamplerError) and exc.cause.state is not None:
            dump = Path(getattr(args, "out", ".")) / "sampler_state_dump.json"
            dump.parent.mkdir(parents=True, exist_ok=True)
            dump.write_text(json.dumps(exc.cause.state) + "\n")
        return EXIT_NUMERIC if numeric else EXIT_IO
    except (SamplerError, SeriesError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"mfmzip: numerical error: {exc}", file=sys.stderr)
        if isinstance(exc, SamplerError) and exc.state is not None:
            dump = Path(getattr(args, "out", ".")) / "sampler_state_dump.json"
            dump.parent.mkdir(parents=True, exist_ok=True)
            dump.write_text(json.dumps(exc.state) + "\n")
        return EXIT_NUMERIC
    except (OSError, IngestError, ConfigError, ValueError, KeyError) as exc:
        print(f"mfmzip: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
