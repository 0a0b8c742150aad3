"""Command-line entry points.

    run     --config cfg.json --features data.feat [--out DIR]
    synth   --spec spec.json --out data.feat
    compare --a results.csv --b results.csv
    csvcat  FILES... [--out FILE]

Exit codes: 0 success, 1 configuration error, 2 data/format error,
3 numeric abort. `run` appends to results.csv as rounds finish
(sequential mode) or merges per-seed part files at the end (parallel
mode); a crash always leaves a valid CSV prefix or intact parts.
"""

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import load_experiment_config, load_synth_spec
from .data import synth_gaussian_mixture
from .errors import ConfigurationError, FormatError, NumericError
from .featfile import load_features, write_features
from .orchestrator import paired_t, run_seed, worker_cap

CSV_COLUMNS = ("seed", "round", "labeled_count", "test_acc", "val_ce", "final_lambda", "wall_ms")


def _fmt(x: float) -> str:
    # 17 significant digits: exact round-trip for binary64
    return f"{x:.17g}"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="chain-al", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("--config", required=True, help="experiment config (JSON)")
    p_run.add_argument("--features", required=True, help="input feature file")
    p_run.add_argument("--out", default="out", help="output directory (default: out)")
    p_run.add_argument("--workers", type=int, default=None,
                       help="seed-level parallelism (default: CHAIN_THREADS or all cores)")

    p_synth = sub.add_parser("synth", help="generate a synthetic feature file")
    p_synth.add_argument("--spec", required=True, help="mixture spec (JSON)")
    p_synth.add_argument("--out", required=True, help="output feature file")

    p_cmp = sub.add_parser("compare", help="paired t-test of final-round accuracies")
    p_cmp.add_argument("--a", required=True, help="first results.csv")
    p_cmp.add_argument("--b", required=True, help="second results.csv")

    p_cat = sub.add_parser("csvcat", help="merge result CSVs for plotting")
    p_cat.add_argument("files", nargs="+", help="result CSVs to merge")
    p_cat.add_argument("--out", default=None, help="output path (default: stdout)")
    return parser


def _record_row(seed, rec):
    return (str(seed), str(rec.round), str(rec.labeled_count), _fmt(rec.test_accuracy),
            _fmt(rec.val_ce), _fmt(rec.final_lambda), str(rec.wall_ms))


def _seed_part_job(args):
    cfg, ds, seed, part_path = args
    with open(part_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")

        def sink(rec):
            writer.writerow(_record_row(seed, rec))
            fh.flush()

        records = run_seed(cfg, ds, seed, round_sink=sink)
    return records


def _cmd_run(args) -> int:
    cfg = load_experiment_config(args.config)
    ds = load_features(args.features)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"

    workers = args.workers if args.workers is not None else min(len(cfg.seeds), worker_cap())
    if workers < 1:
        raise ConfigurationError("--workers must be >= 1")

    all_records = []
    if workers > 1 and len(cfg.seeds) > 1:
        parts = [out_dir / f"results.part{i}.csv" for i in range(len(cfg.seeds))]
        jobs = [(cfg, ds, s, str(p)) for (s, p) in zip(cfg.seeds, parts)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            all_records = list(pool.map(_seed_part_job, jobs))
        with open(results_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for part in parts:
                fh.write(part.read_text())
                part.unlink()
    else:
        with open(results_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            fh.flush()
            for seed in cfg.seeds:
                def sink(rec, seed=seed):
                    writer.writerow(_record_row(seed, rec))
                    fh.flush()

                all_records.append(run_seed(cfg, ds, seed, round_sink=sink))

    traj_doc = {
        "seeds": [
            {
                "seed": seed,
                "rounds": [
                    {
                        "round": rec.round,
                        "final_lambda": rec.final_lambda,
                        "steps": [[int(t), float(lam)] for t, lam in rec.lambda_traj],
                    }
                    for rec in records
                ],
            }
            for seed, records in zip(cfg.seeds, all_records)
        ]
    }
    (out_dir / "lambda_traj.json").write_text(json.dumps(traj_doc, indent=1))
    print(f"wrote {results_path} and {out_dir / 'lambda_traj.json'}")
    return 0


def _cmd_synth(args) -> int:
    spec = load_synth_spec(args.spec)
    ds = synth_gaussian_mixture(spec)
    write_features(ds, args.out)
    print(f"wrote {args.out}: n={ds.n} d={ds.dim} c={ds.num_classes}")
    return 0


def _read_results(path):
    path = Path(path)
    if not path.exists():
        raise FormatError(f"results file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise FormatError(f"{path}: unexpected columns {reader.fieldnames}")
        rows = list(reader)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return rows


def _final_accuracies(rows, path):
    final = {}
    for row in rows:
        try:
            seed, rnd, acc = int(row["seed"]), int(row["round"]), float(row["test_acc"])
        except ValueError as exc:
            raise FormatError(f"{path}: malformed row {row}: {exc}") from exc
        if seed not in final or rnd > final[seed][0]:
            final[seed] = (rnd, acc)
    return {seed: acc for seed, (rnd, acc) in final.items()}


def _cmd_compare(args) -> int:
    acc_a = _final_accuracies(_read_results(args.a), args.a)
    acc_b = _final_accuracies(_read_results(args.b), args.b)
    if set(acc_a) != set(acc_b):
        raise FormatError("result files cover different seed sets; cannot pair them")
    seeds = sorted(acc_a)
    try:
        t, dof = paired_t([acc_a[s] for s in seeds], [acc_b[s] for s in seeds])
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    print(f"t={_fmt(t)} dof={dof}")
    return 0


def _cmd_csvcat(args) -> int:
    header = None
    out_rows = []
    for name in args.files:
        path = Path(name)
        if not path.exists():
            raise FormatError(f"file not found: {path}")
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
        if not rows:
            raise FormatError(f"{path}: empty file")
        if header is None:
            header = rows[0]
        elif rows[0] != header:
            raise FormatError(f"{path}: header {rows[0]} does not match {header}")
        out_rows.extend(rows[1:])
    text_lines = [",".join(header)] + [",".join(r) for r in out_rows]
    text = "\n".join(text_lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "compare":
            return _cmd_compare(args)
        return _cmd_csvcat(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except FormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
