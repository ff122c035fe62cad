"""featdisc command line.

Exit codes: 0 success, 1 usage/configuration error, 2 data error,
3 lemma violation (``simulate``).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from featdisc import binning, datasets, encoding, experiment, theory
from featdisc.errors import ConfigurationError, DataError
from featdisc.experiment import DatasetConfig, EncoderChoice, ExperimentConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_LEMMA = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ints(text):
    return tuple(int(t) for t in text.split(",") if t)


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t)


def _load_data(args) -> datasets.NumericDataset:
    return datasets.load_csv(experiment.resolve_path(args.data), max_rows=args.max_rows)


# --- bin / encode --------------------------------------------------------------

def cmd_bin(args) -> int:
    ds = _load_data(args)
    specs = [binning.fit(ds.features[:, f], args.granularity, args.strategy, field_id=f) for f in range(ds.field_count)]
    text = binning.dumps(specs)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_encode(args) -> int:
    ds = _load_data(args)
    specs = binning.loads(Path(args.bins).read_text())
    if len(specs) != ds.field_count:
        raise DataError(f"{args.bins} has {len(specs)} fields, data has {ds.field_count}")
    spec = encoding.encoder_from_bins(args.kind, specs, ds.features, args.missing)
    enc = encoding.encode(spec, ds)
    if args.encoder_out:
        Path(args.encoder_out).write_text(spec.to_json())
    if args.out:
        with open(args.out, "w") as fh:
            enc.dump(fh)
    else:
        enc.dump(sys.stdout)
    return EXIT_OK


# --- train / experiment ----------------------------------------------------------

def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    else:
        if args.data:
            ds = DatasetConfig(path=args.data, max_rows=args.max_rows)
        else:
            ds = DatasetConfig(synthetic=datasets.SyntheticSpec(
                args.generator, args.fields, args.rows, args.noise, args.seed or 0))
        enc = EncoderChoice(args.encoder, args.granularity) if args.encoder != "MGD" else EncoderChoice("MGD")
        cfg = ExperimentConfig(dataset=ds, encoders=(enc,))
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["output_dir"] = args.out
    if getattr(args, "ratios", None):
        overrides["ratios"] = args.ratios
    if getattr(args, "models", None):
        overrides["models"] = tuple(args.models.split(","))
    return replace(cfg, **overrides) if overrides else cfg


def _run(cfg: ExperimentConfig) -> int:
    results = experiment.run_experiment(cfg)
    sys.stdout.write(experiment.results_table(results))
    return EXIT_DATA if any(r.error for r in results) else EXIT_OK


def cmd_experiment(args) -> int:
    return _run(_config_from_args(args))


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    if args.model:
        cfg = replace(cfg, models=(args.model,))
    if args.ratio is not None:
        cfg = replace(cfg, ratios=(args.ratio,))
    cells = list(cfg.cells())
    if len(cells) != 1:
        raise ConfigurationError(f"train runs exactly one cell, config describes {len(cells)}; use 'experiment'")
    return _run(cfg)


# --- params ----------------------------------------------------------------------

def cmd_params(args) -> int:
    rows = []
    if args.config:
        cfg = _config_from_args(args)
        ds = experiment.load_dataset(cfg.dataset)
        data = experiment.partitions(ds, replace(cfg.split, seed=cfg.seed), cfg.ratios[0])
        for enc in cfg.encoders:
            spec, sel = experiment.fit_cell_encoder(cfg, enc, data)
            before = sel.parameters_before(args.dim) if sel else None
            rows.append((enc.label, ds.field_count, encoding.count_parameters(spec, args.dim), before))
    else:
        if args.encoder == "MGD":
            raise ConfigurationError("MGD parameter counts need data: pass --config")
        per_field = args.granularity + (1 if args.encoder == "LLE" else 0)
        rows.append((f"{args.encoder}({args.granularity})", args.fields, args.fields * per_field * args.dim, None))
    print(f"{'encoder':<10} {'fields':>6} {'params':>10} {'before_selection':>16}")
    for label, fields, count, before in rows:
        print(f"{label:<10} {fields:>6} {count:>10} {before if before is not None else '-':>16}")
    return EXIT_OK


# --- simulate --------------------------------------------------------------------

SIM_COLUMNS = (
    "bin_size", "sigma", "analytic_cd_correctness", "analytic_lle_correctness",
    "analytic_lle_correctness_uncentered", "mc_cd_correctness", "mc_cd_correctness_se",
    "robustness_closed_form", "robustness_exact", "mc_cd_robustness", "mc_cd_robustness_se",
    "mc_lle_robustness", "mc_lle_robustness_se", "closed_form_match", "lemma2_pass", "lemma3_pass", "lemma4_pass",
)


def _lemma1_fields(family: str, n_fields: int, seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(n_fields):
        if family == "random":
            _, values, truth = theory.random_field(rng)
        else:
            values = np.sort(rng.uniform(-3, 3, size=400))
            truth = np.full_like(values, 1.5) if family == "constant" else 2 * values - 1
        yield values, truth


def simulate(args):
    """Returns (cell rows, summary rows, violation flag)."""
    cells = theory.robustness_grid(args.sizes, args.sigmas, args.trials, args.seed)
    rows = []
    by_sigma: dict[float, list] = {}
    for cell in cells:
        b = theory.robustness_bin(cell.size, cell.sigma)
        mc_corr = theory.mc_correctness_cd(b, min(args.trials, 20_000), args.seed)
        cd_corr = theory.analytic_correctness_cd(b)
        lle_corr = theory.analytic_correctness_lle(b)
        prev = by_sigma.get(cell.sigma)
        lemma2 = prev is None or (cell.cd.estimate < prev[1] if cell.sigma > 0 else cell.cd.estimate == 0)
        by_sigma[cell.sigma] = (cell.size, cell.cd.estimate)
        rows.append({
            "bin_size": cell.size, "sigma": cell.sigma,
            "analytic_cd_correctness": cd_corr, "analytic_lle_correctness": lle_corr,
            "analytic_lle_correctness_uncentered": theory.analytic_correctness_lle(b, "uncentered"),
            "mc_cd_correctness": mc_corr.estimate, "mc_cd_correctness_se": mc_corr.std_error,
            "robustness_closed_form": cell.closed_form, "robustness_exact": cell.exact,
            "mc_cd_robustness": cell.cd.estimate, "mc_cd_robustness_se": cell.cd.std_error,
            "mc_lle_robustness": cell.lle.estimate, "mc_lle_robustness_se": cell.lle.std_error,
            "closed_form_match": cell.closed_form_match_cd,
            "lemma2_pass": lemma2,
            "lemma3_pass": lle_corr <= cd_corr + theory.EXACT_TOL,
            "lemma4_pass": cell.lle_matches_cd,
        })

    l1 = [theory.verify_lemma1(v, t, 10, 20) for v, t in _lemma1_fields(args.lemma1_family, args.fields, args.seed)]
    l3 = theory.lemma3_campaign(args.bins, args.seed)
    summary = [
        {"suite": "lemma1", "checked": len(l1), "violations": sum(not r.passed for r in l1),
         "detail": f"equality splits {sum(r.equality_splits for r in l1)}, strict {sum(r.strict_splits for r in l1)}, "
                   f"max decomposition error {max((r.max_decomposition_error for r in l1), default=0):.3g}"},
        {"suite": "lemma2", "checked": len(rows), "violations": sum(not r["lemma2_pass"] for r in rows),
         "detail": f"closed form sigma^2/|B|^2 matched in {sum(r['closed_form_match'] for r in rows)}/{len(rows)} cells; "
                   "Monte-Carlo tracks sigma^2/|B|"},
        {"suite": "lemma3", "checked": l3.bins + len(rows), "violations": l3.violations + sum(not r["lemma3_pass"] for r in rows),
         "detail": f"uncentered-slope variant exceeded CD on {l3.uncentered_violations}/{l3.bins} random bins"},
        {"suite": "lemma4", "checked": len(rows), "violations": sum(not r["lemma4_pass"] for r in rows),
         "detail": "LLE vs CD robustness on matched seeds"},
    ]
    violated = any(s["violations"] for s in summary)
    return rows, summary, violated


def _csv_text(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_simulate(args) -> int:
    rows, summary, violated = simulate(args)
    text = _csv_text(rows, SIM_COLUMNS)
    if args.out:
        Path(args.out).write_text(text)
        Path(args.out).with_name(Path(args.out).stem + "_summary.csv").write_text(
            _csv_text(summary, ("suite", "checked", "violations", "detail")))
    else:
        sys.stdout.write(text)
    for s in summary:
        status = "PASS" if not s["violations"] else "FAIL"
        print(f"{status} {s['suite']}: {s['checked']} checked, {s['violations']} violations; {s['detail']}",
              file=sys.stderr)
    return EXIT_LEMMA if violated else EXIT_OK


# --- wiring ------------------------------------------------------------------------

def _add_data_args(p, required=True):
    p.add_argument("--data", required=required, help="CSV, label first, no header (relative paths fall back "
                   f"to ${experiment.DATA_DIR_ENV})")
    p.add_argument("--max-rows", type=int, default=None)


def _add_run_args(p):
    p.add_argument("--config", help="experiment config (JSON)")
    _add_data_args(p, required=False)
    p.add_argument("--generator", default="smooth-nonlinear", choices=datasets.GENERATORS)
    p.add_argument("--fields", type=int, default=8)
    p.add_argument("--rows", type=int, default=20_000)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--encoder", default="LLE", choices=encoding.KINDS)
    p.add_argument("--granularity", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="featdisc", description="feature discretization toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bin", help="fit bin boundaries for every field")
    _add_data_args(p)
    p.add_argument("--granularity", type=int, required=True)
    p.add_argument("--strategy", default="equal_frequency", choices=binning.STRATEGIES)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bin)

    p = sub.add_parser("encode", help="encode rows to the sparse text format")
    _add_data_args(p)
    p.add_argument("--bins", required=True, help="file written by 'featdisc bin'")
    p.add_argument("--kind", default="LLE", choices=("CD", "LLE"))
    p.add_argument("--missing", default="auto", choices=("auto", "always", "never"))
    p.add_argument("--encoder-out")
    p.add_argument("--out")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", help="train one model (a single experiment cell)")
    _add_run_args(p)
    p.add_argument("--model", choices=("lr", "dnn"))
    p.add_argument("--ratio", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("experiment", help="run an experiment grid")
    _add_run_args(p)
    p.add_argument("--ratios", type=_floats)
    p.add_argument("--models", help="comma-separated: lr,dnn")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("simulate", help="verify the bin correctness/robustness lemmas")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", type=_ints, default=(2, 4, 8, 16))
    p.add_argument("--sigmas", type=_floats, default=(0.5, 1.0, 2.0))
    p.add_argument("--fields", type=int, default=100, help="random fields in the lemma-1 campaign")
    p.add_argument("--bins", type=int, default=100, help="random bins in the lemma-3 campaign")
    p.add_argument("--lemma1-family", default="random", choices=("random", "constant", "linear"))
    p.add_argument("--out", help="CSV report path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("params", help="embedding parameter counts")
    p.add_argument("--config")
    p.add_argument("--encoder", default="LLE", choices=encoding.KINDS)
    p.add_argument("--fields", type=int, default=28)
    p.add_argument("--granularity", type=int, default=10)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_params)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (DataError, FileNotFoundError) as exc:
        print(f"featdisc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigurationError, ValueError) as exc:
        print(f"featdisc: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
