"""Command-line front end.

Exit codes: 0 success, 2 bad arguments or configuration, 3 missing input
file, 4 malformed input data, 5 a stage failed on valid input (training or
data-quality errors), 1 any other package error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
import warnings
from pathlib import Path

import numba
import numpy as np

from . import __version__, stats
from .config import ARTIFACT_DEFAULTS, PipelineConfig, load_config
from .data_model import Scheme, hstack, label_scores
from .errors import (ConfigError, DataQualityError, EmptyRecordingError, FormatError, SchemaError,
                     StressFusionError, SubjectError, TrainingError)
from .evaluate import (ConfusionMatrix, loocv, metrics, metrics_text, modality_sweep,
                       write_report_json)
from .features import assemble_subject_features, build_dataset, write_feature_csv
from .ingest import cohort_specs, generate_synthetic_subject, load_cohort, write_cohort
from .preprocess import screen_artifacts
from .select import band_columns, band_selection, fuse_early, wrapper_select

MODALITIES = ("EEG", "GSR", "PPG")


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, SubjectError):
        exc = exc.cause
    if isinstance(exc, FileNotFoundError):
        return 3
    if isinstance(exc, (SchemaError, FormatError, EmptyRecordingError)):
        return 4
    if isinstance(exc, (TrainingError, DataQualityError)):
        return 5
    if isinstance(exc, ConfigError):
        return 2
    return 1


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, cfg: PipelineConfig | None, extra: dict | None = None) -> Path:
    """Record config hash, seed, versions and a checksum of every output file."""
    files = {p.name: _sha256(p) for p in sorted(out.iterdir()) if p.is_file() and p.name != "manifest.json"}
    doc = {
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "numba": numba.__version__,
        "files": files,
    }
    if cfg is not None:
        doc.update(config_sha256=cfg.digest(), seed=cfg.seed, config=cfg.to_text(include_paths=False).splitlines(),
                   artifact_defaults=list(ARTIFACT_DEFAULTS))
    doc.update(extra or {})
    path = out / "manifest.json"
    _write_json(path, doc)
    return path


# -- pipeline stages -----------------------------------------------------------

def load_datasets(cfg: PipelineConfig, records=None):
    records = records if records is not None else load_cohort(cfg.input_dir)
    fc = cfg.feature_config()
    vectors = [assemble_subject_features(r, fc) for r in records]
    return records, {s: build_dataset(records, s, fc, vectors, cfg.pss_mean, cfg.pss_sd)
                     for s in cfg.schemes}


def select_and_evaluate(cfg: PipelineConfig, dataset, cache=None):
    """Band selection, fusion and LOOCV for the configured classifier on one scheme."""
    spec = cfg.spec()
    cache = cache if cache is not None else {}
    band = band_selection(dataset.modality("EEG"), spec, cfg.band_iterations, cfg.seed, cfg.threads)
    per_mod = {"EEG": band_columns(dataset, band.chosen), "GSR": dataset.modality("GSR"),
               "PPG": dataset.modality("PPG")}
    if cfg.fusion == "lff":
        selections = {}
        for m in MODALITIES:
            key = (dataset.scheme.value, spec.kind, m)
            if key not in cache:
                cache[key] = wrapper_select(per_mod[m], spec, cfg.seed, cfg.threads)
            selections[m] = cache[key]
        fused = hstack([per_mod[m].columns(selections[m].chosen) for m in MODALITIES])
    else:
        fused, res = fuse_early([per_mod[m] for m in MODALITIES], spec, cfg.seed, cfg.threads)
        selections = {"EEG+GSR+PPG": res}
    if fused.n_features == 0:
        return band, per_mod, selections, None
    report = loocv(fused, spec, cfg.seed, cfg.threads)
    return band, per_mod, selections, report


NO_FEATURES = "feature selection kept no features; nothing beat the majority-class rate"


def run_sweep(cfg: PipelineConfig, per_mod_by_scheme: dict, cache: dict):
    def selector(data, spec, seed):
        mod = data.tags[0].modality if data.n_features else "?"
        key = (data.scheme.value, spec.kind, mod)
        if key not in cache:
            cache[key] = wrapper_select(data, spec, seed, cfg.threads)
        return cache[key]

    specs = {k: cfg.spec(k) for k in ("mlp", "svm", "nb")}
    return modality_sweep(per_mod_by_scheme, specs, cfg.schemes, cfg.seed, selector=selector,
                          threads=cfg.threads)


def run_pipeline(cfg: PipelineConfig, out: Path, records=None, log=print) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    records, datasets = load_datasets(cfg, records)
    (out / "config.txt").write_text(cfg.to_text(include_paths=False), encoding="utf-8")
    for s, d in datasets.items():
        write_feature_csv(out / f"features_{s.value}.csv", d)
    measures = stats.raw_measures(records, cfg.feature_config().stft, cfg.feature_config().sg)
    sig = stats.significance_report(measures, cfg.schemes, cfg.pss_mean, cfg.pss_sd)
    (out / "significance.txt").write_text(sig.to_text(), encoding="utf-8")
    sig.write_csv(out / "significance.csv")
    cache, per_mod_by_scheme, summary = {}, {}, {}
    for s, d in datasets.items():
        band, per_mod, selections, report = select_and_evaluate(cfg, d, cache)
        per_mod_by_scheme[s] = per_mod
        _write_json(out / f"band_selection_{s.value}.json", band.to_dict())
        _write_json(out / f"feature_selection_{s.value}.json",
                    {m: r.to_dict() for m, r in selections.items()})
        head = {"classifier": cfg.classifier, "fusion": cfg.fusion, "chosen_band": str(band.chosen)}
        if report is None:
            _write_json(out / f"report_{s.value}.json", {**head, "error": NO_FEATURES})
            (out / f"report_{s.value}.txt").write_text(NO_FEATURES + "\n", encoding="utf-8")
            summary[s.value] = {"chosen_band": str(band.chosen), "accuracy": None, "n_features": 0}
            log(f"[{s.value}-class] band {band.chosen}  {NO_FEATURES}")
            continue
        write_report_json(out / f"report_{s.value}.json", report, head)
        text = report.confusion.to_text() + "\n" + metrics_text(report.metrics, report.confusion.class_names)
        (out / f"report_{s.value}.txt").write_text(text, encoding="utf-8")
        summary[s.value] = {"chosen_band": str(band.chosen), "accuracy": report.accuracy,
                            "n_features": len(report.feature_names)}
        log(f"[{s.value}-class] band {band.chosen}  {cfg.fusion.upper()} {cfg.classifier.upper()} "
            f"accuracy {100 * report.accuracy:.2f}% with {len(report.feature_names)} features")
    if cfg.run_sweep:
        sweep = run_sweep(cfg, per_mod_by_scheme, cache)
        (out / "sweep.txt").write_text(sweep.to_text(), encoding="utf-8")
        sweep.write_csv(out / "sweep.csv")
        log(sweep.to_text())
    write_manifest(out, cfg, {"summary": summary, "n_subjects": len(records)})
    return summary


# -- subcommands ---------------------------------------------------------------

def cmd_synth(args, cfg: PipelineConfig) -> int:
    if args.n < 4:
        raise ConfigError("synth needs at least 4 subjects")
    out = Path(args.out)
    specs = cohort_specs(args.n, cfg.seed, duration_seconds=args.duration)
    records = [generate_synthetic_subject(s) for s in specs]
    write_cohort(out, records, [s.planted_class for s in specs])
    scores = [r.pss_score for r in records]
    counts = {}
    for scheme in Scheme:
        labels = label_scores(scores, scheme)
        counts[scheme.value] = {c.value: sum(lab.value is c for lab in labels) for c in scheme.classes}
    write_manifest(out, None, {
        "generator": {"n_subjects": args.n, "seed": cfg.seed, "duration_seconds": args.duration},
        "subjects": [{"subject_id": r.subject_id, "pss_score": r.pss_score,
                      "planted_class": s.planted_class.value} for r, s in zip(records, specs)],
        "label_counts": counts,
    })
    print(f"wrote {args.n} subjects to {out}")
    return 0


def cmd_ingest_check(args, cfg: PipelineConfig) -> int:
    records = load_cohort(args.input or cfg.input_dir)
    print(f"{'subject':<10} {'pss':>4} {'seconds':>8} {'rejected_epochs':>16}")
    for r in records:
        _, rejected = screen_artifacts(r.eeg, cfg.feature_config().artifact)
        print(f"{r.subject_id:<10} {r.pss_score:>4d} {r.eeg.duration_seconds:>8.1f} "
              f"{int(rejected.sum()):>7d}/{rejected.size:<8d}")
    return 0


def cmd_features(args, cfg: PipelineConfig) -> int:
    _, datasets = load_datasets(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s, d in datasets.items():
        write_feature_csv(out / f"features_{s.value}.csv", d)
        print(f"{s.value}-class: {d.n_subjects} subjects x {d.n_features} features -> "
              f"{out / f'features_{s.value}.csv'}")
    return 0


def cmd_stats(args, cfg: PipelineConfig) -> int:
    records = load_cohort(cfg.input_dir)
    fc = cfg.feature_config()
    report = stats.significance_report(stats.raw_measures(records, fc.stft, fc.sg), cfg.schemes,
                                       cfg.pss_mean, cfg.pss_sd)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "significance.csv")
    print(report.to_text(), end="")
    return 0


def cmd_select_band(args, cfg: PipelineConfig) -> int:
    _, datasets = load_datasets(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s, d in datasets.items():
        res = band_selection(d.modality("EEG"), cfg.spec(), cfg.band_iterations, cfg.seed, cfg.threads)
        _write_json(out / f"band_selection_{s.value}.json", res.to_dict())
        print(f"{s.value}-class: chosen band {res.chosen} (mean accuracy {100 * res.objective:.2f}%)")
    return 0


def cmd_select_features(args, cfg: PipelineConfig) -> int:
    _, datasets = load_datasets(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s, d in datasets.items():
        band, _, selections, _ = select_and_evaluate(cfg, d)
        _write_json(out / f"feature_selection_{s.value}.json",
                    {m: r.to_dict() for m, r in selections.items()})
        for m, r in selections.items():
            print(f"{s.value}-class {m}: {', '.join(r.chosen) or '(none)'}")
    return 0


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    _, datasets = load_datasets(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s, d in datasets.items():
        band, _, _, report = select_and_evaluate(cfg, d)
        if report is None:
            print(f"{s.value}-class, band {band.chosen}: {NO_FEATURES}")
            continue
        write_report_json(out / f"report_{s.value}.json", report, {"chosen_band": str(band.chosen)})
        print(f"{s.value}-class, band {band.chosen}:")
        print(report.confusion.to_text())
        print(metrics_text(report.metrics, report.confusion.class_names))
    return 0


def cmd_sweep(args, cfg: PipelineConfig) -> int:
    _, datasets = load_datasets(cfg)
    cache, per_mod = {}, {}
    for s, d in datasets.items():
        band = band_selection(d.modality("EEG"), cfg.spec(), cfg.band_iterations, cfg.seed, cfg.threads)
        per_mod[s] = {"EEG": band_columns(d, band.chosen), "GSR": d.modality("GSR"), "PPG": d.modality("PPG")}
    sweep = run_sweep(cfg, per_mod, cache)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    sweep.write_csv(out / "sweep.csv")
    print(sweep.to_text(), end="")
    return 0


def read_confusion_csv(path) -> ConfusionMatrix:
    """Square integer matrix, one row per line; an optional non-numeric header row names the classes."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing confusion matrix file {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [[c.strip() for c in r] for r in csv.reader(fh) if any(c.strip() for c in r)]
    names = ()
    if rows and not all(_is_int(c) for c in rows[0]):
        names, rows = tuple(rows[0]), rows[1:]
    if not rows:
        raise FormatError(f"{path}: no matrix rows")
    if any(len(r) != len(rows) for r in rows):
        raise FormatError(f"{path}: matrix must be square with {len(rows)} columns per row")
    if not all(_is_int(c) for r in rows for c in r):
        raise FormatError(f"{path}: counts must be non-negative integers")
    return ConfusionMatrix(np.array([[int(c) for c in r] for r in rows]), names)


def _is_int(text: str) -> bool:
    return text.isdigit()


def cmd_metrics(args, cfg: PipelineConfig) -> int:
    cm = read_confusion_csv(args.confusion)
    print(cm.to_text())
    print(metrics_text(metrics(cm), cm.class_names), end="")
    return 0


def cmd_run(args, cfg: PipelineConfig) -> int:
    run_pipeline(cfg, Path(cfg.output_dir))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--threads", type=int, help="maximum worker threads")
    common.add_argument("--scheme", choices=("two", "three", "both"))
    common.add_argument("--fusion", choices=("eff", "lff"))
    common.add_argument("--classifier", choices=("mlp", "svm", "nb"))
    common.add_argument("--input", help="cohort directory (overrides input_dir)")
    common.add_argument("--out", help="output directory (overrides output_dir)")

    parser = argparse.ArgumentParser(prog="stressfusion", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("synth", parents=[common], help="write a synthetic cohort")
    p.add_argument("--n", type=int, default=40, help="number of subjects (>= 4)")
    p.add_argument("--duration", type=float, default=180.0, help="recording length in seconds")
    p.set_defaults(func=cmd_synth)
    for name, func, text in (
            ("ingest-check", cmd_ingest_check, "parse a cohort and report artifact screening"),
            ("features", cmd_features, "write the 58-feature tables"),
            ("stats", cmd_stats, "t-test / ANOVA significance report"),
            ("select-band", cmd_select_band, "EEG band subset search"),
            ("select-features", cmd_select_features, "wrapper feature selection with fusion"),
            ("evaluate", cmd_evaluate, "LOOCV of the configured classifier"),
            ("sweep", cmd_sweep, "modality x classifier x scheme grid"),
            ("run", cmd_run, "full pipeline into the output directory")):
        sub.add_parser(name, parents=[common], help=text).set_defaults(func=func)
    p = sub.add_parser("metrics", parents=[common], help="metrics from a confusion-matrix CSV")
    p.add_argument("confusion", help="CSV file, rows = actual class")
    p.set_defaults(func=cmd_metrics)
    return parser


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = dict(seed=args.seed, threads=args.threads, scheme=args.scheme, fusion=args.fusion,
                     classifier=args.classifier, input_dir=args.input)
    if args.command != "synth":
        overrides["output_dir"] = args.out
    return cfg.with_overrides(**overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "synth" and not args.out:
        args.out = "cohort"
    try:
        cfg = resolve_config(args)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            warnings.simplefilter("ignore", UserWarning)
            return args.func(args, cfg)
    except (StressFusionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
