"""Command-line entry point.

Every subcommand resolves a :class:`RunConfig` from an optional flat
``key = value`` config file, then applies command-line flags on top.
Artifacts are JSON with a fixed key order so identical inputs produce
byte-identical files. Commands share the output directory; the last
writer wins.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

from . import classifiers, evaluation, features, filtering, mapping, registry, taxonomy
from .errors import ConfigError, DataError, PtmcatError

logger = logging.getLogger("ptmcat")

EXIT_CODES = """\
exit codes:
  0  success
  2  configuration error (bad flag, config key or value)
  3  data error (missing file, bad header, schema violation, too few samples)
  4  training error (empty corpus, single class, dimension mismatch)
"""


@dataclass
class RunConfig:
    registry: str | None = None
    taxonomy: str | None = None
    evidence: str | None = None
    out_dir: str = "artifacts"
    delimiter: str = ","
    strict_ingest: bool = False
    combine: str = "AND"
    alpha: float | None = None
    beta: float | None = None
    min_df: int = 2
    stem: bool = False
    ngram_max: int = 1
    classifier: str = "svc"
    smoothing: float = 1.0
    normalize_weights: bool = False
    C: float = 1.0
    epochs: int = 50
    solver: str = "smo"
    k: int = 10
    seed: int | None = None
    averaging: str = "weighted"
    threshold: float = mapping.DEFAULT_THRESHOLD
    strict: bool = False

    def validate(self) -> "RunConfig":
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if not 0 < self.threshold <= 1:
            raise ConfigError("threshold must be in (0, 1]")
        if self.combine.upper() not in filtering.COMBINE_MODES:
            raise ConfigError(f"combine must be one of {filtering.COMBINE_MODES}")
        if self.classifier.lower() not in ("cnb", "svc", "both"):
            raise ConfigError("classifier must be cnb, svc or both")
        if self.averaging not in evaluation.AVERAGINGS:
            raise ConfigError(f"averaging must be one of {evaluation.AVERAGINGS}")
        if self.solver not in classifiers.SOLVERS:
            raise ConfigError(f"solver must be one of {classifiers.SOLVERS}")
        if self.min_df < 1 or self.ngram_max < 1 or self.epochs < 1:
            raise ConfigError("min_df, ngram_max and epochs must be >= 1")
        if self.smoothing <= 0 or self.C <= 0:
            raise ConfigError("smoothing and C must be positive")
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be non-negative")
        return self

    def pipeline(self, classifier: str) -> evaluation.PipelineConfig:
        return evaluation.PipelineConfig(
            classifier=classifier.upper(),
            min_df=self.min_df,
            stem=self.stem,
            ngram_max=self.ngram_max,
            smoothing=self.smoothing,
            normalize_weights=self.normalize_weights,
            C=self.C,
            epochs=self.epochs,
            solver=self.solver,
            seed=self.seed if self.seed is not None else 0,
        )


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(name: str, raw: str, annotation: str):
    raw = raw.strip()
    if "None" in annotation and raw.lower() in ("", "none", "null"):
        return None
    try:
        if annotation.startswith("bool"):
            if raw.lower() in _TRUE:
                return True
            if raw.lower() in _FALSE:
                return False
            raise ValueError(raw)
        if annotation.startswith("int"):
            return int(raw)
        if annotation.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"config key {name!r}: cannot parse {raw!r} as {annotation}") from None
    return raw


def load_config_file(path) -> dict:
    """Parse a flat ``key = value`` file (``#`` starts a comment)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    types = {f.name: str(f.type) for f in fields(RunConfig)}
    values = {}
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ConfigError(f"{path}:{line_no}: unknown config key {key!r}")
        values[key] = _coerce(key, value, types[key])
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = load_config_file(args.config) if getattr(args, "config", None) else {}
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    return RunConfig(**values).validate()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file with RunConfig keys")
    p.add_argument("--registry", help="registry export (.csv or .jsonl)")
    p.add_argument("--out-dir", dest="out_dir", help="artifact directory (default: artifacts)")
    p.add_argument("--seed", type=int, help="random seed for folds and SVC sample order")
    p.add_argument("--delimiter", help="CSV delimiter (default ',')")
    p.add_argument("--strict-ingest", dest="strict_ingest", action=argparse.BooleanOptionalAction,
                   default=None, help="fail on malformed registry rows instead of skipping them")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _add_filter_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--combine", choices=["AND", "OR", "and", "or"],
                   help="how support and download conditions combine (default AND)")
    p.add_argument("--alpha", type=float, help="override the median-support threshold")
    p.add_argument("--beta", type=float, help="override the mean-downloads threshold")


def _add_model_opts(p: argparse.ArgumentParser, allow_both: bool) -> None:
    choices = ["cnb", "svc", "both"] if allow_both else ["cnb", "svc"]
    p.add_argument("--classifier", type=str.lower, choices=choices,
                   help="classifier kind (default svc)")
    p.add_argument("--min-df", dest="min_df", type=int, help="minimum document frequency (default 2)")
    p.add_argument("--stem", action=argparse.BooleanOptionalAction, default=None,
                   help="Porter-stem tokens (default off; needs nltk)")
    p.add_argument("--ngram-max", dest="ngram_max", type=int, help="largest word n-gram (default 1)")
    p.add_argument("--smoothing", type=float, help="CNB additive smoothing a (default 1)")
    p.add_argument("--normalize-weights", dest="normalize_weights",
                   action=argparse.BooleanOptionalAction, default=None,
                   help="CNB per-class weight normalisation (default off)")
    p.add_argument("--C", dest="C", type=float, help="SVC regularisation C (default 1)")
    p.add_argument("--epochs", type=int, help="SVC iteration budget in epochs (default 50)")
    p.add_argument("--solver", choices=list(classifiers.SOLVERS), help="SVC solver (default smo)")


def _add_mapping_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=float, help="similarity threshold T (default 0.8)")
    p.add_argument("--strict", action=argparse.BooleanOptionalAction, default=None,
                   help="require similarity > T instead of >= T")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ptmcat",
        description="Categorise pre-trained models by pipeline tag and map them to SE tasks.",
        epilog=EXIT_CODES,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse a registry export and summarise it", epilog=EXIT_CODES,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(p)

    p = sub.add_parser("filter", help="build the classification dataset", epilog=EXIT_CODES,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(p)
    _add_filter_opts(p)

    p = sub.add_parser("train", help="fit features and a classifier on the filtered dataset",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(p)
    _add_filter_opts(p)
    _add_model_opts(p, allow_both=False)

    p = sub.add_parser("evaluate", help="k-fold cross-validation of CNB and/or SVC",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(p)
    _add_filter_opts(p)
    _add_model_opts(p, allow_both=True)
    p.add_argument("--k", type=int, help="number of folds (default 10)")
    p.add_argument("--averaging", choices=list(evaluation.AVERAGINGS),
                   help="headline averaging scheme (default weighted)")
    p.add_argument("--keep-predictions", action="store_true",
                   help="store per-fold predictions in the report")

    p = sub.add_parser("map", help="map a PTM and SE task to pipeline tags", epilog=EXIT_CODES,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(p)
    _add_mapping_opts(p)
    p.add_argument("--ptm", required=True, help="PTM name, e.g. RoBERTa")
    p.add_argument("--task", required=True, help="SE task or macro id")

    p = sub.add_parser("explain", help="print PTM / dominant tag / macro tasks rows",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(p)
    _add_mapping_opts(p)
    p.add_argument("--ptm", action="append", required=True, help="PTM name (repeatable)")
    p.add_argument("--taxonomy", help="taxonomy JSON (default: bundled)")
    p.add_argument("--evidence", help="evidence JSON-lines (default: bundled)")
    p.add_argument("--json", action="store_true", help="emit JSON instead of text rows")

    p = sub.add_parser("screen", help="list evidence documents matching the keyword query",
                       epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="flat key = value file with RunConfig keys")
    p.add_argument("--taxonomy", help="taxonomy JSON (default: bundled)")
    p.add_argument("--evidence", help="evidence JSON-lines (default: bundled)")
    p.add_argument("--query", help="screening JSON with 'query' groups and 'years' (default: bundled)")
    p.add_argument("--all", action="store_true", help="also screen documents marked excluded")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text, encoding="utf-8")
    return path


def _load_registry(cfg: RunConfig, fallback_to_sample: bool = False) -> registry.Registry:
    path = cfg.registry
    if path is None:
        if not fallback_to_sample:
            raise ConfigError("--registry (or 'registry' in the config file) is required")
        path = taxonomy.bundled_path("registry_sample.csv")
    try:
        return registry.ingest(path, registry.IngestOptions(cfg.delimiter, cfg.strict_ingest))
    except FileNotFoundError as exc:
        raise DataError(f"registry file not found: {exc}") from None


def _require_seed(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise ConfigError("a seed is required for training and evaluation (--seed)")
    return cfg.seed


def _filtered(cfg: RunConfig):
    reg = _load_registry(cfg)
    return filtering.filter_registry(reg.records, cfg.combine, cfg.alpha, cfg.beta)


def cmd_ingest(args, cfg: RunConfig) -> int:
    reg = _load_registry(cfg)
    summary = {
        "source_path": reg.source_path,
        "ingested_count": reg.ingested_count,
        "rejected_count": reg.rejected_count,
        "stats": registry.registry_stats(reg.records).to_dict(),
    }
    _write(Path(cfg.out_dir), "ingest_summary.json", _dump(summary))
    print(_dump(summary), end="")
    return 0


def cmd_filter(args, cfg: RunConfig) -> int:
    dataset, report = _filtered(cfg)
    out = Path(cfg.out_dir)
    _write(out, "filter_report.json", report.to_json())
    _write(out, "filter_table.txt", report.to_table())
    registry.write_jsonl(dataset, out / "dataset_f.jsonl")
    print(report.to_table(), end="")
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    seed = _require_seed(cfg)
    dataset, _ = _filtered(cfg)
    pipe = cfg.pipeline(cfg.classifier)
    tokens = [features.preprocess(r.card_data, stem=pipe.stem) for r in dataset]
    if pipe.ngram_max > 1:
        tokens = [features.add_ngrams(t, pipe.ngram_max) for t in tokens]
    space = features.fit(tokens, min_df=pipe.min_df)
    vectors = features.transform_all(space, tokens)
    model = classifiers.train(
        pipe.classifier, vectors, [r.pipeline_tag for r in dataset],
        n_features=len(space), **pipe.classifier_params(),
    )
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    space.save(out / "feature_space.json")
    model.save(out / f"model_{pipe.classifier.lower()}.json")
    _write(out, "train_config.json", _dump({**pipe.to_dict(), "seed": seed, "n_docs": len(dataset)}))
    print(f"trained {pipe.classifier} on {len(dataset)} documents, "
          f"{len(space)} features, {len(model.classes)} classes -> {out}")
    return 0


def cmd_evaluate(args, cfg: RunConfig) -> int:
    seed = _require_seed(cfg)
    dataset, _ = _filtered(cfg)
    kinds = ["cnb", "svc"] if cfg.classifier.lower() == "both" else [cfg.classifier.lower()]
    out = Path(cfg.out_dir)
    reports = []
    for kind in kinds:
        report = evaluation.evaluate_cv(
            dataset, cfg.pipeline(kind), k=cfg.k, seed=seed, averaging=cfg.averaging,
            keep_predictions=getattr(args, "keep_predictions", False),
        )
        _write(out, f"cv_report_{kind}.json", report.to_json())
        reports.append(report)
    table = evaluation.render_cv_table(reports)
    _write(out, "cv_table.txt", table)
    print(table, end="")
    return 0


def cmd_map(args, cfg: RunConfig) -> int:
    reg = _load_registry(cfg, fallback_to_sample=True)
    matches = mapping.find_similar(args.ptm, reg.records, cfg.threshold, cfg.strict)
    entries = mapping.map_task(args.ptm, args.task, reg.records, cfg.threshold, cfg.strict)
    result = {
        "ptm": args.ptm,
        "task": args.task,
        "threshold": cfg.threshold,
        "strict": cfg.strict,
        "matches": [m.to_dict() for m in matches],
        "mapping": [e.to_dict() for e in sorted(entries)],
        "untagged_matches": sum(1 for m in matches if not m.pipeline_tag),
        "dominant_tag": mapping.dominant_tag(matches),
    }
    print(_dump(result), end="")
    return 0


def _load_evidence(cfg: RunConfig):
    tax = taxonomy.load_taxonomy(cfg.taxonomy)
    return taxonomy.load_evidence(cfg.evidence, tax)


def cmd_explain(args, cfg: RunConfig) -> int:
    reg = _load_registry(cfg, fallback_to_sample=True)
    docs = _load_evidence(cfg)
    rows = [mapping.explain_mapping(name, reg.records, docs, cfg.threshold, cfg.strict)
            for name in args.ptm]
    if args.json:
        print(_dump([r.to_dict() for r in rows]), end="")
    else:
        print("PTM | Pipeline tag | Macro SE tasks")
        for r in rows:
            print(r.to_text())
    return 0


def cmd_screen(args, cfg: RunConfig) -> int:
    docs = _load_evidence(cfg)
    query, _ = taxonomy.load_screening(args.query)
    pool = docs if args.all else [d for d in docs if d.included]
    for d in taxonomy.screen(pool, query):
        print(d.doc_id)
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "filter": cmd_filter,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "map": cmd_map,
    "explain": cmd_explain,
    "screen": cmd_screen,
}


def _report_error(exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except PtmcatError as exc:
        return _report_error(exc, exc.exit_code)
    except FileNotFoundError as exc:
        return _report_error(exc, DataError.exit_code)
    except (ValueError, TypeError) as exc:
        return _report_error(exc, ConfigError.exit_code)


if __name__ == "__main__":
    sys.exit(main())
