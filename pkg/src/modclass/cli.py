"""Command line entry point: ``modclass <subcommand>``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bayes import DiscriminantModel, discriminant_classify
from .distributions import sampled_ecdf, theoretical_cdf
from .harness import ExperimentConfig, build_models, emit_csv, run_experiment
from .signal import (
    ChannelConfig,
    Constellation,
    SymbolBlock,
    quadrature_feature,
    register_constellation,
    standard_constellation,
)
from .testpoints import pdf_crossings

log = logging.getLogger("modclass")


def _csv_list(cast):
    def parse(text):
        return [cast(v) for v in text.split(",") if v.strip()]
    return parse


def _L_entry(text):
    return text if text == "crossings" else int(text)


def _add_config_flags(p):
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    p.add_argument("--model-dir", help="model directory (default: $MODCLASS_MODEL_DIR)")
    p.add_argument("--classes", type=_csv_list(str))
    p.add_argument("--snr-db-grid", type=_csv_list(float))
    p.add_argument("--M", type=int, dest="M")
    p.add_argument("--trials", type=int)
    p.add_argument("--L-grid", type=_csv_list(_L_entry), dest="L_grid")
    p.add_argument("--classifiers", type=_csv_list(str))
    p.add_argument("--seed", type=int)
    p.add_argument("--priors", type=_csv_list(float))
    p.add_argument("--jobs", type=int)


def _config(args) -> ExperimentConfig:
    overrides = {k: getattr(args, k) for k in
                 ("classes", "snr_db_grid", "M", "trials", "L_grid", "classifiers",
                  "seed", "priors", "jobs")}
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _cmd_build(args):
    cfg = _config(args)
    root = build_models(cfg, args.model_dir, force=args.force)
    print(root)


def _cmd_run(args):
    cfg = _config(args)
    results = run_experiment(cfg, args.model_dir, build=not args.no_build)
    path = emit_csv(results, args.out)
    for r in results:
        print(f"snr={r.snr_db:+.2f} L={r.L} {r.classifier:<12} pc={r.pc:.4f} +- {r.stderr:.4f}")
    print(path)


def _cmd_crossings(args):
    names = [n.strip() for n in args.pair.split(",")]
    if len(names) != 2:
        raise ValueError("--pair takes exactly two comma-separated constellation names")
    s2 = ChannelConfig(args.snr_db).noise_variance
    A, B = (theoretical_cdf(standard_constellation(n), s2) for n in names)
    for c in pdf_crossings(A, B):
        print(repr(c))


def _read_iq(path) -> SymbolBlock:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                re_, im = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if lineno == 1:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: expected 're,im', got {row!r}") from None
            rows.append(complex(re_, im))
    if not rows:
        raise ValueError(f"{path}: no IQ samples")
    return SymbolBlock(np.array(rows))


def _cmd_classify(args):
    model = DiscriminantModel.from_json(Path(args.model).read_text(encoding="utf-8"))
    block = _read_iq(args.iq)
    z = quadrature_feature(block)
    if z.size != model.N:
        log.warning("model built for N=%d samples, IQ file gives N=%d; rescaling",
                    model.N, z.size)
        model = model.with_sample_count(z.size)
    k, scores = discriminant_classify(model, sampled_ecdf(z, model.testpoints))
    print(json.dumps({"class": model.names[k], "index": k,
                      "scores": dict(zip(model.names, map(float, scores)))}))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modclass", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--constellation", action="append", default=[], metavar="FILE",
                        help="register a user constellation from JSON {name, points}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-models", help="optimize and store testpoints and models")
    _add_config_flags(p)
    p.add_argument("--force", action="store_true", help="rebuild existing files")
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("run", help="run Monte Carlo trials and write CSV")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-build", action="store_true",
                   help="fail instead of building models that are missing")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("crossings", help="print pdf-crossings of a class pair")
    p.add_argument("--pair", required=True, help="e.g. 4QAM,16QAM")
    p.add_argument("--snr-db", type=float, required=True)
    p.set_defaults(func=_cmd_crossings)

    p = sub.add_parser("classify", help="classify an IQ capture with a stored model")
    p.add_argument("--model", required=True, help="*.model.json file")
    p.add_argument("--iq", required=True, help="CSV with one 're,im' row per symbol")
    p.set_defaults(func=_cmd_classify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        for path in args.constellation:
            c = Constellation.from_json(Path(path).read_text(encoding="utf-8"))
            register_constellation(c.name, c)
        args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"modclass: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
