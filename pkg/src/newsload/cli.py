"""Command-line entry point: ``newsload <command> --config run.cfg --out DIR``.

Exit codes: 0 success, 1 usage, 2 data error, 3 model/checkpoint error,
4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from newsload import __version__
from newsload import autoencoder as ae
from newsload import forecaster as fc
from newsload import pipeline as pl
from newsload.config import RunConfig, load_config, parse_variant
from newsload.errors import ConfigError, NewsloadError
from newsload.granger import write_report as write_granger
from newsload.ingest import read_frame_csv, write_frame_csv, write_source_files
from newsload.metrics import write_comparison, write_report
from newsload import textfeat

log = logging.getLogger("newsload")

COMMANDS = ("ingest", "synth", "textfeat", "granger", "autoencode", "train", "predict", "evaluate", "ablate", "report")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def write_manifest(out, command, cfg, outputs):
    _dump_json(
        {"tool": "newsload", "version": __version__, "command": command,
         "config": cfg.resolved(), "outputs": outputs},
        os.path.join(out, "manifest.json"),
    )


def _frame(args, cfg):
    if getattr(args, "frame", None):
        return read_frame_csv(args.frame)
    frame, _ = pl.load_frame(cfg)
    return frame


def cmd_synth(args, cfg):
    frame, truth = pl.load_frame(cfg) if cfg.synthetic else (None, None)
    if frame is None:
        raise ConfigError("synth needs synthetic = true")
    paths = write_source_files(frame, os.path.join(args.out, "data"))
    _dump_json(truth, os.path.join(args.out, "ground_truth.json"))
    return {"files": [os.path.relpath(p, args.out) for p in paths], "days": frame.n_days}


def cmd_ingest(args, cfg):
    frame = _frame(args, cfg)
    write_frame_csv(frame, os.path.join(args.out, "frame.csv"))
    return {
        "rows": len(frame.timestamps), "days": frame.n_days, "columns": frame.names(),
        "first_day": str(frame.dates[0]), "last_day": str(frame.dates[-1]),
    }


def cmd_textfeat(args, cfg):
    path = args.corpus or cfg.corpus_path
    if not path:
        raise ConfigError("textfeat needs corpus_path or --corpus")
    corpora = textfeat.read_corpus(path, cfg.text_fields)
    lex = textfeat.Lexicon.from_csv(cfg.lexicon_path) if cfg.lexicon_path else None
    tables = textfeat.build_tables(corpora, list(cfg.keywords), lex)
    written = [os.path.basename(textfeat.write_table(t, args.out)) for _, t in sorted(tables.items())]
    return {"days": len(corpora), "files": written}


def cmd_granger(args, cfg):
    frame = _frame(args, cfg)
    split = pl.resolve_split(frame, cfg)
    names = frame.names("text")
    if not names:
        raise ConfigError("frame has no text feature columns")
    results = pl.granger_screen(frame, names, split, cfg)
    write_granger(results, os.path.join(args.out, "granger_report.csv"))
    return {"tested": len(results), "selected": [r.feature_name for r in results if r.selected],
            "max_lag": cfg.granger_max_lag, "alpha": cfg.granger_alpha}


def cmd_autoencode(args, cfg):
    frame = _frame(args, cfg)
    split = pl.resolve_split(frame, cfg)
    model, code = pl.fit_compressor(frame, split, cfg)
    ae.save_model(model, os.path.join(args.out, "ae.json"))
    with open(os.path.join(args.out, "compressed.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "cg"])
        for d, v in zip(frame.dates, code):
            w.writerow([str(d), f"{v:.6g}"])
    return {"channel_plan": list(model.channel_plan), "train_loss": model.train_loss, "val_loss": model.val_loss}


def _progress(epoch, train_loss, val_loss):
    log.info("epoch %d train %.6g val %.6g", epoch, train_loss, val_loss)


def cmd_train(args, cfg):
    frame = _frame(args, cfg)
    run = pl.fit_variant(frame, cfg.variant, cfg, progress=_progress)
    fc.save_model(run.model, os.path.join(args.out, "model.json"))
    out = {"variant": cfg.variant, "split_date": str(run.split), "features": list(run.model.feature_names),
           "epochs": len(run.model.log) - 1}
    if run.compressor is not None:
        ae.save_model(run.compressor, os.path.join(args.out, "ae.json"))
    if run.granger:
        write_granger(run.granger, os.path.join(args.out, "granger_report.csv"))
    return out


def _load_for_eval(args, cfg):
    if not args.model:
        raise ConfigError("--model is required")
    model = fc.load_model(args.model)
    ae_path = os.path.join(os.path.dirname(os.path.abspath(args.model)), "ae.json")
    compressor = ae.load_model(ae_path) if os.path.exists(ae_path) else None
    frame = _frame(args, cfg)
    split = pl.resolve_split(frame, cfg)
    return model, pl.feature_frame_for(frame, model, compressor), split


def cmd_predict(args, cfg):
    model, frame, split = _load_for_eval(args, cfg)
    forecasts, _ = pl.forecast_test(model, frame, split)
    with open(os.path.join(args.out, "forecasts.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["anchor_day", "target_day", "slot", "point"] + [f"q{q:g}" for q in model.quantiles])
        for f in forecasts:
            for k in range(len(f.point)):
                row = [str(f.anchor_day), str(f.anchor_day + 1), k, f"{f.point[k]:.6g}"]
                if f.quantiles is not None:
                    row += [f"{v:.6g}" for v in f.quantiles[:, k]]
                w.writerow(row)
    return {"forecast_days": len(forecasts)}


def cmd_evaluate(args, cfg):
    model, frame, split = _load_for_eval(args, cfg)
    report = pl.evaluate(model, frame, split, cfg, args.name or os.path.basename(os.path.dirname(os.path.abspath(args.model))))
    write_report(report, args.out)
    return {"days": report.n_days, "interval": report.interval}


def cmd_ablate(args, cfg):
    frame = _frame(args, cfg)
    variants = tuple(v.strip() for v in args.variants.split(",")) if args.variants else cfg.variants
    for v in variants:
        parse_variant(v)
    runs, rows, failures = pl.ablate(frame, variants, cfg, cfg.baseline or None, progress=_progress)
    for i, run in enumerate(runs):
        sub = os.path.join(args.out, f"{i:02d}_{run.name}")
        os.makedirs(sub, exist_ok=True)
        fc.save_model(run.model, os.path.join(sub, "model.json"))
        if run.compressor is not None:
            ae.save_model(run.compressor, os.path.join(sub, "ae.json"))
        write_report(run.report, sub)
    if rows:
        write_comparison(rows, os.path.join(args.out, "comparison.csv"))
    return {"variants": list(variants), "failures": failures}


def format_table(rows):
    """Plain-text comparison table with one row per model."""
    cols = ["model", "rmse", "mae", "smape", "rmse_improvement_pct", "mae_improvement_pct", "smape_improvement_pct"]
    head = ["Model", "RMSE", "MAE", "SMAPE(%)", "dRMSE%", "dMAE%", "dSMAPE%"]
    lines = ["  ".join(f"{h:>12}" for h in head)]
    for r in rows:
        lines.append("  ".join(f"{str(r[c]):>12}" if c == "model" else f"{float(r[c]):>12.2f}" for c in cols))
    return "\n".join(lines) + "\n"


def cmd_report(args, cfg):
    src = args.input or os.path.join(args.out, "comparison.csv")
    try:
        with open(src, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {src}: {exc}") from None
    text = format_table(rows)
    with open(os.path.join(args.out, "table.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return {"source": os.path.basename(src), "rows": len(rows)}


HANDLERS = {
    "ingest": cmd_ingest, "synth": cmd_synth, "textfeat": cmd_textfeat, "granger": cmd_granger,
    "autoencode": cmd_autoencode, "train": cmd_train, "predict": cmd_predict,
    "evaluate": cmd_evaluate, "ablate": cmd_ablate, "report": cmd_report,
}


def build_parser():
    p = _Parser(prog="newsload", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="flat key = value run configuration")
        s.add_argument("--out", help="output directory (overrides out_dir)")
        s.add_argument("--seed", type=int, help="overrides the config seed")
        s.add_argument("--frame", help="use an existing frame.csv instead of re-ingesting")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "ablate":
            s.add_argument("--variants", help="comma list such as LSTM,LSTM-S-G,LSTM-S-G-CG")
        if name in ("predict", "evaluate"):
            s.add_argument("--model", help="model.json checkpoint")
        if name == "evaluate":
            s.add_argument("--name", help="model name used in the report")
        if name == "textfeat":
            s.add_argument("--corpus", help="JSON-lines corpus (overrides corpus_path)")
        if name == "report":
            s.add_argument("--input", help="comparison.csv to render")
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out:
            cfg.out_dir = args.out
        args.out = cfg.out_dir
        if args.command not in ("report", "textfeat"):
            cfg.validate()
        elif cfg.seed is None:
            raise ConfigError("seed is mandatory (set 'seed' in the config or pass --seed)")
        os.makedirs(args.out, exist_ok=True)
        outputs = HANDLERS[args.command](args, cfg)
        write_manifest(args.out, args.command, cfg, outputs)
    except NewsloadError as exc:
        print(f"newsload {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FloatingPointError as exc:  # pragma: no cover
        print(f"newsload {args.command}: numeric failure: {exc}", file=sys.stderr)
        return 4
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
