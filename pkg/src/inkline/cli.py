"""Command-line pipeline: corpus synthesis, preprocessing, training,
generation, evaluation, and rendering."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import classifiers
from .config import RunConfig
from .corpus import default_writers, make_rng, make_template_set, render_line
from .dataset import line_from_record, read_records, record_from_line, write_records
from .diffusion import FontSynthesizer, generate as generate_glyph, linear_schedule, train_font
from .errors import EmptyDataset, InklineError, UnknownCategory
from .layout import LayoutModel, generate_in_context, train_teacher_forcing
from .metrics import RecognitionCounts, align_and_count, ar_cr, dtw_normalized, feature_gap
from .pipeline import (
    build_font_examples,
    layout_lines,
    load_font_model,
    load_layout_model,
    max_category,
    preprocess_record,
    record_is_decoupled,
    reference_trajectory,
    save_font_model,
    save_layout_model,
)
from .style_encoder import MultiScaleFeatures
from .svg import render_svg
from .trajectory import Glyph, Layout, compose_line, extract_layout, normalize_height, pad_or_truncate
from . import nn


def _load_config(path: str | None) -> RunConfig:
    return RunConfig.load(path) if path else RunConfig.toy()


def _write_loss_csv(path: str, history, header):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for step, row in enumerate(history):
            writer.writerow([step] + (list(row) if isinstance(row, tuple) else [row]))


def cmd_synth_corpus(args):
    writers = default_writers(args.writers, seed=args.seed)
    templates = make_template_set(args.categories, seed=args.seed)
    rng = make_rng(args.seed, 0x5EED)
    records = []
    for wi, writer in enumerate(writers):
        for j in range(args.lines):
            m = int(rng.integers(args.line_min, args.line_max + 1))
            cats = rng.integers(0, args.categories, size=m).tolist()
            line, layout = render_line(cats, writer, seed=args.seed * 100_000 + wi * 1000 + j,
                                       templates=templates)
            records.append(record_from_line(line, layout))
    write_records(args.out, records)
    print(f"wrote {len(records)} records to {args.out}")


def cmd_preprocess(args):
    records = read_records(args.infile)
    out = [preprocess_record(rec, rdp_eps=args.rdp_eps) for rec in records]
    write_records(args.out, out)
    print(f"preprocessed {len(out)} records to {args.out}")


def cmd_train_layout(args):
    cfg = _load_config(args.config)
    records = read_records(args.data)
    lines = layout_lines(records)
    seed = args.seed if args.seed is not None else cfg.seeds.layout
    model = LayoutModel(max_category(records) + 1, make_rng(seed, 0x1A))
    steps = args.steps if args.steps is not None else cfg.layout.steps
    history = train_teacher_forcing(
        model,
        lines,
        make_rng(seed, 0x1B),
        steps=steps,
        batch_size=cfg.layout.batch,
        learning_rate=cfg.layout.lr,
    )
    save_layout_model(model, args.out, cfg)
    _write_loss_csv(args.loss_csv or args.out + ".loss.csv", history, ["step", "l1_loss"])
    print(f"layout: {steps} steps, loss {history[0]:.4f} -> {history[-1]:.4f}, saved {args.out}")


def cmd_train_font(args):
    cfg = _load_config(args.config)
    records = read_records(args.data)
    seed = args.seed if args.seed is not None else cfg.seeds.font
    synth = FontSynthesizer(
        max_category(records) + 1, cfg.base_channels, make_rng(seed, 0x2A), n_max=cfg.font.n_max
    )
    examples, refs = build_font_examples(records, synth.n_pad, cfg.font.ref_len)
    schedule = cfg.make_schedule()
    steps = args.steps if args.steps is not None else cfg.font.steps
    history = train_font(
        synth,
        examples,
        refs,
        schedule,
        make_rng(seed, 0x2B),
        steps=steps,
        batch_size=cfg.font.batch,
        learning_rate=cfg.font.lr,
        clip_norm=cfg.font.clip,
        decay_per_batch=cfg.font.decay,
        contrastive=cfg.contrastive,
    )
    save_font_model(synth, args.out, cfg)
    _write_loss_csv(args.loss_csv or args.out + ".loss.csv", history,
                    ["step", "reconstruction", "contrastive"])
    print(
        f"font: {steps} steps, reconstruction {history[0][0]:.4f} -> {history[-1][0]:.4f}, "
        f"saved {args.out}"
    )


def _zero_reference(ref_len: int) -> np.ndarray:
    return np.tile(np.array([0.0, 0.0, -1.0]), (ref_len, 1))


def cmd_generate(args):
    cfg = _load_config(args.config)
    layout_model = load_layout_model(args.layout_ckpt, cfg)
    synth = load_font_model(args.font_ckpt, cfg)
    categories = [int(tok) for tok in args.text.split(",") if tok.strip() != ""]
    if not categories:
        raise EmptyDataset("--text must name at least one category id")

    prefix_boxes, prefix_cats = [], []
    ref_record = None
    if args.ref:
        ref_records = read_records(args.ref)
        if ref_records:
            ref_record = ref_records[0]
    if ref_record is not None:
        line, layout = line_from_record(ref_record)
        if layout is None:
            layout = extract_layout(line)
        n_prefix = min(args.prefix_len, len(layout.boxes))
        prefix_boxes = layout.boxes[:n_prefix]
        prefix_cats = [g.category for g in line.glyphs][:n_prefix]
        reference = reference_trajectory(ref_record, cfg.font.ref_len)
    else:
        print("warning: no reference line; using unconditional layout and a blank style reference",
              file=sys.stderr)
        reference = _zero_reference(cfg.font.ref_len)

    layout = generate_in_context(layout_model, prefix_boxes, prefix_cats, categories)
    schedule = cfg.make_schedule()
    seed = args.seed if args.seed is not None else cfg.seeds.generate
    rng = make_rng(seed, 0x9E)
    glyphs = [generate_glyph(synth, k, reference, schedule, rng) for k in categories]
    writer = ref_record["writer"] if ref_record else "unconditional"
    composed = compose_line(glyphs, layout, writer=writer)
    write_records(args.out, [record_from_line(composed, layout)])
    print(f"generated {len(glyphs)} glyphs for writer {writer!r} -> {args.out}")


def _record_layouts(records):
    out = []
    for rec in records:
        line, layout = line_from_record(rec)
        if layout is None:
            layout = extract_layout(line)
        if len(layout) >= 2:
            out.append(layout)
    return out


def _normalized_glyphs(records):
    out = []
    for rec in records:
        line, _ = line_from_record(rec)
        for g in line.glyphs:
            try:
                out.append(normalize_height(g, fallback_to_width=True))
            except InklineError:
                continue
    return out


def _dtw_score(gen_glyphs, real_glyphs):
    """Mean over generated glyphs of the nearest category-matched real DTW."""
    by_cat: dict[int, list[Glyph]] = {}
    for g in real_glyphs:
        by_cat.setdefault(g.category, []).append(g)
    scores = []
    for g in gen_glyphs:
        matches = by_cat.get(g.category, [])
        if not matches:
            continue
        best = np.inf
        for r in matches:
            best = min(best, dtw_normalized(g, r))
            if best == 0.0:
                break
        scores.append(best)
    return float(np.mean(scores)) if scores else None


def _read_transcripts(path, gen_records):
    pairs = []
    with open(path) as f:
        rows = [json.loads(line) for line in f if line.strip()]
    for i, row in enumerate(rows):
        hyp = row["hyp"]
        if "ref" in row:
            ref = row["ref"]
        elif i < len(gen_records):
            ref = [g["cat"] for g in gen_records[i]["glyphs"]]
        else:
            raise EmptyDataset(f"transcript line {i + 1} has no reference")
        pairs.append((ref, hyp))
    return pairs


def cmd_evaluate(args):
    cfg = _load_config(args.config)
    gen_records = read_records(args.gen)
    real_records = read_records(args.real)
    if not gen_records or not real_records:
        raise EmptyDataset("evaluate needs non-empty --gen and --real sets")

    nabla = feature_gap(_record_layouts(gen_records), _record_layouts(real_records))
    dtw = _dtw_score(_normalized_glyphs(gen_records), _normalized_glyphs(real_records))

    ar = cr = None
    if args.hyp:
        total = RecognitionCounts(0, 0, 0, 0)
        for ref, hyp in _read_transcripts(args.hyp, gen_records):
            total = total + align_and_count(ref, hyp)
        ar, cr = ar_cr(total)

    style_score = content_score = None
    if args.classify:
        rng = make_rng(cfg.seeds.evaluate, 0xC1)
        content_clf = classifiers.train_classifier(
            "content", classifiers.build_content_examples(real_records), rng
        )
        content_score = classifiers.accuracy(
            content_clf, classifiers.build_content_examples(gen_records)
        )
        real_styles = classifiers.build_style_examples(real_records, rng)
        if len({w for _, w in real_styles}) >= 2:
            style_clf = classifiers.train_classifier("style", real_styles, rng)
            style_score = classifiers.accuracy(
                style_clf, classifiers.build_style_examples(gen_records, rng)
            )

    report = {
        "dtw": dtw,
        "nabla": [float(x) for x in nabla],
        "ar": ar,
        "cr": cr,
        "style_score": style_score,
        "content_score": content_score,
    }
    with open(args.out, "w") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    print(json.dumps(report))


def cmd_render(args):
    records = read_records(args.infile)
    if not records:
        raise EmptyDataset(f"{args.infile} has no records")
    line, layout = line_from_record(records[args.index])
    if record_is_decoupled(line, layout):
        line = compose_line(line.glyphs, layout, writer=line.writer)
    svg = render_svg(line, color_per_stroke=args.color_per_stroke)
    with open(args.out, "w") as f:
        f.write(svg + "\n")
    print(f"rendered record {args.index} -> {args.out}")


def cmd_export_style_features(args):
    cfg = _load_config(args.config)
    synth = load_font_model(args.ckpt, cfg)
    records = read_records(args.data)
    rows = []
    with nn.no_grad():
        for rec in records:
            line, _ = line_from_record(rec)
            for g in line.glyphs:
                pts = synth.standardizer.apply(pad_or_truncate(g, synth.n_pad).points)
                feats = synth.encoder.encode(nn.Tensor(pts.astype(np.float32)))
                pooled = feats.f3.numpy().mean(axis=0)
                rows.append(
                    {"writer": line.writer, "cat": g.category, "feature": [float(x) for x in pooled]}
                )
    with open(args.out, "w") as f:
        for row in rows:
            f.write(json.dumps(row, separators=(",", ":")) + "\n")
    print(f"exported {len(rows)} feature vectors -> {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inkline", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-corpus", help="write a synthetic parametric-writer corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--writers", type=int, default=8)
    s.add_argument("--lines", type=int, default=200)
    s.add_argument("--categories", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--line-min", type=int, default=12)
    s.add_argument("--line-max", type=int, default=16)
    s.set_defaults(fn=cmd_synth_corpus)

    s = sub.add_parser("preprocess", help="RDP simplify, extract layouts, normalize glyph heights")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--rdp-eps", type=float, default=2.0)
    s.set_defaults(fn=cmd_preprocess)

    s = sub.add_parser("train-layout", help="train the autoregressive layout generator")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--loss-csv")
    s.set_defaults(fn=cmd_train_layout)

    s = sub.add_parser("train-font", help="train the diffusion glyph synthesizer")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--loss-csv")
    s.set_defaults(fn=cmd_train_font)

    s = sub.add_parser("generate", help="generate a text line from category ids")
    s.add_argument("--text", required=True, help="comma-separated category ids")
    s.add_argument("--ref", help="JSONL file whose first record is the style reference")
    s.add_argument("--layout-ckpt", required=True)
    s.add_argument("--font-ckpt", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--prefix-len", type=int, default=10)
    s.add_argument("--config")
    s.set_defaults(fn=cmd_generate)

    s = sub.add_parser("evaluate", help="layout gaps, DTW, AR/CR, optional classifier scores")
    s.add_argument("--gen", required=True)
    s.add_argument("--real", required=True)
    s.add_argument("--hyp", help="JSONL recognizer transcripts for AR/CR")
    s.add_argument("--out", required=True)
    s.add_argument("--classify", action="store_true")
    s.add_argument("--config")
    s.set_defaults(fn=cmd_evaluate)

    s = sub.add_parser("render", help="render a record to SVG")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--color-per-stroke", action="store_true")
    s.add_argument("--index", type=int, default=0)
    s.set_defaults(fn=cmd_render)

    s = sub.add_parser("export-style-features", help="dump pooled deepest-scale style features")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.set_defaults(fn=cmd_export_style_features)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except InklineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
