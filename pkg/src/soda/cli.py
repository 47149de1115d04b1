"""Command-line interface.

    soda synth     generate synthetic detection sequences plus truth.json
    soda validate  check detection files against the format rules
    soda infer     sample placements, learn one codebook, write symbols
    soda surface   local DI surface, null calibration, peaks and figure
    soda classify  pairwise DI matrix, split, nearest-neighbor evaluation

Every producing command writes a manifest.json with the resolved
configuration, the seed and content digests of inputs and artifacts.
Reruns with the same inputs and seed reproduce artifacts byte for byte.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import report as rpt
from .classify import evaluate, nn_classify, pairwise_matrix, split
from .config import Config, build_config, load_config
from .errors import ConfigError, IncompatibleAlphabets, InvalidSpec, IoFailure, SodaError
from .ingest import load_detections, load_symbols, save_detections, save_symbols, validate
from .localize import SurfaceSpec, analyze_pair
from .mrf import PictorialModel, fit_gammas, gibbs_sample_frames
from .quantize import encode_sequence, fit_codebook, sequence_features
from .rng import STREAM_CODEBOOK, STREAM_GIBBS, STREAM_SPLIT, derive_seed
from .synth import ClassTemplate, CouplingSpec, gen_corpus, gen_coupled_pair

_CONFIG_FLAG_TYPES = {
    "arity": int,
    "persons": int,
    "gamma1": float,
    "gamma2": float,
    "gibbs_burnin": int,
    "gibbs_samples": int,
    "p": int,
    "order_k": int,
    "window": int,
    "stride": int,
    "fdr": float,
    "fdr_method": str,
    "null_reps": int,
    "null_mode": str,
    "k_neighbors": int,
    "split_ratio": float,
    "seed": int,
    "top_n": int,
    "codebook_subsample": int,
    "threads": int,
}


def _lambda_mode_arg(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    for name, typ in _CONFIG_FLAG_TYPES.items():
        common.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None)
    common.add_argument("--lambda-mode", dest="lambda_mode", type=_lambda_mode_arg, default=None)
    common.add_argument("--interaction", dest="interaction", default=None,
                        action=argparse.BooleanOptionalAction)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="soda", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    common = _common_parser()
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", parents=[common], help="generate synthetic detections")
    p_synth.add_argument("--spec", metavar="PATH",
                         help="JSON generator spec; flags below fill anything it omits")
    p_synth.add_argument("--mode", choices=("corpus", "pair"), default="corpus")
    p_synth.add_argument("--classes", type=int, default=4)
    p_synth.add_argument("--members", type=int, default=10, help="sequences per class")
    p_synth.add_argument("--frames", type=int, default=50)
    p_synth.add_argument("--coupling", type=float, default=0.9)
    p_synth.add_argument("--lag", type=int, default=1)
    p_synth.add_argument("--active", type=int, nargs=2, metavar=("START", "STOP"))
    p_synth.add_argument("--candidates", type=int, default=3)
    p_synth.add_argument("--noise", type=float, default=0.5,
                         help="position jitter std of copied frames, grid units")
    p_synth.add_argument("--grid", type=int, nargs=2, default=(16, 16), metavar=("W", "H"))

    p_val = sub.add_parser("validate", parents=[common], help="check detection files")
    p_val.add_argument("inputs", nargs="+")

    p_infer = sub.add_parser("infer", parents=[common], help="detections -> symbol sequences")
    p_infer.add_argument("inputs", nargs="+")
    p_infer.add_argument("--fit-gammas", action="store_true",
                         help="fit spring weights even when gamma flags are given")

    p_surf = sub.add_parser("surface", parents=[common], help="local DI surface for one pair")
    p_surf.add_argument("x_symbols")
    p_surf.add_argument("y_symbols")
    p_surf.add_argument("--null", choices=("global", "percell"), default=None,
                        help="null calibration: pooled moments or per-cell moments")

    p_cls = sub.add_parser("classify", parents=[common], help="DI matrix and NN evaluation")
    p_cls.add_argument("inputs", nargs="+")
    p_cls.add_argument("--repeats", type=int, default=1,
                       help="evaluate over this many derived-seed splits")
    return parser


def _resolve_config(args) -> tuple[Config, set]:
    """Merged config plus the set of keys the user set explicitly."""
    file_values = load_config(args.config) if args.config else None
    overrides = {name: getattr(args, name) for name in _CONFIG_FLAG_TYPES}
    overrides["lambda_mode"] = args.lambda_mode
    overrides["interaction"] = args.interaction
    provided = set(file_values or ()) | {k for k, v in overrides.items() if v is not None}
    return build_config(file_values, overrides), provided


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _safe_name(sequence_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", sequence_id)


def _default_templates(num_classes: int, args) -> list[ClassTemplate]:
    """Distinct per-class lag and step-size templates around the flag values."""
    active = tuple(args.active) if args.active else None
    return [
        ClassTemplate(
            label=f"c{i}",
            lag=(i % 3) + 1,
            coupling_strength=args.coupling,
            active=active,
            step_max=1 + i // 3,
        )
        for i in range(num_classes)
    ]


def _template_from_dict(raw: dict, index: int) -> ClassTemplate:
    known = {"label", "lag", "coupling", "coupling_strength", "active", "step_max"}
    unknown = set(raw) - known
    if unknown:
        raise InvalidSpec(f"class {index}: unknown key(s) {sorted(unknown)}")
    coupling = raw.get("coupling_strength", raw.get("coupling", 0.9))
    active = raw.get("active")
    try:
        return ClassTemplate(
            label=str(raw.get("label", f"c{index}")),
            lag=int(raw.get("lag", 1)),
            coupling_strength=float(coupling),
            active=tuple(int(v) for v in active) if active is not None else None,
            step_max=int(raw.get("step_max", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise InvalidSpec(f"class {index}: bad value ({exc})")


def _synth_plan(args, cfg: Config) -> tuple[CouplingSpec, int, str]:
    """Generator spec, members per class and mode from flags plus --spec file."""
    raw = {}
    if args.spec:
        try:
            raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"{args.spec}: invalid JSON ({exc.msg})")
        if not isinstance(raw, dict):
            raise InvalidSpec(f"{args.spec}: generator spec must be a JSON object")
        known = {"frames", "grid", "arity", "persons", "candidates", "noise",
                 "classes", "per_class", "mode"}
        unknown = set(raw) - known
        if unknown:
            raise InvalidSpec(f"{args.spec}: unknown key(s) {sorted(unknown)}")
    mode = raw.get("mode", args.mode)
    if mode not in ("corpus", "pair"):
        raise InvalidSpec(f"mode must be 'corpus' or 'pair', got {mode!r}")
    if "classes" in raw:
        if not isinstance(raw["classes"], list) or not raw["classes"]:
            raise InvalidSpec("'classes' must be a non-empty list")
        templates = [_template_from_dict(t, i) for i, t in enumerate(raw["classes"])]
    elif mode == "pair":
        templates = [ClassTemplate(
            label="pair",
            lag=args.lag,
            coupling_strength=args.coupling,
            active=tuple(args.active) if args.active else None,
        )]
    else:
        templates = _default_templates(args.classes, args)
    try:
        spec = CouplingSpec(
            num_frames=int(raw.get("frames", args.frames)),
            classes=tuple(templates),
            grid=tuple(int(v) for v in raw.get("grid", args.grid)),
            arity=int(raw.get("arity", cfg.arity)),
            persons=int(raw.get("persons", cfg.persons)),
            n_candidates=int(raw.get("candidates", args.candidates)),
            noise=float(raw.get("noise", args.noise)),
        )
    except (TypeError, ValueError) as exc:
        raise InvalidSpec(f"bad generator spec value: {exc}")
    return spec, int(raw.get("per_class", args.members)), mode


def cmd_synth(args, cfg: Config) -> int:
    out = _out_dir(args)
    spec, per_class, mode = _synth_plan(args, cfg)
    artifacts = []
    if mode == "pair":
        x, y, truth = gen_coupled_pair(spec, cfg.seed)
        for seq in (x, y):
            path = out / f"{_safe_name(seq.sequence_id)}.jsonl"
            save_detections(seq, path)
            artifacts.append(path)
        truth_payload = {
            "mode": "pair",
            "pairs": [{"x_id": x.sequence_id, "y_id": y.sequence_id, **truth}],
        }
    else:
        corpus = gen_corpus(spec, per_class, cfg.seed)
        for seq in corpus:
            path = out / f"{_safe_name(seq.sequence_id)}.jsonl"
            save_detections(seq, path)
            artifacts.append(path)
        truth_payload = {
            "mode": "corpus",
            "per_class": per_class,
            "classes": [
                {
                    "label": t.label,
                    "lag": t.lag,
                    "coupling_strength": t.coupling_strength,
                    "active": list(t.active) if t.active else [0, spec.num_frames],
                    "step_max": t.step_max,
                }
                for t in spec.classes
            ],
            "sequences": corpus.ground_truth,
        }
    truth_path = out / "truth.json"
    truth_path.write_text(json.dumps(truth_payload, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")
    artifacts.append(truth_path)
    rpt.write_manifest(out, "synth", cfg.as_dict(), cfg.seed, [], artifacts)
    for path in artifacts:
        print(f"wrote {path}")
    return 0


def cmd_validate(args, cfg: Config) -> int:
    bad = 0
    for name in args.inputs:
        try:
            seq = load_detections(name)
        except SodaError as exc:
            print(f"{name}: {type(exc).__name__}: {exc}")
            bad += 1
            continue
        result = validate(seq, seq.arity)
        for v in result:
            where = "header" if v.frame_index is None else f"frame {v.frame_index}"
            print(f"{name}: {where}: {v.code}: {v.detail}")
        if not result.ok:
            bad += 1
        else:
            print(f"{name}: ok ({seq.num_frames} frames)")
    return 1 if bad else 0


def _load_corpus(paths) -> list:
    seqs = [load_detections(p) for p in paths]
    arities = {s.arity for s in seqs}
    if len(arities) != 1:
        raise ConfigError(f"input files disagree on model arity: {sorted(arities)}")
    persons = {len(f.persons) for s in seqs for f in s.frames}
    if len(persons) != 1:
        raise ConfigError(f"input files disagree on person count: {sorted(persons)}")
    grids = {s.grid for s in seqs}
    if len(grids) != 1:
        raise ConfigError(f"input files disagree on grid: {sorted(grids)}")
    return seqs


def cmd_infer(args, cfg: Config, provided: set = frozenset()) -> int:
    out = _out_dir(args)
    seqs = _load_corpus(args.inputs)
    arity = seqs[0].arity
    persons = len(seqs[0].frames[0].persons)
    model = PictorialModel(arity=arity, persons=persons, gamma1=cfg.gamma1,
                           gamma2=cfg.gamma2, interaction_enabled=cfg.interaction)
    # spring weights come from the data unless the user pinned them
    fit_wanted = args.fit_gammas or not ({"gamma1", "gamma2"} & provided)
    if fit_wanted:
        fit = fit_gammas(model, seqs, seed=derive_seed(cfg.seed, STREAM_GIBBS, 1))
        model = PictorialModel(arity=arity, persons=persons, gamma1=fit.gamma1,
                               gamma2=max(fit.gamma2, 0.0),
                               interaction_enabled=cfg.interaction)
        print(f"fitted gamma1={fit.gamma1:.6g} gamma2={fit.gamma2:.6g}")

    # every frame of every sequence gets its own chain; realization j of
    # frame m pairs with realization j of frame m-1 as independent draws
    sampled = [
        gibbs_sample_frames(model, seq.frames, cfg.gibbs_burnin, cfg.gibbs_samples,
                            seed=derive_seed(cfg.seed, STREAM_GIBBS, 2, i))
        for i, seq in enumerate(seqs)
    ]
    features = np.concatenate(
        [sequence_features(model, seq, sets) for seq, sets in zip(seqs, sampled)], axis=0
    )
    codebook = fit_codebook(features, cfg.p, derive_seed(cfg.seed, STREAM_CODEBOOK),
                            subsample=cfg.codebook_subsample)
    artifacts = []
    names = set()
    for seq, sets in zip(seqs, sampled):
        name = _safe_name(seq.sequence_id)
        if name in names:
            raise ConfigError(f"duplicate sequence id after sanitizing: {name!r}")
        names.add(name)
        symbols = encode_sequence(codebook, model, seq, sets)
        path = out / f"{name}.sym"
        save_symbols(symbols, path)
        artifacts.append(path)
    cb_path = out / "codebook.json"
    cb_path.write_text(
        json.dumps(
            {
                "p": codebook.p,
                "feature_dim": codebook.feature_dim,
                "centroids": codebook.centroids.tolist(),
            },
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    artifacts.append(cb_path)
    rpt.write_manifest(out, "infer", cfg.as_dict(), cfg.seed, list(args.inputs), artifacts)
    for path in artifacts:
        print(f"wrote {path}")
    return 0


def cmd_surface(args, cfg: Config) -> int:
    out = _out_dir(args)
    x = load_symbols(args.x_symbols)
    y = load_symbols(args.y_symbols)
    if x.p != y.p:
        raise IncompatibleAlphabets(f"x has p={x.p}, y has p={y.p}; encode with one codebook")
    if x.n != y.n:
        raise IncompatibleAlphabets(f"x has n={x.n} samples per frame, y has n={y.n}")
    null_mode = args.null if args.null is not None else cfg.null_mode
    spec = SurfaceSpec(window=cfg.window, stride=cfg.stride, order_k=cfg.order_k,
                       null_reps=cfg.null_reps)
    result = analyze_pair(
        x, y, spec, q=cfg.fdr, method=cfg.fdr_method, top_n=cfg.top_n,
        seed=cfg.seed, lambda_mode=cfg.lambda_mode, per_cell=null_mode == "percell",
    )
    surface_path = out / "surface.csv"
    peaks_path = out / "peaks.json"
    figure_path = out / "bubble.svg"
    rpt.write_surface_csv(result.surface, surface_path)
    rpt.write_peaks_json(result.peaks, peaks_path)
    rpt.bubble_svg(result.surface, figure_path, peaks=result.peaks, q=cfg.fdr, seed=cfg.seed)
    rpt.write_manifest(out, "surface", cfg.as_dict(), cfg.seed,
                       [args.x_symbols, args.y_symbols],
                       [surface_path, peaks_path, figure_path])
    for path in (surface_path, peaks_path, figure_path):
        print(f"wrote {path}")
    sig = sum(p.significant for p in result.peaks)
    print(f"{len(result.peaks)} peak(s), {sig} significant at q={cfg.fdr} ({cfg.fdr_method})")
    return 0


def cmd_classify(args, cfg: Config) -> int:
    out = _out_dir(args)
    if args.repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {args.repeats}")
    seqs = [load_symbols(p) for p in args.inputs]
    matrix = pairwise_matrix(seqs, k=cfg.order_k, lambda_mode=cfg.lambda_mode,
                             threads=cfg.threads)
    accuracies = []
    first_predictions = None
    first_result = None
    for r in range(args.repeats):
        seed_r = cfg.seed if r == 0 else derive_seed(cfg.seed, STREAM_SPLIT, r)
        parts = split(matrix.labels, ratio=cfg.split_ratio, seed=seed_r)
        predictions = nn_classify(matrix, parts.train, parts.test,
                                  k_neighbors=cfg.k_neighbors)
        result = evaluate(predictions)
        accuracies.append(result.accuracy)
        if r == 0:
            first_predictions, first_result = predictions, result
    matrix_path = out / "matrix.csv"
    pred_path = out / "predictions.csv"
    report_path = out / "report.json"
    figure_path = out / "confusion.svg"
    rpt.write_matrix_csv(matrix, matrix_path)
    rpt.write_predictions_csv(first_predictions, pred_path)
    extra = None
    if args.repeats > 1:
        extra = {
            "repeat_accuracies": accuracies,
            "mean_accuracy": float(np.mean(accuracies)),
        }
    rpt.write_report_json(first_result, report_path, extra=extra)
    rpt.confusion_svg(first_result, figure_path)
    rpt.write_manifest(out, "classify", cfg.as_dict(), cfg.seed, list(args.inputs),
                       [matrix_path, pred_path, report_path, figure_path])
    for path in (matrix_path, pred_path, report_path, figure_path):
        print(f"wrote {path}")
    if args.repeats > 1:
        print(f"mean accuracy {float(np.mean(accuracies)):.4f} over {args.repeats} splits")
    else:
        print(f"accuracy {first_result.accuracy:.4f} on {len(first_predictions)} held-out sequence(s)")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, provided = _resolve_config(args)
        if args.command == "synth":
            return cmd_synth(args, cfg)
        if args.command == "validate":
            return cmd_validate(args, cfg)
        if args.command == "infer":
            return cmd_infer(args, cfg, provided)
        if args.command == "surface":
            return cmd_surface(args, cfg)
        return cmd_classify(args, cfg)
    except SodaError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": IoFailure.__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
