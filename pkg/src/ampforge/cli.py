"""Command-line pipeline: encode, bench, train, attack.

Every command takes a ``--seed`` (falling back to the ``AMP_FORGE_SEED``
environment variable) and, run single-job with a fixed seed, produces
byte-identical result files. Each run writes a ``manifest.json`` describing
the command, configuration, input content hash and output hashes; manifest
timestamps are the one intentionally non-reproducible field.

Exit codes: 0 success, 2 bad input (parse/geometry), 3 convergence failure
without ``--allow-partial``.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import os
import pathlib
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import adversary, circuit, data, qvc, simulator
from .disentangle import DisentangleConfig, disentangle, preparation_program
from .errors import AmpForgeError, DidNotConverge, IoError, ParseError
from .mps import Mps, random_mps

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NO_CONVERGE = 3


# ----------------------------------------------------------------------
# manifest plumbing


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(outdir, command, config, seed, input_paths, output_paths,
                    started, schema_version="1"):
    # The hash covers everything that determines the results; where they are
    # written and how many workers computed them do not.
    hashed_config = {k: v for k, v in config.items() if k not in ("out", "jobs")}
    h = hashlib.sha256()
    h.update(json.dumps(hashed_config, sort_keys=True).encode())
    for p in input_paths:
        if pathlib.Path(p).exists():
            h.update(_sha256_file(p).encode())
    manifest = {
        "schema_version": schema_version,
        "command": command,
        "config": config,
        "seed": seed,
        "timestamps": {
            "started": started,
            "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        },
        "content_hash": h.hexdigest(),
        "outputs": {str(p): _sha256_file(p) for p in output_paths},
    }
    path = pathlib.Path(outdir) / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


# ----------------------------------------------------------------------
# corpus loading


def _load_corpus(spec: str, width: int, height: int, seed: int, classes=None):
    """Images from a CSV path or a generator spec like ``shapes:25``.

    ``classes`` restricts to the listed labels and renumbers them 0..m-1 in
    the given order.
    """
    if spec.startswith("shapes:"):
        n = int(spec.split(":", 1)[1])
        samples = data.generate_shapes(n, seed=seed)
    else:
        samples = data.load_csv(spec, width, height)
    if classes is not None:
        relabel = {c: i for i, c in enumerate(classes)}
        samples = [data.ImageSample(s.pixels, s.width, s.height, relabel[s.label])
                   for s in samples if s.label in relabel]
        if not samples:
            raise ParseError(f"no samples with labels {classes} in {spec}")
    # Classifier training and the PGD pixel box assume intensities in [0, 1];
    # integer-valued corpora (0..255) are rescaled by their global peak.
    peak = max((s.pixels.max() for s in samples), default=0.0)
    if peak > 1.0:
        samples = [data.ImageSample(s.pixels / peak, s.width, s.height, s.label)
                   for s in samples]
    return samples


def _load_states(spec: str, args):
    """Statevectors for encode/bench: images, raw state files, or random draws.

    Returns ``(states, labels, input_paths)``. ``random:COUNT:QUBITS`` draws
    dense Gaussian states; ``random-mps:COUNT:QUBITS:CHI`` draws states with
    bounded bond dimension.
    """
    if spec.startswith("random:"):
        _, count, qubits = spec.split(":")
        rng = np.random.default_rng(args.seed)
        states = []
        for _ in range(int(count)):
            v = rng.standard_normal(2**int(qubits)) + 1j * rng.standard_normal(2**int(qubits))
            states.append(v / np.linalg.norm(v))
        return states, [-1] * len(states), []
    if spec.startswith("random-mps:"):
        _, count, qubits, chi = spec.split(":")
        rng = np.random.default_rng(args.seed)
        states = [random_mps(int(qubits), int(chi), rng).to_statevector()
                  for _ in range(int(count))]
        return states, [-1] * len(states), []
    if getattr(args, "format", "images") == "state":
        vec = _read_state_file(spec)
        return [vec], [-1], [spec]
    imgs = _load_corpus(spec, args.width, args.height, args.seed)
    encoder = data.encode_plain if args.encoding == "plain" else data.encode_compressed
    encoded = [encoder(img) for img in imgs]
    paths = [] if spec.startswith("shapes:") else [spec]
    return [e.state for e in encoded], [e.label for e in encoded], paths


def _read_state_file(path) -> np.ndarray:
    """One amplitude per line: ``re`` or ``re im`` (comma or whitespace)."""
    values = []
    try:
        fh = open(path)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        for row_no, line in enumerate(fh, start=1):
            line = line.strip().replace(",", " ")
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                re = float(parts[0])
                im = float(parts[1]) if len(parts) > 1 else 0.0
            except (ValueError, IndexError):
                raise ParseError(f"bad amplitude {line!r}", row=row_no) from None
            values.append(re + 1j * im)
    if not values:
        raise ParseError(f"no amplitudes in {path}")
    return np.array(values)


def _encoding_states(imgs, encoding: str, seed: int, cfg_kwargs=None):
    """Apply a named encoding (exact | mps:F | perturb:F) to every image."""
    out = []
    for i, img in enumerate(imgs):
        exact = data.encode_compressed(img).state
        if encoding == "exact":
            state = exact
        elif encoding.startswith("mps:"):
            target = float(encoding.split(":", 1)[1])
            cfg = DisentangleConfig(target_fidelity=target,
                                                **(cfg_kwargs or {}))
            try:
                rep = disentangle(exact, cfg)
            except DidNotConverge as exc:
                rep = exc.report
            state = simulator.run(preparation_program(rep)).amplitudes
        elif encoding.startswith("perturb:"):
            target = float(encoding.split(":", 1)[1])
            state = data.random_perturb(exact, target, seed=seed * 100003 + i)
        else:
            raise ParseError(f"unknown encoding {encoding!r}")
        out.append((state, img.label))
    return out


# ----------------------------------------------------------------------
# encode


def _encode_one(task):
    (index, state, label, cfg_dict, want_baseline, want_qasm, want_dump,
     preview_geometry) = task
    cfg = DisentangleConfig(**cfg_dict)
    record = {"index": index, "label": label}
    m = Mps.from_statevector(state, max_bond=cfg.max_bond, tol=cfg.tol)
    record["n_qubits"] = m.n_qubits
    if want_dump:
        record["mps"] = m.debug_dump()
    try:
        report = disentangle(m, cfg)
    except DidNotConverge as exc:
        report = exc.report
    record["target_fidelity"] = cfg.target_fidelity
    record["achieved_fidelity"] = report.achieved_fidelity
    record["sweeps"] = report.n_sweeps
    record["converged"] = report.converged
    record["fidelity_trace"] = [float(f) for f in report.fidelity_trace]
    qasm_text = None
    preview = None
    if cfg.k == 2:
        program = preparation_program(report)
        expanded = circuit.decompose_circuit(program)
        record["cnot_count"] = sum(1 for g in expanded.gates if g.kind == "cnot")
        if want_qasm:
            qasm_text = circuit.export_qasm(expanded)
        if preview_geometry is not None:
            # Render the state the circuit actually prepares, phase-aligned to
            # the target so real/imaginary parts land back on pixel pairs.
            approx = simulator.run(program).amplitudes
            phase = np.vdot(state, approx)
            if abs(phase) > 1e-12:
                approx = approx * np.conj(phase) / abs(phase)
            width, height = preview_geometry
            preview = data.decode_compressed(approx, width, height)
    if want_baseline and record["n_qubits"] <= circuit.EXACT_PREP_CAP_QUBITS:
        record["baseline_cnot_count"] = circuit.cnot_count(
            circuit.exact_prep_baseline(state))
    return index, record, qasm_text, preview


def cmd_encode(args) -> int:
    outdir = pathlib.Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    started = _now()
    states, labels, input_paths = _load_states(args.input, args)
    if not states:
        raise ParseError(f"no samples in {args.input}")
    cfg_dict = {
        "k": args.k, "target_fidelity": args.fidelity,
        "max_sweeps": args.max_sweeps, "layout": args.layout,
        "max_bond": args.max_bond,
    }
    preview = ((args.width, args.height)
               if args.pgm_out and args.format == "images"
               and args.encoding == "compressed" else None)
    tasks = [(i, states[i], labels[i], cfg_dict, args.baseline,
              args.qasm_out, args.dump_mps, preview) for i in range(len(states))]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = sorted(pool.map(_encode_one, tasks), key=lambda r: r[0])
    else:
        results = [_encode_one(t) for t in tasks]

    report_path = outdir / "encode_report.jsonl"
    outputs = [report_path]
    qasm_dir = outdir / "qasm"
    pgm_dir = outdir / "pgm"
    with open(report_path, "w") as fh:
        for index, record, qasm_text, decoded in results:
            if qasm_text is not None:
                qasm_dir.mkdir(exist_ok=True)
                qpath = qasm_dir / f"sample_{index:04d}.qasm"
                qpath.write_text(qasm_text)
                record["qasm_file"] = str(qpath.relative_to(outdir))
                outputs.append(qpath)
            if decoded is not None:
                pgm_dir.mkdir(exist_ok=True)
                ppath = pgm_dir / f"sample_{index:04d}.pgm"
                data.export_pgm(decoded, ppath)
                record["pgm_file"] = str(ppath.relative_to(outdir))
                outputs.append(ppath)
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    _write_manifest(outdir, "encode", _config_of(args), args.seed, input_paths,
                    outputs, started)
    missed = sum(1 for r in results if not r[1]["converged"])
    if missed:
        if not args.allow_partial:
            print("error: some samples missed the fidelity target "
                  "(rerun with --allow-partial to keep them)", file=sys.stderr)
            return EXIT_NO_CONVERGE
        print(f"warning: kept {missed} sample(s) below the fidelity target",
              file=sys.stderr)
    return EXIT_OK


# ----------------------------------------------------------------------
# bench


def _bench_one(task):
    index, state, label, cfg_dict = task
    cfg = DisentangleConfig(**cfg_dict)
    try:
        report = disentangle(state, cfg)
    except DidNotConverge as exc:
        report = exc.report
    program = preparation_program(report)
    n = report.n_qubits
    row = {
        "sample": index, "label": label, "n_qubits": n,
        "sweeps": report.n_sweeps,
        "achieved_fidelity": report.achieved_fidelity,
        "mps_cnots": circuit.cnot_count(program),
        "baseline_cnots": (circuit.cnot_count(circuit.exact_prep_baseline(state))
                           if n <= circuit.EXACT_PREP_CAP_QUBITS
                           else circuit.exact_prep_cnot_formula(n)),
    }
    return index, row


def cmd_bench(args) -> int:
    outdir = pathlib.Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    started = _now()
    states, labels, input_paths = _load_states(args.corpus, args)
    cfg_dict = {"k": 2, "target_fidelity": args.fidelity,
                "max_sweeps": args.max_sweeps, "layout": args.layout,
                "max_bond": args.max_bond}
    tasks = [(i, states[i], labels[i], cfg_dict) for i in range(len(states))]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = [r for _, r in sorted(pool.map(_bench_one, tasks))]
    else:
        rows = [_bench_one(t)[1] for t in tasks]

    csv_path = outdir / "bench.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v)
                             for k, v in row.items()})

    mps_counts = np.array([r["mps_cnots"] for r in rows], dtype=float)
    base_counts = np.array([r["baseline_cnots"] for r in rows], dtype=float)
    summary = {
        "samples": len(rows),
        "target_fidelity": args.fidelity,
        "mps_cnots_median": float(np.median(mps_counts)),
        "mps_cnots_mean": float(np.mean(mps_counts)),
        "baseline_cnots_median": float(np.median(base_counts)),
        "median_ratio": float(np.median(mps_counts) / np.median(base_counts)),
        "sweeps_max": int(max(r["sweeps"] for r in rows)),
    }
    summary_path = outdir / "bench_summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    _write_manifest(outdir, "bench", _config_of(args), args.seed, input_paths,
                    [csv_path, summary_path], started)
    return EXIT_OK


# ----------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    outdir = pathlib.Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    started = _now()
    input_paths = [p for p in (args.dataset, args.test)
                   if p and not p.startswith("shapes:")]
    classes = ([int(c) for c in args.classes.split(",")] if args.classes
               else None)
    train_imgs = _load_corpus(args.dataset, args.width, args.height, args.seed,
                              classes)
    test_imgs = (_load_corpus(args.test, args.width, args.height, args.seed + 1,
                              classes)
                 if args.test else [])

    history_path = outdir / "history.csv"
    if args.model == "mlp":
        mlp, losses = adversary.train_mlp(train_imgs, epochs=args.epochs,
                                          lr=args.learning_rate, seed=args.seed,
                                          hidden=args.hidden)
        ckpt = outdir / "mlp_checkpoint.json"
        adversary.save_mlp(mlp, ckpt)
        with open(history_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss"])
            for e, l in enumerate(losses):
                writer.writerow([e, f"{l:.17g}"])
        summary = {"train_accuracy": adversary.mlp_accuracy(mlp, train_imgs)}
        if test_imgs:
            summary["test_accuracy"] = adversary.mlp_accuracy(mlp, test_imgs)
    else:
        train_set = _encoding_states(train_imgs, args.encoding, args.seed)
        test_set = _encoding_states(test_imgs, args.encoding, args.seed + 1)
        n_qubits = simulator.SimState.from_vector(train_set[0][0]).n_qubits
        n_classes = max(lbl for _, lbl in train_set) + 1
        model = qvc.new_model(qvc.Ansatz(n_qubits, args.layers), n_classes,
                              seed=args.seed)
        cfg = qvc.TrainConfig(learning_rate=args.learning_rate,
                              batch_size=args.batch_size, epochs=args.epochs,
                              seed=args.seed)
        model, history = qvc.train(model, train_set, cfg)
        ckpt = outdir / "qvc_checkpoint.json"
        qvc.save_checkpoint(model, ckpt, extra={"encoding": args.encoding,
                                                "seed": args.seed})
        with open(history_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "accuracy"])
            for e, l, a in history:
                writer.writerow([e, f"{l:.17g}", f"{a:.17g}"])
        summary = {"train_accuracy": history[-1][2], "encoding": args.encoding}
        if test_set:
            summary["test_accuracy"] = qvc.accuracy(model, test_set)

    summary_path = outdir / "train_summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    _write_manifest(outdir, "train", _config_of(args), args.seed, input_paths,
                    [ckpt, history_path, summary_path], started)
    return EXIT_OK


# ----------------------------------------------------------------------
# attack


def cmd_attack(args) -> int:
    outdir = pathlib.Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    started = _now()
    input_paths = [args.surrogate] + [spec.split("=", 1)[1] for spec in args.qvc]
    if not args.dataset.startswith("shapes:"):
        input_paths.append(args.dataset)
    classes = ([int(c) for c in args.classes.split(",")] if args.classes
               else None)
    imgs = _load_corpus(args.dataset, args.width, args.height, args.seed, classes)
    mlp = adversary.load_mlp(args.surrogate)

    classifiers = {"mlp": lambda samples: adversary.mlp_predict(mlp, samples)}
    for spec in args.qvc:
        name, path = spec.split("=", 1)
        model = qvc.load_checkpoint(path)
        with open(path) as fh:
            encoding = json.load(fh).get("encoding", "exact")

        def qvc_predict(samples, model=model, encoding=encoding):
            pairs = _encoding_states(samples, encoding, args.seed)
            states = np.stack([s for s, _ in pairs], axis=1)
            return np.argmax(qvc.batch_expectations(model, states), axis=1)

        classifiers[name] = qvc_predict

    strengths = [float(s) for s in args.strengths.split(",")]
    attacked_sets = {}
    outputs = []
    for strength in strengths:
        cfg = adversary.AttackConfig(epsilon=args.epsilon, step_size=strength,
                                     n_steps=args.steps, seed=args.seed)
        attacked = (imgs if strength == 0.0
                    else adversary.attack_dataset(mlp, imgs, cfg))
        attacked_sets[strength] = attacked
        if args.save_attacked:
            path = outdir / f"attacked_{strength:g}.csv"
            data.save_csv(path, attacked)
            outputs.append(path)

    rows = adversary.transfer_evaluate(classifiers, attacked_sets)
    csv_path = outdir / "attack_results.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["model", "strength", "accuracy"])
        writer.writeheader()
        for row in rows:
            writer.writerow({"model": row["model"],
                             "strength": f"{row['strength']:.17g}",
                             "accuracy": f"{row['accuracy']:.17g}"})
    json_path = outdir / "attack_results.json"
    with open(json_path, "w") as fh:
        json.dump(rows, fh, indent=1, sort_keys=True)
    _write_manifest(outdir, "attack", _config_of(args), args.seed, input_paths,
                    [csv_path, json_path] + outputs, started)
    return EXIT_OK


# ----------------------------------------------------------------------
# argument wiring


def _config_of(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _add_common(p):
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--seed", type=int,
                   default=int(os.environ.get("AMP_FORGE_SEED", "0")))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--height", type=int, default=8)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ampforge",
        description="MPS-assisted approximate amplitude encoding pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode states into preparation circuits")
    p.add_argument("input", help="image CSV, state file, or random:COUNT:QUBITS")
    p.add_argument("--format", choices=["images", "state"], default="images")
    p.add_argument("--encoding", choices=["compressed", "plain"],
                   default="compressed")
    p.add_argument("--fidelity", type=float, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--layout", choices=["staircase", "disjoint"],
                   default="staircase")
    p.add_argument("--max-sweeps", type=int, default=200)
    p.add_argument("--max-bond", type=int, default=None)
    p.add_argument("--qasm-out", action="store_true",
                   help="write one OpenQASM file per sample")
    p.add_argument("--pgm-out", action="store_true",
                   help="render the approximately prepared images as PGM files")
    p.add_argument("--dump-mps", action="store_true")
    p.add_argument("--baseline", action="store_true",
                   help="also count CNOTs of the exact preparation")
    p.add_argument("--allow-partial", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("bench", help="gate-count comparison over a corpus")
    p.add_argument("corpus", help="image CSV, shapes:N, or random:COUNT:QUBITS")
    p.add_argument("--format", choices=["images", "state"], default="images")
    p.add_argument("--encoding", choices=["compressed", "plain"],
                   default="compressed")
    p.add_argument("--fidelity", type=float, required=True)
    p.add_argument("--layout", choices=["staircase", "disjoint"],
                   default="staircase")
    p.add_argument("--max-sweeps", type=int, default=200)
    p.add_argument("--max-bond", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("train", help="train a QVC or the MLP surrogate")
    p.add_argument("dataset", help="image CSV or shapes:N")
    p.add_argument("--test", default=None, help="held-out image CSV or shapes:N")
    p.add_argument("--model", choices=["qvc", "mlp"], default="qvc")
    p.add_argument("--classes", default=None,
                   help="comma-separated labels to keep (renumbered in order)")
    p.add_argument("--encoding", default="exact",
                   help="exact | mps:F | perturb:F (QVC only)")
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--hidden", type=int, default=32, help="MLP hidden width")
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=16)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="PGD transfer attack grid")
    p.add_argument("--surrogate", required=True, help="MLP checkpoint")
    p.add_argument("--qvc", action="append", default=[],
                   metavar="NAME=CHECKPOINT",
                   help="QVC checkpoint to evaluate (repeatable)")
    p.add_argument("--dataset", required=True, help="image CSV or shapes:N")
    p.add_argument("--classes", default=None,
                   help="comma-separated labels to keep (renumbered in order)")
    p.add_argument("--strengths", default="0,0.02,0.05,0.1",
                   help="comma-separated PGD step sizes")
    p.add_argument("--epsilon", type=float, default=0.3)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--save-attacked", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_attack)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, IoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DidNotConverge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGE
    except AmpForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
