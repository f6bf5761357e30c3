"""Command-line entry point: ``vbmi <subcommand> ...``."""

import argparse
import json
import logging
import signal
import sys
import threading
import time
from pathlib import Path

import numpy as np

from .exceptions import VbmiError

logger = logging.getLogger("vbmi")


def _address(text):
    host, _, port = text.rpartition(":")
    if not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def _wait_forever(stop_event=None):
    stop_event = stop_event or threading.Event()
    signal.signal(signal.SIGTERM, lambda *a: stop_event.set())
    try:
        while not stop_event.wait(0.5):
            pass
    except KeyboardInterrupt:
        pass


def cmd_hw_budget(args):
    from .hwcalc import CMRR_DB, HwBudget, budget_from_config, budget_table, format_budget_table

    base = budget_from_config(Path(args.config)) if args.config else HwBudget()
    rows = budget_table(base)
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print(f"Z_in {base.z_in_ohm:g} ohm, Z_source {base.z_source_ohm:g} ohm, "
              f"V_ref {base.v_ref_volt:g} V, {base.adc_bits}-bit ADC, CMRR {CMRR_DB:g} dB")
        print(format_budget_table(rows))
    return 0


def _subject(path):
    from .synth import SubjectModel, subject_from_config

    return subject_from_config(Path(path)) if path else SubjectModel(snr_db=-10.0)


def cmd_device(args):
    from .codebook import base_code, target_codes
    from .protocol import serve_device
    from .synth import ContinuousSource, SessionSource

    subject = _subject(args.subject)
    gap = int(round(args.gap_s * 250))
    if args.trials:
        code = base_code()
        lags = target_codes(code, args.n_targets).target_lags
        rng = np.random.default_rng(subject.rng_seed)
        segments = [("gap", 250)]
        for _ in range(args.trials):
            segments += [("trial", int(rng.choice(lags))), ("gap", gap)]
        source = SessionSource(subject, segments, code)
    else:
        source = ContinuousSource(subject, lag=args.lag, gap_samples=gap)
    server = serve_device(source, pacing=args.pace, address=args.listen, samples_per_packet=args.samples_per_packet)
    host, port = server.address
    print(f"device listening on {host}:{port} (pace={args.pace}, {args.samples_per_packet} samples/packet)",
          flush=True)
    try:
        _wait_forever()
    finally:
        server.stop()
    return 0


def cmd_stream(args):
    from .io import write_matrix
    from .protocol import ClientSession, Gap

    blocks, n_gaps = [], 0
    deadline = time.monotonic() + args.seconds if args.seconds else None
    with ClientSession(args.connect) as client:
        print(f"connected: {client.info}", flush=True)
        print(f"impedance (kOhm): {client.impedance()}", flush=True)
        client.start()
        for rec in client.records(timeout=5.0):
            if isinstance(rec, Gap):
                n_gaps += 1
                blocks.append(np.full((rec.n_missing, 9), np.nan))
            else:
                blocks.append(rec.values_volt)
            if deadline is not None and time.monotonic() >= deadline:
                break
        try:
            client.stop()
        except (TimeoutError, RuntimeError, OSError):
            pass
        report = client.loss_report()
        report["bytes_received"] = client.bytes_received
    print(json.dumps(report, sort_keys=True))
    if args.out and blocks:
        data = np.concatenate(blocks, axis=0).T
        write_matrix(args.out, data, 250.0)
        print(f"wrote {data.shape[1]} samples x {data.shape[0]} channels to {args.out}")
    return 0


def cmd_analyze(args):
    from .io import read_matrix
    from .protocol import STREAM_CHANNELS
    from .signal import c_anti, design_filters, noise_metrics, welch_psd
    from scipy.signal import sosfilt

    data, fs = read_matrix(args.file)
    fs = args.fs or fs
    data = np.atleast_2d(data)
    if data.ndim != 2:
        raise VbmiError(f"analyze expects a (channels, samples) matrix, got shape {data.shape}")
    data = data[:, ~np.any(np.isnan(data), axis=0)]
    names = STREAM_CHANNELS if data.shape[0] == len(STREAM_CHANNELS) else [f"ch{i}" for i in range(data.shape[0])]
    psd = welch_psd(data, fs)
    filtered = sosfilt(design_filters(fs).sos, data, axis=-1)
    rows = []
    print(f"{'channel':>8} {'Vpp (uV)':>10} {'Vrms (uV)':>10} {'1-100Hz (uV^2)':>15} "
          f"{'PSD@50 (V^2/Hz)':>16} {'C_anti':>10}")
    for i, name in enumerate(names):
        m = noise_metrics(data[i])
        k50 = int(round(50.0 / psd.df))
        try:
            ca = c_anti(data[i], filtered[i], fs)
        except (ValueError, VbmiError):
            ca = float("nan")
        row = {"channel": name, "v_pp_uv": m["v_pp"] * 1e6, "v_rms_uv": m["v_rms"] * 1e6,
               "band_power_uv2": float(psd.band_power(1.0, 100.0)[i]) * 1e12,
               "psd_50hz": float(psd.power[i, k50]), "c_anti": ca}
        rows.append(row)
        print(f"{name:>8} {row['v_pp_uv']:>10.3f} {row['v_rms_uv']:>10.3f} {row['band_power_uv2']:>15.4g} "
              f"{row['psd_50hz']:>16.4e} {ca:>10.3e}")
    summary = {"file": str(args.file), "fs_hz": fs, "n_samples": int(data.shape[1]), "channels": rows,
               "psd": {"freqs_hz": psd.freqs_hz.tolist(), "df_hz": psd.df}}
    out = args.summary or str(Path(args.file).with_suffix(".summary.json"))
    Path(out).write_text(json.dumps(summary, indent=2, sort_keys=True, default=str))
    print(f"summary written to {out}")
    return 0


def cmd_synth(args):
    from .codebook import base_code, target_codes
    from .io import write_matrix
    from .synth import generate_trial

    subject = _subject(args.subject)
    code = base_code()
    lags = target_codes(code, args.n_targets).target_lags
    trials, labels = [], []
    for _ in range(args.reps):
        for k, lag in enumerate(lags):
            trials.append(generate_trial(subject, int(lag), code))
            labels.append(k)
    write_matrix(args.out_trials, np.stack(trials), 250.0)
    write_matrix(args.out_labels, np.asarray(labels, dtype=float), 250.0)
    print(f"wrote {len(trials)} trials ({args.n_targets} targets x {args.reps} reps) to {args.out_trials}")
    return 0


def cmd_train(args):
    from .backend import serialize_model
    from .codebook import base_code, target_codes
    from .decoder import TDCA, TRCA
    from .io import read_matrix

    X, fs = read_matrix(args.epochs)
    y = read_matrix(args.labels)[0].astype(np.int64).ravel()
    n_classes = np.unique(y).size
    lags = target_codes(base_code(), n_classes).target_lags
    if args.algo == "TRCA":
        model = TRCA(gamma=args.gamma, fs_hz=fs)
    else:
        model = TDCA(n_delays=args.n_delays, n_components=args.n_components, gamma=args.gamma, fs_hz=fs)
    model.fit(X, y, lags=lags)
    Path(args.out).write_bytes(serialize_model(model))
    print(f"{args.algo} model on {X.shape[0]} epochs, {n_classes} classes -> {args.out}")
    return 0


def cmd_infer(args):
    from .backend import deserialize_model
    from .io import read_matrix

    model = deserialize_model(Path(args.model).read_bytes())
    X, _ = read_matrix(args.epochs)
    X = X[None] if X.ndim == 2 else X
    n = args.trials_per_selection
    if X.shape[0] % n:
        raise VbmiError(f"{X.shape[0]} epochs do not split into selections of {n}")
    out = []
    for s in range(X.shape[0] // n):
        sv = model.predict_selection(X[s * n:(s + 1) * n], args.aggregation)
        out.append({"selection": s, "decision": int(model.classes_[sv.decision]), "margin": sv.margin,
                    "tie": sv.tie, "scores": sv.scores.tolist()})
    print(json.dumps(out, indent=2))
    return 0


def cmd_serve_templates(args):
    from .backend import TemplateStore, TokenTable, serve_templates

    store = TemplateStore(args.store_dir)
    tokens = TokenTable.from_file(args.tokens_file)
    server = serve_templates(store, tokens, args.listen)
    print(f"template service at {server.url} (store {args.store_dir})", flush=True)
    try:
        _wait_forever()
    finally:
        server.stop()
    return 0


def _experiment_config(args):
    from dataclasses import replace

    from .harness import ExperimentConfig

    config = ExperimentConfig.from_toml(Path(args.config)) if args.config else ExperimentConfig()
    overrides = {k: v for k, v in (("seed", args.seed), ("n_jobs", args.n_jobs), ("snr_db", args.snr_db))
                 if v is not None}
    return replace(config, **overrides) if overrides else config


def cmd_run_experiment(args):
    from .harness import PUBLISHED_GRID, format_reference, run_experiment, with_grid_cell

    config = _experiment_config(args)
    configs = [with_grid_cell(config, k, n) for k, n in PUBLISHED_GRID] if args.grid else [config]
    reports = [run_experiment(c) for c in configs]
    for r in reports:
        line = format_reference(r) if args.reference_paper else (
            f"{r.n_targets} targets x {r.n_trials_per_selection} trials: accuracy {100 * r.accuracy:.2f}% "
            f"+/- {100 * r.se:.2f}, ITR {r.itr_bits_per_min:.1f} bit/min, {r.n_skipped} skipped")
        print(line)
    payload = reports[0].to_dict() if len(reports) == 1 else {"grid": [r.to_dict() for r in reports]}
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"report written to {args.out}")
    else:
        print(text)
    return 0


def cmd_calibrate(args):
    from .harness import calibrate_snr

    config = _experiment_config(args)
    history = []
    snr = calibrate_snr(args.target, config, tolerance=args.tolerance, history=history)
    for s, a in history:
        print(f"snr {s:+8.3f} dB -> accuracy {100 * a:.2f}%")
    print(f"calibrated snr_db = {snr:.4f}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="vbmi", description="cVEP brain-computer interface toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("hw-budget", help="front-end loss, LSB and V_min per gain setting")
    s.add_argument("--config", help="key = value file (z_in_ohm, z_source_ohm, v_ref_volt, adc_bits)")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_hw_budget)

    s = sub.add_parser("device", help="run the simulated acquisition device")
    s.add_argument("--listen", type=_address, default=("127.0.0.1", 7001))
    s.add_argument("--pace", default="realtime", help="realtime, max, xN or accelerated(N)")
    s.add_argument("--samples-per-packet", type=int, default=10)
    s.add_argument("--subject", help="subject config file")
    s.add_argument("--lag", type=int, default=0, help="target lag for endless streaming")
    s.add_argument("--gap-s", type=float, default=0.5)
    s.add_argument("--trials", type=int, default=0, help="finite session of random targets (0 = endless)")
    s.add_argument("--n-targets", type=int, default=7)
    s.set_defaults(func=cmd_device)

    s = sub.add_parser("stream", help="connect to a device and record")
    s.add_argument("--connect", type=_address, required=True)
    s.add_argument("--seconds", type=float, default=10.0, help="0 = until end of stream")
    s.add_argument("--out", help="write (channels, samples) volts as a matrix file")
    s.set_defaults(func=cmd_stream)

    s = sub.add_parser("analyze", help="PSD and noise metrics of a recorded matrix file")
    s.add_argument("file")
    s.add_argument("--fs", type=float)
    s.add_argument("--summary", help="JSON summary path (default: next to the input)")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("synth", help="export synthetic labeled trials")
    s.add_argument("--subject")
    s.add_argument("--n-targets", type=int, default=7)
    s.add_argument("--reps", type=int, default=3)
    s.add_argument("--out-trials", required=True)
    s.add_argument("--out-labels", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="fit a decoder from epoch and label files")
    s.add_argument("--epochs", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--algo", choices=("TRCA", "TDCA"), default="TRCA")
    s.add_argument("--gamma", type=float, default=1e-6)
    s.add_argument("--n-delays", type=int, default=5)
    s.add_argument("--n-components", type=int, default=4)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("infer", help="decode epochs with a stored model")
    s.add_argument("--model", required=True)
    s.add_argument("--epochs", required=True)
    s.add_argument("--trials-per-selection", type=int, default=1)
    s.add_argument("--aggregation", choices=("mean_scores", "average_epochs"), default="mean_scores")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("serve-templates", help="template storage HTTP service")
    s.add_argument("--listen", type=_address, default=("127.0.0.1", 8080))
    s.add_argument("--store-dir", required=True)
    s.add_argument("--tokens-file", required=True)
    s.set_defaults(func=cmd_serve_templates)

    for name, func, helptext in (("run-experiment", cmd_run_experiment, "closed-loop experiment"),
                                 ("calibrate", cmd_calibrate, "find the SNR that hits a target accuracy")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", help="TOML file with an [experiment] table")
        s.add_argument("--seed", type=int)
        s.add_argument("--snr-db", type=float)
        s.add_argument("--n-jobs", type=int)
        s.set_defaults(func=func)
        if name == "run-experiment":
            s.add_argument("--out")
            s.add_argument("--reference-paper", action="store_true",
                           help="print published accuracy/ITR/DTI beside measured values")
            s.add_argument("--grid", action="store_true", help="run all four published configurations")
        else:
            s.add_argument("--target", type=float, default=0.92)
            s.add_argument("--tolerance", type=float, default=0.03)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (VbmiError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
