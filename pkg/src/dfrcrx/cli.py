"""Command-line front end: design, radar, pd, ser, selftest.

Every command is driven by one YAML config (see README for the schema) and
writes CSV/JSON artifacts plus rendered PNG figures into the output
directory, all tagged with the config hash.  Exit codes: 0 success, 1
runtime error, 2 configuration or feasibility error; failures emit a
machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from . import dataio, figures
from .config import ExperimentConfig, load_config
from .convmat import assemble_block_system
from .errors import ConfigError, DimensionError
from .filterdesign import (
    design_coherent_circular,
    design_coherent_linear,
    design_penalized_iterative_baseline,
    design_uncoherent_ls_baseline,
    evaluate_filterbank,
    filter_outputs,
    solve_coherent,
    solve_constrained_ls_oracle,
)
from .processing import (
    DetectionParams,
    apply_filterbank,
    detect_targets,
    estimate_pd,
    range_doppler_map,
    scene_truth,
    simulate_ser,
)
from .radarsim import TargetSpec, generate_scene, random_pulse_train, simulate_ncpi
from .waveform import ModulationParams, make_alphabet

log = logging.getLogger("dfrcrx")

OUTPUT_ROOT_ENV = "DFRCRX_OUTPUT_ROOT"


def _make_alphabet(cfg: ExperimentConfig):
    return make_alphabet(cfg.alphabet.size, cfg.modulation.params(),
                         kind=cfg.modulation.kind, seed=cfg.alphabet.seed)


def _design_bank(name: str, cfg: ExperimentConfig, alphabet):
    length = cfg.filters.length
    peak = cfg.filters.peak_index
    if name == "coherent-linear":
        return design_coherent_linear(alphabet, L_f=length, peak_index=peak)
    if name == "coherent-circular":
        return design_coherent_circular(alphabet, L_f=length, peak_index=peak)
    if name == "baseline-LS":
        return design_uncoherent_ls_baseline(alphabet, L_f=length, peak_index=peak)
    if name == "baseline-penalized":
        return design_penalized_iterative_baseline(
            alphabet, L_f=length, peak_index=peak,
            mu=cfg.filters.penalty_mu, iters=cfg.filters.penalty_iters)
    raise ConfigError(f"unknown design {name!r}")


def _build_banks(cfg: ExperimentConfig, alphabet) -> dict:
    return {name: _design_bank(name, cfg, alphabet)
            for name in cfg.filters.designs}


def _manifest(command: str, cfg: ExperimentConfig, digest: str,
              stage: dataio.OutputStage, seeds: dict) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config_hash": digest,
        "seeds": seeds,
        "outputs": sorted(stage.files) + ["manifest.json"],
        "config": cfg.as_dict(),
    }


def cmd_design(cfg: ExperimentConfig, outdir: str, make_figures: bool) -> int:
    digest = dataio.config_hash(cfg.as_dict())
    stage = dataio.OutputStage(root=outdir, digest=digest)
    alphabet = _make_alphabet(cfg)
    for k, wf in enumerate(alphabet):
        stage.add_csv(f"waveform_{k}.csv", ("index", "real", "imag"),
                      dataio.waveform_rows(wf))
        stage.add_json(f"waveform_{k}.json", dataio.waveform_header(wf))
    responses = {}
    for name in cfg.filters.designs:
        bank = _design_bank(name, cfg, alphabet)
        report = evaluate_filterbank(bank, alphabet)
        responses[name] = filter_outputs(bank, alphabet)
        stage.add_csv(f"bank_{name}.csv", ("filter", "tap", "real", "imag"),
                      dataio.filterbank_rows(bank))
        stage.add_json(f"bank_{name}.json", dataio.filterbank_header(bank))
        stage.add_json(f"report_{name}.json", dataio.report_dict(report))
        print(f"{name}: coherence_error={report.coherence_error:.3e} "
              f"psl_db_max={max(report.psl_db):.2f} "
              f"constraint_residual={report.constraint_residual:.3e}")
    if make_figures:
        stage.add_bytes("filter_responses.png",
                        figures.filter_response_figure(responses, digest))
    seeds = {"alphabet": cfg.alphabet.seed}
    stage.add_json("manifest.json", _manifest("design", cfg, digest, stage, seeds))
    for path in stage.flush():
        print(f"wrote {path}")
    return 0


def cmd_radar(cfg: ExperimentConfig, outdir: str, make_figures: bool) -> int:
    digest = dataio.config_hash(cfg.as_dict())
    stage = dataio.OutputStage(root=outdir, digest=digest)
    alphabet = _make_alphabet(cfg)
    banks = _build_banks(cfg, alphabet)
    scene_cfg = cfg.scene.scene_config(alphabet.pulse_len)
    scene = generate_scene(scene_cfg, seed=cfg.radar.seed)
    train = random_pulse_train(scene_cfg.n_pulses, alphabet.size,
                               seed=(cfg.radar.seed, 7))
    data = simulate_ncpi(scene, alphabet, train)
    scene_digest = dataio.config_hash({"scene": cfg.scene.__dict__,
                                       "seed": cfg.radar.seed})
    stage.add_bytes("data.bin", dataio.datamatrix_bytes(data))
    stage.add_json("data.json", dataio.datamatrix_header(data, scene_digest))
    stage.add_csv("train.csv", ("pulse", "symbol"),
                  list(enumerate(train.symbol_indices)))

    truth = scene_truth(scene)
    summary = {"cnr_db": scene_cfg.cnr_db, "snr_db": scene_cfg.snr_db,
               "n_targets": len(truth), "designs": {}}
    for name, bank in banks.items():
        filtered = apply_filterbank(data, bank, train, mode=cfg.radar.mode)
        rdmap = range_doppler_map(filtered)
        det = detect_targets(rdmap, exclusion=cfg.detection.exclusion,
                             threshold_db=cfg.detection.threshold_db,
                             truth=truth)
        columns = ["gate"] + [f"doppler_{v:+.4f}" for v in rdmap.doppler_axis]
        stage.add_csv(f"map_{name}.csv", columns, dataio.map_rows(rdmap))
        stage.add_json(f"map_axes_{name}.json", dataio.map_axes(rdmap))
        stage.add_csv(f"detections_{name}.csv",
                      ("gate", "doppler_bin", "magnitude"), det.detections)
        summary["designs"][name] = {
            "detections": len(det.detections),
            "truth_matches": det.truth_matches,
            "threshold": det.threshold,
        }
        if make_figures:
            stage.add_bytes(
                f"rdmap_{name}.png",
                figures.range_doppler_figure(
                    rdmap, f"{name} (CNR {scene_cfg.cnr_db:g} dB, "
                           f"SNR {scene_cfg.snr_db:g} dB)", digest))
        print(f"{name}: {det.truth_matches}/{len(truth)} targets at true cells, "
              f"{len(det.detections)} detections")
    stage.add_json("summary.json", summary)
    seeds = {"alphabet": cfg.alphabet.seed, "radar": cfg.radar.seed}
    stage.add_json("manifest.json", _manifest("radar", cfg, digest, stage, seeds))
    for path in stage.flush():
        print(f"wrote {path}")
    return 0


def cmd_pd(cfg: ExperimentConfig, outdir: str, make_figures: bool) -> int:
    digest = dataio.config_hash(cfg.as_dict())
    stage = dataio.OutputStage(root=outdir, digest=digest)
    alphabet = _make_alphabet(cfg)
    banks = _build_banks(cfg, alphabet)
    base_scene = cfg.scene.scene_config(alphabet.pulse_len)
    target = TargetSpec(int(cfg.pd.target["range_cell"]),
                        float(cfg.pd.target["normalized_doppler"]))
    template = replace(base_scene, targets=[target], cnr_db=float(cfg.pd.cnr_db))
    detection = DetectionParams(exclusion=cfg.detection.exclusion,
                                threshold_db=cfg.detection.threshold_db)
    curves = {}
    for name, bank in banks.items():
        points = estimate_pd(bank, alphabet, cfg.pd.snr_grid_db, cfg.pd.trials,
                             template, seed=cfg.pd.seed, detection=detection)
        curves[name] = points
        stage.add_csv(f"pd_{name}.csv", dataio.CURVE_COLUMNS,
                      dataio.curve_rows(points))
        print(f"{name}: Pd " + " ".join(f"{p.x:+g}dB:{p.y:.3f}" for p in points))
    if make_figures:
        stage.add_bytes("pd_curves.png",
                        figures.curves_figure(curves, "probability of detection",
                                              digest))
    seeds = {"alphabet": cfg.alphabet.seed, "pd": cfg.pd.seed}
    stage.add_json("manifest.json", _manifest("pd", cfg, digest, stage, seeds))
    for path in stage.flush():
        print(f"wrote {path}")
    return 0


def cmd_ser(cfg: ExperimentConfig, outdir: str, make_figures: bool) -> int:
    digest = dataio.config_hash(cfg.as_dict())
    stage = dataio.OutputStage(root=outdir, digest=digest)
    alphabet = _make_alphabet(cfg)
    banks = _build_banks(cfg, alphabet)
    curves = {}
    for name, bank in banks.items():
        points = simulate_ser(alphabet, bank, cfg.ser.snr_grid_db,
                              cfg.ser.trials, seed=cfg.ser.seed)
        curves[name] = points
        stage.add_csv(f"ser_{name}.csv", dataio.CURVE_COLUMNS,
                      dataio.curve_rows(points))
        print(f"{name}: SER " + " ".join(f"{p.x:+g}dB:{p.y:.4f}" for p in points))
    if make_figures:
        stage.add_bytes("ser_curves.png",
                        figures.curves_figure(curves, "symbol error rate",
                                              digest, logy=True))
    seeds = {"alphabet": cfg.alphabet.seed, "ser": cfg.ser.seed}
    stage.add_json("manifest.json", _manifest("ser", cfg, digest, stage, seeds))
    for path in stage.flush():
        print(f"wrote {path}")
    return 0


def run_selftest(instances: int = 100, seed: int = 0) -> bool:
    """Cross-check the closed-form solver against the nullspace oracle."""
    rng = np.random.default_rng(seed)
    ok = True
    worst = 0.0
    for _ in range(instances):
        k = int(rng.integers(2, 5))
        length = int(rng.integers(2, 7))
        l_f = (k - 1) * (length - 1) + 1 + int(rng.integers(0, 4))
        vectors = [np.exp(1j * rng.uniform(0, 2 * np.pi, length))
                   for _ in range(k)]
        for flavor in ("linear", "circular"):
            system = assemble_block_system(vectors, l_f, flavor=flavor)
            h_formula, _ = solve_coherent(system)
            h_oracle = solve_constrained_ls_oracle(system.X, system.Xtil,
                                                   system.e)
            rel = (np.linalg.norm(h_formula - h_oracle)
                   / max(np.linalg.norm(h_oracle), 1e-300))
            worst = max(worst, rel)
    passed = worst <= 1e-8
    print(f"{'PASS' if passed else 'FAIL'} oracle-equivalence: "
          f"{instances} random instances x 2 flavors, "
          f"worst relative difference {worst:.3e} (tolerance 1e-8)")
    ok &= passed

    alphabet = make_alphabet(4, ModulationParams(n_chips=12, chip_duration=1e-3,
                                                 sample_rate=3000.0), seed=1)
    bank = design_coherent_linear(alphabet)
    report = evaluate_filterbank(bank, alphabet, compute_condition=False)
    passed = (report.coherence_error <= 1e-6
              and report.constraint_residual <= 1e-8 * np.sqrt(alphabet.size))
    print(f"{'PASS' if passed else 'FAIL'} coherency: "
          f"coherence_error {report.coherence_error:.3e}, "
          f"constraint residual {report.constraint_residual:.3e}")
    ok &= passed
    return bool(ok)


def cmd_selftest(args) -> int:
    return 0 if run_selftest(instances=args.instances, seed=args.seed) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfrcrx",
        description="Coherent receive-filter design and simulation toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_command(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("-c", "--config", required=True,
                       help="YAML experiment configuration")
        p.add_argument("-o", "--output", default=None,
                       help="output directory (overrides config)")
        p.add_argument("--no-figures", action="store_true",
                       help="skip PNG figure rendering")
        return p

    add_config_command("design", "design filter banks and score them")
    add_config_command("radar", "simulate a scene and produce range-Doppler maps")
    add_config_command("pd", "Monte-Carlo probability-of-detection curves")
    add_config_command("ser", "Monte-Carlo symbol-error-rate curves")
    st = sub.add_parser("selftest", help="run the solver cross-check suite")
    st.add_argument("--instances", type=int, default=100)
    st.add_argument("--seed", type=int, default=0)
    return parser


def _resolve_outdir(cfg: ExperimentConfig, override: str | None) -> str:
    outdir = override if override is not None else cfg.output_dir
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not os.path.isabs(outdir):
        outdir = os.path.join(root, outdir)
    return outdir


_COMMANDS = {"design": cmd_design, "radar": cmd_radar, "pd": cmd_pd,
             "ser": cmd_ser}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return cmd_selftest(args)
        cfg = load_config(args.config)
        outdir = _resolve_outdir(cfg, args.output)
        make_figures = cfg.figures and not args.no_figures
        return _COMMANDS[args.command](cfg, outdir, make_figures)
    except (ConfigError, DimensionError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc),
                   "exit_code": 2}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except Exception as exc:  # runtime failures
        json.dump({"error": type(exc).__name__, "message": str(exc),
                   "exit_code": 1}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
