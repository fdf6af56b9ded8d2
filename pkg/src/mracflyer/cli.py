"""Command-line entry point: ``mracflyer certify|simulate|compare``.

Exit codes: 0 success, 1 validation error, 2 certification failure,
3 simulation divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from .config import BUILTIN_CONFIGS, RunConfig, builtin_config_path, load_config
from .errors import CertificationError, ConfigError, MracError
from .harness import AXES, BatchSummary, aggregate, paired_comparison, run_batch
from .lyapunov import assemble_AB, solve_lyapunov

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CERTIFICATION = 2
EXIT_DIVERGENCE = 3

RESIDUAL_TOL = 1e-10  # relative to ||Q||_F

log = logging.getLogger("mracflyer")


def _dump_json(path: str, payload: dict) -> None:
    """Write ``payload`` with the timestamp on its own first line, everything else deterministic."""
    body = {"generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    body.update(payload)
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, allow_nan=False)
        fh.write("\n")


def _config_echo(cfg: RunConfig) -> dict:
    data = cfg.to_dict()
    data.pop("output", None)
    return data


def _certificate(cfg: RunConfig) -> tuple[dict, bool]:
    """Certificate payload and whether it passes (Hurwitz and residual within tolerance)."""
    gains = cfg.build_gains()
    mats = assemble_AB(gains)
    Q = cfg.build_Q()
    cert = solve_lyapunov(mats.A, Q)
    rel = cert.residual / np.linalg.norm(Q)
    payload = {"A": mats.A.tolist(), "B": mats.B.tolist()}
    payload.update(cert.to_dict())
    payload["residual_tolerance"] = RESIDUAL_TOL
    payload["hurwitz"] = True
    return payload, bool(rel <= RESIDUAL_TOL)


def _certification_failure(exc: CertificationError) -> dict:
    eig = np.asarray(exc.eigenvalues)
    return {
        "hurwitz": False,
        "spectral_abscissa": float(np.max(eig.real)),
        "eigenvalues": {"real": eig.real.tolist(), "imag": eig.imag.tolist()},
        "message": str(exc),
    }


def cmd_certify(cfg: RunConfig, out_dir: str) -> int:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "certificate.json")
    try:
        payload, ok = _certificate(cfg)
    except CertificationError as exc:
        _dump_json(path, _certification_failure(exc))
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    _dump_json(path, payload)
    print(
        f"Hurwitz: spectral abscissa {payload['spectral_abscissa']:.6g} rad/s; "
        f"residual ||A^T P + P A + Q||_F = {payload['residual']:.3e} "
        f"({payload['relative_residual']:.3e} relative)"
    )
    if not ok:
        print("certification failed: Lyapunov residual above tolerance", file=sys.stderr)
        return EXIT_CERTIFICATION
    return EXIT_OK


def _run_arm(cfg: RunConfig, design, controller: str, out_dir: str, parallel: int):
    specs = cfg.trial_specs(controller, design, out_dir)
    t0 = time.perf_counter()
    results = run_batch(specs, parallel=parallel)
    log.info("%s arm: %d trials in %.1f s", controller, len(results), time.perf_counter() - t0)
    return results


def _summary_or_none(results) -> BatchSummary | None:
    try:
        return aggregate(results)
    except MracError as exc:
        print(f"aggregation failed: {exc}", file=sys.stderr)
        return None


def cmd_simulate(cfg: RunConfig, out_dir: str, controller: str, parallel: int = 1) -> int:
    os.makedirs(out_dir, exist_ok=True)
    design = cfg.build_design()
    results = _run_arm(cfg, design, controller, out_dir, parallel)
    summary = _summary_or_none(results)
    _dump_json(
        os.path.join(out_dir, f"summary_{controller}.json"),
        {
            "config": _config_echo(cfg),
            "certificate": design.cert.to_dict(),
            "trials": [r.to_dict() for r in results],
            "summary": None if summary is None else summary.to_dict(),
        },
    )
    if summary is not None:
        print(_format_arm(summary))
    return EXIT_DIVERGENCE if any(r.failed for r in results) else EXIT_OK


def _cm(x) -> str:
    return f"{100.0 * x:.4f}"


def _format_arm(s: BatchSummary) -> str:
    parts = []
    for i, axis in enumerate(AXES):
        esd = "n/a" if s.esd is None else _cm(s.esd[i])
        parts.append(f"{axis}: {_cm(s.mean[i])} +/- {esd} cm")
    return f"{s.controller:>8}  " + "  ".join(parts)


def format_table(adaptive: BatchSummary, baseline: BatchSummary, reduction) -> str:
    lines = [
        "RMS position error, mean +/- ESD over trials (cm)",
        f"{'axis':<6}{'adaptive':>26}{'baseline':>26}{'reduction':>12}",
    ]
    for i, axis in enumerate(AXES):
        a = f"{_cm(adaptive.mean[i])} +/- {'n/a' if adaptive.esd is None else _cm(adaptive.esd[i])}"
        b = f"{_cm(baseline.mean[i])} +/- {'n/a' if baseline.esd is None else _cm(baseline.esd[i])}"
        r = "n/a" if reduction[i] is None else f"{reduction[i]:.1f} %"
        lines.append(f"{axis:<6}{a:>26}{b:>26}{r:>12}")
    return "\n".join(lines)


def cmd_compare(cfg: RunConfig, out_dir: str, parallel: int = 1) -> int:
    os.makedirs(out_dir, exist_ok=True)
    design = cfg.build_design()
    adaptive = _run_arm(cfg, design, "adaptive", out_dir, parallel)
    baseline = _run_arm(cfg, design, "baseline", out_dir, parallel)
    s_a, s_b = _summary_or_none(adaptive), _summary_or_none(baseline)
    payload = {
        "config": _config_echo(cfg),
        "certificate": design.cert.to_dict(),
        "trials": {"adaptive": [r.to_dict() for r in adaptive], "baseline": [r.to_dict() for r in baseline]},
        "summary": {
            "adaptive": None if s_a is None else s_a.to_dict(),
            "baseline": None if s_b is None else s_b.to_dict(),
        },
        "comparison": None,
    }
    if s_a is not None and s_b is not None:
        comp = paired_comparison(s_a, s_b)
        payload["comparison"] = comp.to_dict()
        print(format_table(s_a, s_b, comp.reduction))
    _dump_json(os.path.join(out_dir, "comparison.json"), payload)
    if s_a is None or s_b is None:
        return EXIT_DIVERGENCE
    return EXIT_DIVERGENCE if any(r.failed for r in adaptive + baseline) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mracflyer", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument(
            "--config",
            default="paper_hover",
            help=f"path to a YAML config, or a built-in name ({', '.join(BUILTIN_CONFIGS)})",
        )
        p.add_argument("--out", default=None, help="output directory (default: config 'output')")

    def batch(p):
        p.add_argument("--parallel", type=int, default=1, metavar="K", help="worker processes for trials")
        p.add_argument("--seed-base", type=int, default=None, metavar="U64", help="trial seeds become base+1..base+N")

    common(sub.add_parser("certify", help="certify the gains: Hurwitz check and Lyapunov solve"))
    p = sub.add_parser("simulate", help="run one batch of hovering trials")
    common(p)
    batch(p)
    p.add_argument("--controller", choices=("adaptive", "baseline"), default="adaptive")
    p = sub.add_parser("compare", help="run paired adaptive and baseline batches")
    common(p)
    batch(p)
    return parser


def _resolve_config(arg: str) -> RunConfig:
    if arg in BUILTIN_CONFIGS and not os.path.exists(arg):
        arg = builtin_config_path(arg)
    return load_config(arg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _resolve_config(args.config)
        if getattr(args, "seed_base", None) is not None:
            cfg = cfg.copy(seed_base=args.seed_base, seeds=None)
        if getattr(args, "parallel", 1) < 1:
            raise ConfigError("--parallel must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out_dir = args.out if args.out is not None else cfg.output
    try:
        if args.command == "certify":
            return cmd_certify(cfg, out_dir)
        if args.command == "simulate":
            code = cmd_simulate(cfg, out_dir, args.controller, args.parallel)
        else:
            code = cmd_compare(cfg, out_dir, args.parallel)
        cfg.save(os.path.join(out_dir, "config.yaml"))
        return code
    except CertificationError as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
