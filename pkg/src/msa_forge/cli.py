"""``msa-forge`` command line.

Settings come from ``--config`` (a JSON file; defaults apply to anything it
leaves out), then the flags override them.  ``--threads`` falls back to the
config, then to ``MSA_FORGE_THREADS``, then to the number of cores.

Exit status: 0 success, 2 configuration error, 3 capacity error, 4 a
``verify-*`` check failed.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .config import RunConfig, load_config, parse_config
from .disorder import DisorderSample, sample
from .errors import CapacityError, ConfigError, DomainError, MSAError
from .geometry import Box
from .green import classify
from .harness import (
    SCHEMA_VERSION,
    estimate_ss,
    mp_step_events,
    single_site_probability,
    tensor_spectrum_check,
    verify_induction,
    wegner_estimate,
)
from .operator import assemble
from .report import csv_text, dumps
from .suites import descent_suite, gri_suite

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_VERIFY = 0, 2, 3, 4


def _header(command: str, cfg: RunConfig) -> dict:
    return {"schema": SCHEMA_VERSION, "command": command}


def _model_json(cfg: RunConfig) -> dict:
    m = cfg.model
    inter = None
    if m.interaction is not None:
        inter = {"r0": m.interaction.r0, "u0": m.interaction.u0, "values": m.interaction.values}
    return {"d": m.d, "N": m.N, "g": m.g, "distribution": cfg.build_model().distribution.to_json(),
            "interaction": inter}


def _scan(cfg: RunConfig, L: int) -> Optional[int]:
    r = cfg.classification.cnr_scan_radius
    return r if r is not None else max(1, int(math.floor(L ** (2 / 3) + 1e-12)))


def cmd_classify(cfg: RunConfig, threads):
    model = cfg.build_model()
    bc = cfg.box
    box = model.box(bc.L, bc.center)
    support = box.support()
    if bc.potential is not None:
        if len(bc.potential) != len(support):
            raise ConfigError(f"box.potential needs {len(support)} values, got {len(bc.potential)}")
        pot = DisorderSample(None, support, np.asarray(bc.potential, dtype=float))
    else:
        pot = sample(model.distribution, cfg.base_seed if bc.seed is None else bc.seed, support)
    H = assemble(box, model.g, pot, model.interaction)
    c = classify(H, cfg.E, cfg.mass(), cfg.classification.beta, _scan(cfg, bc.L),
                 cfg.classification.cnr_mode, cap=cfg.max_sites)
    payload = _header("classify", cfg)
    payload.update({"model": _model_json(cfg), "box": {"center": list(box.center), "L": box.radius},
                    "E": cfg.E, "classification": c.to_json()})
    return payload, [dict(L=box.radius, E=cfg.E, **c.to_json())], True


def cmd_mc(cfg: RunConfig, threads):
    rep = estimate_ss(cfg.build_model(), cfg.E, cfg.mass(), cfg.box.L, cfg.trials, cfg.base_seed,
                      cfg.classification.beta, cfg.classification.p,
                      cfg.classification.cnr_scan_radius, cfg.classification.cnr_mode,
                      threads, cfg.max_sites)
    payload = _header("mc", cfg)
    payload.update({"model": _model_json(cfg), "report": rep.to_json()})
    return payload, [rep.csv_row()], True


def cmd_wegner(cfg: RunConfig, threads):
    model = cfg.build_model()
    w = cfg.wegner
    rep = wegner_estimate(model, cfg.E, w.L, w.epsilon, cfg.trials, cfg.base_seed, w.beta,
                          w.beta_prime, threads, cfg.max_sites)
    out = rep.to_json()
    if w.L == 1 and model.N == 1:
        out["exact"] = single_site_probability(model.distribution, model.g, cfg.E, w.epsilon)
    payload = _header("wegner", cfg)
    payload.update({"model": _model_json(cfg), "base_seed": cfg.base_seed, "report": out})
    return payload, [out], True


def cmd_induct(cfg: RunConfig, threads):
    rep = verify_induction(cfg.build_model(), cfg.E, cfg.mass(), cfg.schedule.L0,
                           cfg.schedule.k_max, cfg.trials, cfg.base_seed,
                           cfg.classification.beta, cfg.classification.p,
                           cfg.classification.cnr_mode, threads, cfg.max_sites)
    payload = _header("induct", cfg)
    body = rep.to_json()
    del body["schema"]
    payload.update({"model": _model_json(cfg), **body})
    return payload, [r.csv_row() for r in rep.reports], True


def cmd_mp_events(cfg: RunConfig, threads):
    mp = cfg.mp
    log = mp_step_events(cfg.build_model(), cfg.E, cfg.mass(), mp.L_small, mp.L_big, cfg.trials,
                         cfg.base_seed, mp.center, cfg.classification.beta,
                         cfg.classification.cnr_mode, threads, cfg.max_sites)
    payload = _header("mp-events", cfg)
    body = log.to_json()
    del body["schema"]
    payload.update({"model": _model_json(cfg), **body})
    return payload, body["trials"], True


def cmd_mp_spectrum(cfg: RunConfig, threads):
    model = cfg.build_model()
    sc = cfg.spectrum
    d = model.d
    if len(sc.left) % d or len(sc.right) % d:
        raise ConfigError("spectrum.left/right must have a multiple of model.d coordinates")
    left = Box(tuple(sc.left), sc.L, len(sc.left) // d)
    right = Box(tuple(sc.right), sc.L, len(sc.right) // d)
    region = np.unique(np.vstack([left.support(), right.support()]), axis=0)
    pot = sample(model.distribution, sc.seed, region)
    res = tensor_spectrum_check(left, right, model.g, pot, cfg.E, model.interaction,
                                sc.m_factor, sc.m_total, cfg.classification.beta, cfg.max_sites)
    payload = _header("mp-spectrum", cfg)
    payload.update({"model": _model_json(cfg), "check": res.to_json()})
    return payload, [res.to_json()], True


def cmd_verify_gri(cfg: RunConfig, threads):
    res = gri_suite(cfg.gri.instances, cfg.gri.seed, cfg.gri.tolerance)
    payload = _header("verify-gri", cfg)
    payload["result"] = res.to_json()
    return payload, [res.to_json()], res.passed


def cmd_verify_descent(cfg: RunConfig, threads):
    dc = cfg.descent
    res = descent_suite(dc.instances, dc.seed, dc.A)
    payload = _header("verify-descent", cfg)
    body = res.to_json()
    payload["result"] = body
    row = {k: v for k, v in body.items() if k != "by_case"}
    return payload, [row], res.passed


COMMANDS: dict[str, Callable] = {
    "classify": cmd_classify,
    "mc": cmd_mc,
    "wegner": cmd_wegner,
    "induct": cmd_induct,
    "mp-events": cmd_mp_events,
    "mp-spectrum": cmd_mp_spectrum,
    "verify-gri": cmd_verify_gri,
    "verify-descent": cmd_verify_descent,
}

HELP = {
    "classify": "classify one box (NS / NR / CNR)",
    "mc": "estimate the singularity probability at one scale",
    "wegner": "estimate P(dist(E, spectrum) <= epsilon)",
    "induct": "check the scale-induction step over the schedule",
    "mp-events": "log multi-particle S/B events per trial",
    "mp-spectrum": "compare a two-subsystem spectrum with sums of factor spectra",
    "verify-gri": "randomized resolvent-identity suite",
    "verify-descent": "randomized radial-descent suite",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--threads", type=int, help="worker threads for Monte-Carlo trials")
    common.add_argument("--out", type=Path, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), help="report format")
    common.add_argument("--seed", type=int, help="base seed (also the seed of verify-* suites)")
    parser = argparse.ArgumentParser(prog="msa-forge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else parse_config({})
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        cfg.base_seed = args.seed
        cfg.gri.seed = cfg.descent.seed = cfg.spectrum.seed = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg.threads = args.threads
    if args.format is not None:
        cfg.output.format = args.format
    if args.out is not None:
        cfg.output.path = str(args.out)
    return cfg


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        payload, rows, ok = COMMANDS[args.command](cfg, cfg.threads)
    except ConfigError as exc:
        print(f"msa-forge: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"msa-forge: capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except DomainError as exc:
        print(f"msa-forge: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MSAError as exc:
        print(f"msa-forge: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = dumps(payload) if cfg.output.format == "json" else csv_text(rows)
    if cfg.output.path:
        Path(cfg.output.path).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_VERIFY


if __name__ == "__main__":
    raise SystemExit(main())
