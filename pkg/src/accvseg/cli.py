"""``seg`` command line: ``seg init|segment|verify <config.json> [overrides]``.

Exit codes: 0 success, 2 bad config or arguments, 3 I/O failure, 4 no
edges found, 5 non-finite values, 6 no convergence within ``max_outer``,
7 a ``verify`` property failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import admm, etd, iglim, io, model, spectral

log = logging.getLogger("accvseg")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NO_EDGES, EXIT_NONFINITE, EXIT_NOT_CONVERGED, EXIT_VERIFY = 0, 2, 3, 4, 5, 6, 7


@dataclass
class RunConfig:
    """Everything a run needs.  JSON keys use the model's symbol names;
    ``lambda`` is accepted for ``lam``."""

    input: str = ""
    output: str = "seg-out"
    kappa: float = 50.0
    sigma: float = 0.05
    M: int = 5
    m: int = 4
    seed: int = 0
    epsilon: float = 6.0
    lam: float = 40.0
    p: int = 3
    h: float = 0.3
    S: float = 120.0
    dt: float = 0.3
    tol_steady: float = 1e-4
    tol_outer: float = 1e-3
    max_inner: int = 500
    max_outer: int = 50
    scheme: str = "etdrk2"
    mbp_mode: str = "user-S"
    rescale: list | None = None
    verify_inner: int = 40
    verify_outer: int = 2

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        # grouped keys first, so top-level keys and CLI flags win
        merged = {}
        for group in ("tolerances", "caps"):
            merged.update(data.pop(group, {}) or {})
        merged.update(data)
        data = merged
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        self.init_params()
        self.model_params()
        if self.scheme not in etd.SCHEMES:
            raise ValueError(f"scheme must be one of {etd.SCHEMES}, got {self.scheme!r}")
        if self.rescale is not None and (len(self.rescale) != 2 or min(self.rescale) < 2):
            raise ValueError(f"rescale must be [rows, cols] with both >= 2, got {self.rescale}")
        if not self.input:
            raise ValueError("config needs an 'input' image path")

    def init_params(self) -> iglim.InitParams:
        return iglim.InitParams(kappa=self.kappa, sigma=self.sigma, M=self.M, m=self.m, seed=self.seed)

    def model_params(self, **overrides) -> model.ModelParams:
        kw = dict(epsilon=self.epsilon, lam=self.lam, p=self.p, h=self.h, S=self.S, dt=self.dt,
                  tol_steady=self.tol_steady, tol_outer=self.tol_outer, max_inner=self.max_inner,
                  max_outer=self.max_outer, mbp_mode=self.mbp_mode)
        kw.update(overrides)
        return model.ModelParams(**kw)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_OVERRIDES = [
    ("--input", str), ("--output", str), ("--kappa", float), ("--sigma", float), ("--M", int),
    ("--m", int), ("--seed", int), ("--epsilon", float), ("--lambda", float), ("--p", int),
    ("--h", float), ("--S", float), ("--dt", float), ("--tol-steady", float), ("--tol-outer", float),
    ("--max-inner", int), ("--max-outer", int), ("--scheme", str), ("--mbp-mode", str),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seg", description="phase-field (ACCV) image segmentation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("init", "run the initializer and write its masks"),
                       ("segment", "segment an image and write all artifacts"),
                       ("verify", "check bound preservation, energy decay and the phi evaluation")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="JSON run configuration")
        for flag, typ in _OVERRIDES:
            p.add_argument(flag, type=typ, default=None)
        p.add_argument("--rescale", type=int, nargs=2, metavar=("ROWS", "COLS"), default=None)
    return parser


def load_config(args) -> RunConfig:
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigIOError(f"cannot read config {args.config}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {args.config} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    for flag, _ in _OVERRIDES:
        dest = flag.lstrip("-").replace("-", "_")
        value = getattr(args, dest)
        if value is not None:
            data[dest] = value
    if args.rescale is not None:
        data["rescale"] = list(args.rescale)
    cfg = RunConfig.from_dict(data)
    # relative paths are taken from the config file's directory
    base = Path(args.config).resolve().parent
    if not Path(cfg.input).is_absolute() and args.input is None:
        cfg.input = str(base / cfg.input)
    if not Path(cfg.output).is_absolute() and args.output is None:
        cfg.output = str(base / cfg.output)
    return cfg


class ConfigIOError(OSError):
    pass


def _load(cfg: RunConfig) -> np.ndarray:
    return io.load_image(cfg.input, cfg.rescale)


def run_init(cfg: RunConfig) -> int:
    image = _load(cfg)
    masks = iglim.multi_iglim(image, cfg.init_params())
    U0 = iglim.combine_phases(masks)
    files = {f"mask_{k + 1}.png": (lambda path, v=v: io.write_png(path, io.to_uint8(v))) for k, v in enumerate(masks)}
    files.update({f"u0_{i + 1}.png": (lambda path, u=u: io.write_png(path, io.to_uint8(u))) for i, u in enumerate(U0)})
    files["init.json"] = lambda path: io.write_json(path, {
        "mask_pixels": [int(v.sum()) for v in masks], "n_fields": int(U0.shape[0]),
        "shape": list(image.shape)})
    io.publish(files, cfg.output)
    print(f"wrote {len(files)} files to {cfg.output}")
    return EXIT_OK


def summarize(cfg, image, U, C, labels, trace) -> dict:
    n = U.shape[0]
    counts = np.bincount(labels.ravel(), minlength=2 ** n)
    return {
        "config": cfg.as_dict(),
        "shape": list(image.shape),
        "n_fields": n,
        "means": {str(b): [float(c) for c in C[b]] for b in range(2 ** n)},
        "label_pixels": {str(b): int(counts[b]) for b in range(2 ** n)},
        "outer_iterations": trace.n_outer,
        "inner_iterations": trace.inner_iterations,
        "converged": trace.converged,
        "stop_reason": trace.reason,
        "mbp_violations": trace.mbp_violations,
        "effective_S": trace.reports[0].S if trace.reports else cfg.S,
        "final_min": float(U.min()),
        "final_max": float(U.max()),
        "final_energy": trace.records[-1]["E_h"],
        "warnings": list(trace.warnings),
    }


def run_segment(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    image = _load(cfg)
    U0 = iglim.combine_phases(iglim.multi_iglim(image, cfg.init_params()))
    U, C, labels, trace = admm.admm_solve(image, U0, cfg.model_params(), cfg.scheme)
    wall = time.perf_counter() - t0
    contours = admm.extract_contours(U)
    files = {
        "labels.png": lambda path: io.write_png(path, io.label_rgb(labels)),
        "contours.png": lambda path: io.write_png(path, io.contour_rgb(image, contours)),
        "energy.csv": lambda path: io.write_energy_csv(path, trace),
        "summary.json": lambda path: io.write_json(path, summarize(cfg, image, U, C, labels, trace)),
        # kept apart so summary.json stays identical across repeated runs
        "timing.json": lambda path: io.write_json(path, {"wall_seconds": wall}),
    }
    for i, u in enumerate(U):
        files[f"u_{i + 1}.png"] = lambda path, u=u: io.write_png(path, io.to_uint8(u))
    io.publish(files, cfg.output)
    print(f"{trace.reason} after {trace.n_outer} outer / {trace.inner_iterations} inner iterations "
          f"({wall:.2f} s); artifacts in {cfg.output}")
    if not trace.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _energy_monotone(values, slack=1e-10) -> bool:
    e = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(e) <= slack * (1 + np.abs(e[:-1]))))


def verify_properties(cfg: RunConfig, image) -> list:
    """Run the property checks; returns ``(name, passed, detail)`` triples."""
    results = []
    U0 = iglim.combine_phases(iglim.multi_iglim(image, cfg.init_params()))
    params = cfg.model_params(mbp_mode="enforce-gamma", max_inner=cfg.verify_inner,
                              max_outer=cfg.verify_outer)
    gamma = model.stabilizer_bound(params.epsilon, params.lam, image.shape[2], params.eps1)
    for scheme in etd.SCHEMES:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", model.EmptyRegionWarning)
            U, C, labels, trace = admm.admm_solve(image, U0, params, scheme, track_energy=True)
        lo = min(float(r.mins.min()) for r in trace.reports)
        hi = max(float(r.maxs.max()) for r in trace.reports)
        ok = lo >= -etd.MBP_SLACK and hi <= 1 + etd.MBP_SLACK
        results.append((f"mbp[{scheme}]", ok, f"S={gamma:.6g} min={lo:.3e} max={hi:.6f}"))
        ok_ck = _energy_monotone(trace.energies)
        ok_in = all(_energy_monotone(r.energies) for r in trace.reports)
        results.append((f"energy-monotone[{scheme}]", ok_ck and ok_in,
                        f"{len(trace.energies)} checkpoints, "
                        f"{sum(len(r.energies) for r in trace.reports)} inner steps"))
    crop = image[:8, :8, 0]
    plan = spectral.SpectralPlan(crop.shape, cfg.h, cfg.S, cfg.epsilon, cfg.dt)
    err = max(float(np.abs(spectral.apply_phi(j, plan, crop) - spectral.dense_phi(j, plan, crop)).max())
              for j in range(3))
    results.append(("phi-oracle[8x8]", err <= 1e-10, f"max error {err:.2e}"))
    return results


def run_verify(cfg: RunConfig) -> int:
    image = _load(cfg)
    results = verify_properties(cfg, image)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_VERIFY


COMMANDS = {"init": run_init, "segment": run_segment, "verify": run_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        log.debug("%s with %s", args.command, cfg.as_dict())
        return COMMANDS[args.command](cfg)
    except OSError as exc:
        print(f"seg: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except iglim.NoEdgesError as exc:
        print(f"seg: {exc}", file=sys.stderr)
        return EXIT_NO_EDGES
    except etd.NonFiniteError as exc:
        print(f"seg: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except ValueError as exc:
        print(f"seg: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
