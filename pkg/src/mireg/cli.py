"""Command-line orchestration: staged pipeline with restartable snapshots.

Verbs: enumerate, build-model, estimate-q, solve, verify, report.  Every
stage writes its artifact plus a manifest recording the full
configuration, the seed, and the digests of its inputs and outputs, so
a run directory is a pure function of (config, seed).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from typing import Dict, List, Optional

import numpy as np

from .config import ConfigError, RunConfig
from .fields import sample_noise
from .indices import enumerate_populated, Homogeneity, MultiIndex
from .jets import Jet
from .model import (RenormVector, build_stationary, check_assumptions,
                    estimate_q)
from .calculus import Mollifier
from .modelled import Nonlinearity
from .snapshot import Snapshot, field_snapshot, model_snapshot
from .solve import SolverConfig, theorem_report


def _file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out: str, stage: str, cfg: RunConfig,
                    artifacts: Dict[str, str], extra: Dict = None):
    manifest = {
        "stage": stage,
        "config": json.loads(cfg.to_json()),
        "artifacts": artifacts,
        "extra": extra or {},
    }
    path = os.path.join(out, f"{stage}.manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {}
    for item in args.override or []:
        key, _, value = item.partition("=")
        if not _:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        overrides[key] = value
    if overrides:
        cfg = cfg.with_overrides(overrides)
    if args.seed is not None:
        cfg = cfg.with_overrides({"seed": str(args.seed)})
    if args.threads is not None:
        cfg = cfg.with_overrides({"threads": str(args.threads)})
    if args.out is not None:
        cfg = cfg.with_overrides({"out_dir": args.out})
    return cfg


def cmd_enumerate(cfg: RunConfig) -> int:
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    iset = enumerate_populated(cfg.alpha_fraction, cfg.d,
                               Homogeneity(cfg.cutoff_int, cfg.cutoff_alpha))
    path = os.path.join(out, "indices.txt")
    with open(path, "w") as fh:
        fh.write(iset.to_text())
    _write_manifest(out, "enumerate", cfg, {"indices": _file_digest(path)},
                    {"count": len(iset)})
    print(f"wrote {path} ({len(iset)} indices)")
    return 0


def cmd_build_model(cfg: RunConfig) -> int:
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    ctx = cfg.context()
    grid = cfg.grid()
    q = _load_q(cfg, ctx) or RenormVector()
    xi = sample_noise(cfg.noise_spec(), grid)
    model = build_stationary(ctx, grid, ctx.index_set, xi, q)
    snap = model_snapshot(model, cfg.n0)
    path = os.path.join(out, "model.snap")
    digest = snap.write(path)
    _write_manifest(out, "build-model", cfg, {"model": digest},
                    {"q_components": len(q.components)})
    print(f"wrote {path} digest {digest[:16]}")
    return 0


def _load_q(cfg: RunConfig, ctx) -> Optional[RenormVector]:
    path = os.path.join(cfg.out_dir, "q.snap")
    if not os.path.exists(path):
        return None
    snap = Snapshot.read(path)
    q = RenormVector()
    for key, arr in snap.arrays.items():
        if not key.startswith("q/"):
            continue
        beta = _parse_index_key(key[2:], ctx.d)
        q.components[beta] = Jet(arr, ctx.center)
    return q


def _parse_index_key(key: str, d: int) -> MultiIndex:
    xpart, _, ppart = key[1:].partition("p")
    bx = tuple(int(v) for v in xpart.split("."))
    bp = {}
    if ppart:
        for item in ppart.split("."):
            k, _, c = item.partition("-")
            bp[int(k)] = int(c)
    return MultiIndex.make(bx, bp)


def cmd_estimate_q(cfg: RunConfig) -> int:
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    ctx = cfg.context()
    grid = cfg.grid()
    from .indices import critical_integers
    n, _, _ = critical_integers(cfg.alpha_fraction)
    q = estimate_q(ctx, grid, ctx.index_set, cfg.noise_spec(),
                   cfg.ensemble, n, threads=cfg.threads)
    arrays = {f"q/{_key(beta)}": jet.coeffs
              for beta, jet in q.components.items()}
    arrays.update({f"stderr/{_key(beta)}": err
                   for beta, err in q.stderr.items()})
    snap = field_snapshot(ctx, grid, ctx.index_set, cfg.n0, arrays)
    path = os.path.join(out, "q.snap")
    digest = snap.write(path)
    _write_manifest(out, "estimate-q", cfg, {"q": digest},
                    {"ensemble": cfg.ensemble, "max_abs": q.max_abs()})
    print(f"wrote {path} digest {digest[:16]}")
    return 0


def _key(beta: MultiIndex) -> str:
    from .snapshot import _index_key
    return _index_key(beta)


def cmd_solve(cfg: RunConfig) -> int:
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    ctx = cfg.context()
    grid = cfg.grid()
    q = _load_q(cfg, ctx) or RenormVector()
    a = Nonlinearity.polynomial(cfg.a_coeffs, cfg.lam)
    scfg = SolverConfig(grid, lam=cfg.lam)
    rep, result, state = theorem_report(ctx, scfg, cfg.noise_spec(), q, a,
                                        eta=cfg.eta)
    arrays = {"u": result.u}
    for i, n in enumerate(state.nu):
        arrays[f"nu{i}"] = n
    snap = field_snapshot(ctx, grid, ctx.index_set, cfg.n0, arrays)
    path = os.path.join(out, "solution.snap")
    digest = snap.write(path)
    csv_path = os.path.join(out, "theorem.csv")
    rep.to_csv(csv_path)
    _write_manifest(out, "solve", cfg,
                    {"solution": digest, "theorem": _file_digest(csv_path)},
                    {"residual": result.residual,
                     "iterations": result.iterations,
                     "holder_constant": rep.holder_constant,
                     "expansion_exponent": rep.expansion_exponent})
    print(f"wrote {path} digest {digest[:16]}; "
          f"residual {result.residual:.3e}")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    """Replay digests and identity residuals for a completed run."""
    out = cfg.out_dir
    failures: List[str] = []
    for stage in ("enumerate", "build-model", "estimate-q", "solve"):
        mpath = os.path.join(out, f"{stage}.manifest.json")
        if not os.path.exists(mpath):
            continue
        with open(mpath) as fh:
            manifest = json.load(fh)
        for name, digest in manifest["artifacts"].items():
            fname = {"indices": "indices.txt", "model": "model.snap",
                     "q": "q.snap", "solution": "solution.snap",
                     "theorem": "theorem.csv"}.get(name)
            if fname is None:
                continue
            path = os.path.join(out, fname)
            if not os.path.exists(path):
                failures.append(f"{stage}:{name}: missing {fname}")
                continue
            if fname.endswith(".snap"):
                try:
                    Snapshot.read(path)
                except Exception as exc:
                    failures.append(f"{stage}:{name}: {exc}")
                    continue
            if _file_digest(path) != digest:
                failures.append(f"{stage}:{name}: digest mismatch")
    mpath = os.path.join(out, "model.snap")
    if os.path.exists(mpath):
        ctx = cfg.context()
        grid = cfg.grid()
        q = _load_q(cfg, ctx) or RenormVector()
        xi = sample_noise(cfg.noise_spec(), grid)
        model = build_stationary(ctx, grid, ctx.index_set, xi, q)
        from .model import center, check_centering, check_pointwise_minus
        idx = (grid.nt // 3, grid.nx // 3)
        cm = center(model, idx)
        for name, val, tol in (
                ("centering", check_centering(cm), 1e-6),
                ("pointwise", check_pointwise_minus(cm), 1e-6)):
            if val > tol:
                failures.append(f"identity:{name}: {val:.3e} > {tol}")
    if failures:
        print(json.dumps({"failures": failures}, indent=2))
        return 2
    print("verify: all digests and identities pass")
    return 0


def cmd_report(cfg: RunConfig) -> int:
    out = cfg.out_dir
    rows = []
    for stage in ("enumerate", "build-model", "estimate-q", "solve"):
        mpath = os.path.join(out, f"{stage}.manifest.json")
        if not os.path.exists(mpath):
            continue
        with open(mpath) as fh:
            manifest = json.load(fh)
        for k, v in manifest.get("extra", {}).items():
            rows.append(f"{stage},{k},{v}")
    path = os.path.join(out, "report.csv")
    with open(path, "w") as fh:
        fh.write("stage,quantity,value\n")
        for row in rows:
            fh.write(row + "\n")
    print(f"wrote {path}")
    for row in rows:
        print("  " + row)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mireg",
        description="multi-index model machinery for quasi-linear "
                    "singular SPDEs")
    parser.add_argument("--config", help="path to a JSON run config")
    parser.add_argument("--out", help="output directory override")
    parser.add_argument("--threads", type=int, help="worker cap")
    parser.add_argument("--seed", type=int, help="seed override")
    parser.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="config field override (repeatable)")
    parser.add_argument("verb", choices=["enumerate", "build-model",
                                         "estimate-q", "solve", "verify",
                                         "report"])
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    handlers = {
        "enumerate": cmd_enumerate,
        "build-model": cmd_build_model,
        "estimate-q": cmd_estimate_q,
        "solve": cmd_solve,
        "verify": cmd_verify,
        "report": cmd_report,
    }
    start = time.time()
    try:
        code = handlers[args.verb](cfg)
    except (ConfigError, ValueError) as exc:
        print(f"{args.verb}: {exc}", file=sys.stderr)
        return 1
    print(f"{args.verb}: {time.time() - start:.1f}s")
    return code


if __name__ == "__main__":
    sys.exit(main())
