"""``nwcavity`` command line."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, validate
from ..fdtd.solver import CheckpointError
from .store import MANIFEST, JobLockedError, RunManifest

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_UNCONVERGED = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nwcavity", description="Nanowire cavity simulation and analysis.")
    p.add_argument("--quiet", action="store_true", help="only errors on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def job(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="YAML or JSON job file")
        s.add_argument("--out", help="job directory (default: output_dir of the config)")
        return s

    s = job("run", "one cavity: Purcell spectrum, far field, extraction, field slice")
    s.add_argument("--resolution-nm", type=float, help="override numerics.resolution_nm")
    s.add_argument("--threads", type=int, help="solver threads")
    s.add_argument("--resume", nargs="?", const="", metavar="CHECKPOINT",
                   help="continue from a checkpoint (default: the job directory's own)")
    s = job("sweep", "family of runs over one geometric parameter")
    s.add_argument("--resolution-nm", type=float, help="override numerics.resolution_nm")
    s.add_argument("--threads", type=int, help="solver threads per cell")
    job("modes", "guided-mode dispersion of the equivalent circular wire")
    s = job("farfield", "recompute far-field numbers from a finished run")
    s.add_argument("--from", dest="source", required=True, help="job directory of the run")
    job("fit-material", "pole fit of a tabulated metal permittivity")
    s = sub.add_parser("validate", help="check a job file without computing")
    s.add_argument("--config", required=True)
    s = sub.add_parser("report", help="verify and summarise a job directory")
    s.add_argument("--out", required=True)
    return p


def _load(args):
    cfg = validate(args.config)
    if getattr(args, "resolution_nm", None):
        num = cfg.numerics.model_copy(update={"resolution_nm": args.resolution_nm})
        cfg = cfg.model_copy(update={"numerics": type(num).model_validate(num.model_dump())})
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    from . import commands  # heavy imports only after the arguments parse

    try:
        if args.command == "report":
            return commands.cmd_report(args.out, args.quiet)
        cfg = _load(args)
        if args.command == "validate":
            if not args.quiet:
                print(json.dumps(cfg.canonical(), indent=2, sort_keys=True))
            return EXIT_OK
        out = Path(args.out or cfg.output_dir)
        if args.command == "run":
            resume = None
            if args.resume is not None:
                ckpt = Path(args.resume) if args.resume else out / "checkpoint.npz"
                if not ckpt.exists():
                    raise FileNotFoundError(f"no checkpoint at {ckpt}")
                man = ckpt.parent / MANIFEST
                if man.exists() and RunManifest.read(man).config_hash != cfg.digest():
                    raise ValueError("the checkpoint belongs to a different configuration")
                resume = ckpt
            return commands.cmd_run(cfg, out, args.threads, resume, args.quiet)
        if args.command == "sweep":
            return commands.cmd_sweep(cfg, out, args.threads, args.quiet)
        if args.command == "modes":
            return commands.cmd_modes(cfg, out, args.quiet)
        if args.command == "farfield":
            return commands.cmd_farfield(cfg, out, args.source, args.quiet)
        if args.command == "fit-material":
            return commands.cmd_fit_material(cfg, out, args.quiet)
    except ConfigError as exc:
        print(f"nwcavity: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (JobLockedError, CheckpointError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"nwcavity: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
