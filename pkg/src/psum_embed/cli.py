"""Command-line front end: ``psum-embed <command> [options]``.

Exit status is 0 when every check passes, 1 when a check fails and 2 for
bad arguments or malformed input.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import shlex
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import embedding, verify
from .norms import PSumDomain, parse_norm_spec
from .specfun import DomainError, format_exponent, parse_exponent

SEED_ENV = "PSUM_EMBED_SEED"

COMMANDS = ("constants", "embed", "verify-symplectic", "verify-containment", "volume",
            "dual-check", "two-sum-check", "jnorm", "sweep")

DEFAULT_SAMPLES = {
    "constants": 0,
    "embed": 0,
    "verify-symplectic": 1000,
    "verify-containment": 100_000,
    "volume": 1_000_000,
    "dual-check": 10_000,
    "two-sum-check": 100,
    "jnorm": 32,
    "sweep": 0,
}

SWEEP_NORMS = ("lq:2", "lq:3", "lq:1.5")
SWEEP_PS = ("1", "1.5", "2", "3")
SWEEP_NS = ("1", "2", "3")
SWEEP_SAMPLES = {"symplectic": 1000, "containment": 100_000, "volume": 1_000_000}


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    norm_spec: str = "lq:2"
    p: str = "2"
    n: int = 1
    samples: int = 0
    seed: int = 0
    workers: int = 1
    output: str = "-"
    format: str = "json"
    inflate: float = 1.0
    corrupt: bool = False
    timing: bool = True
    norms: str = ",".join(SWEEP_NORMS)
    ps: str = ",".join(SWEEP_PS)
    ns: str = ",".join(SWEEP_NS)

    def canonical(self) -> str:
        """Argument string that parses back to an equal config."""
        parts = [self.command]
        for f in fields(self):
            if f.name in ("command", "corrupt", "timing"):
                continue
            if self.command != "sweep" and f.name in ("norms", "ps", "ns"):
                continue
            parts += [f"--{f.name.replace('_', '-')}", str(getattr(self, f.name))]
        if self.corrupt:
            parts.append("--corrupt")
        if not self.timing:
            parts.append("--no-timing")
        return shlex.join(parts)

    @classmethod
    def parse(cls, argv) -> "RunConfig":
        if isinstance(argv, str):
            argv = shlex.split(argv)
        ns = build_parser().parse_args(list(argv))
        return config_from_namespace(ns)

    @property
    def exponent(self) -> float:
        return parse_exponent(self.p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psum-embed",
        description="Symplectic embeddings of rescaled p-sums into K x K° and their numerical checks.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--norm", "--norm-spec", dest="norm_spec", default="lq:2",
                        help="norm of K: 'lq:<q>[:w1,...,wn]' (default lq:2)")
    parser.add_argument("--p", default="2", help="exponent in [1, inf]; 'inf' for the product")
    parser.add_argument("--n", type=int, default=1, help="dimension of the x-factor")
    parser.add_argument("--samples", type=int, default=None, help="sample count (command default)")
    parser.add_argument("--seed", type=int, default=None,
                        help=f"base seed (default ${SEED_ENV} or 0)")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--output", default="-", help="output path, '-' for stdout")
    parser.add_argument("--format", choices=("json", "csv", "text"), default=None)
    parser.add_argument("--inflate", type=float, default=1.0,
                        help="verify-containment: scale the source domain (negative control > 1)")
    parser.add_argument("--corrupt", action="store_true",
                        help="scale the fibre image by 1.01 (symplectic negative control)")
    parser.add_argument("--no-timing", dest="timing", action="store_false",
                        help="omit the elapsed field so repeated runs are byte-identical")
    parser.add_argument("--norms", default=",".join(SWEEP_NORMS), help="sweep: norm specs")
    parser.add_argument("--ps", default=",".join(SWEEP_PS), help="sweep: exponents")
    parser.add_argument("--ns", default=",".join(SWEEP_NS), help="sweep: dimensions")
    return parser


def config_from_namespace(ns: argparse.Namespace) -> RunConfig:
    seed = ns.seed
    if seed is None:
        env = os.environ.get(SEED_ENV, "").strip()
        try:
            seed = int(env) if env else 0
        except ValueError:
            raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}") from None
    fmt = ns.format or ("csv" if ns.command == "sweep" else "json")
    samples = DEFAULT_SAMPLES[ns.command] if ns.samples is None else ns.samples
    try:
        p = format_exponent(parse_exponent(ns.p))
    except (DomainError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    if ns.n < 1 or samples < 0 or ns.workers < 1:
        raise UsageError("--n and --workers must be >= 1 and --samples >= 0")
    return RunConfig(command=ns.command, norm_spec=ns.norm_spec, p=p, n=ns.n, samples=samples,
                     seed=seed, workers=ns.workers, output=ns.output, format=fmt,
                     inflate=ns.inflate, corrupt=ns.corrupt, timing=ns.timing,
                     norms=ns.norms, ps=ns.ps, ns=ns.ns)


def _oracle(cfg: RunConfig, spec: str | None = None, n: int | None = None):
    try:
        return parse_norm_spec(spec or cfg.norm_spec, cfg.n if n is None else n)
    except (DomainError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _embedding_for(oracle, p: float, corrupt: bool):
    emb = embedding.psum_embedding(oracle, p)
    return emb.corrupted(1.01) if corrupt else emb


def cell_reports(cfg: RunConfig, spec: str, p: float, n: int, samples: dict) -> list:
    """The three per-cell checks of a sweep, in CSV row order."""
    oracle = _oracle(cfg, spec, n)
    emb = _embedding_for(oracle, p, cfg.corrupt)
    src = embedding.psum_source(oracle, p)
    w = cfg.workers
    return [
        verify.check_symplectic(emb, src, samples["symplectic"], cfg.seed, workers=w),
        verify.check_containment(emb, src, samples["containment"], cfg.seed, workers=w),
        verify.mc_volume(PSumDomain(oracle, p), samples["volume"], cfg.seed, workers=w),
    ]


def execute(cfg: RunConfig, stdin=None) -> tuple[list, str | None]:
    """Run the command; returns the reports, or raw text for ``embed``."""
    cmd = cfg.command
    if cmd == "constants":
        return [verify.report_bounds(cfg.norm_spec, cfg.exponent, cfg.n)], None
    if cmd == "embed":
        return [], _embed_lines(cfg, stdin if stdin is not None else sys.stdin)
    if cmd == "sweep":
        reports = []
        samples = dict(SWEEP_SAMPLES)
        if cfg.samples:
            samples = {k: cfg.samples for k in samples}
        for spec in _split(cfg.norms):
            for p_text in _split(cfg.ps):
                for n_text in _split(cfg.ns):
                    try:
                        p, n = parse_exponent(p_text), int(n_text)
                        reports += cell_reports(cfg, spec, p, n, samples)
                    except Exception as exc:  # record the broken cell, keep sweeping
                        reports.append(verify.VerificationReport(
                            name="cell_error", params={"norm": spec, "p": p_text, "n": n_text},
                            seed=cfg.seed, samples=0, violations=1, status="ERROR",
                            details={"error": f"{type(exc).__name__}: {exc}"}))
        return reports, None

    oracle = _oracle(cfg)
    p = cfg.exponent
    if cmd in ("verify-symplectic", "verify-containment"):
        try:
            emb = _embedding_for(oracle, p, cfg.corrupt)
        except DomainError as exc:
            raise UsageError(str(exc)) from None
        src = embedding.psum_source(oracle, p)
        if cmd == "verify-symplectic":
            rep = verify.check_symplectic(emb, src, cfg.samples, cfg.seed, workers=cfg.workers)
        else:
            rep = verify.check_containment(emb, src, cfg.samples, cfg.seed, inflate=cfg.inflate,
                                           workers=cfg.workers)
        return [rep], None
    if cmd == "volume":
        return [verify.mc_volume(PSumDomain(oracle, p), cfg.samples, cfg.seed,
                                 workers=cfg.workers)], None
    if cmd == "dual-check":
        return [verify.check_dual_gradient(oracle, cfg.samples, cfg.seed)], None
    if cmd == "two-sum-check":
        return [verify.check_two_sum_duality(oracle, cfg.samples, cfg.seed)], None
    if cmd == "jnorm":
        return [verify.j_norm(oracle, restarts=cfg.samples or 32, stream=cfg.seed)], None
    raise UsageError(f"unknown command {cmd!r}")


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _embed_lines(cfg: RunConfig, stream) -> str:
    oracle = _oracle(cfg)
    p = cfg.exponent
    out = []
    for lineno, line in enumerate(stream, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            vals = np.array([float(v) for v in line.split(",")])
        except ValueError:
            raise UsageError(f"line {lineno}: not a comma-separated list of numbers") from None
        if vals.size != 2 * cfg.n:
            raise UsageError(f"line {lineno}: expected {2 * cfg.n} values, got {vals.size}")
        z = embedding.PhasePoint(vals[: cfg.n], vals[cfg.n:])
        try:
            img = embedding.embed_psum(oracle, p, z)
        except DomainError as exc:
            raise UsageError(f"line {lineno}: {exc}") from None
        out.append(",".join(format(float(v), ".17g") for v in img.as_array()))
    return "\n".join(out) + ("\n" if out else "")


def render(reports: list, fmt: str, timing: bool = True) -> str:
    if fmt == "json":
        if len(reports) == 1:
            return reports[0].to_json(timing) + "\n"
        return "[\n" + ",\n".join(r.to_json(timing) for r in reports) + "\n]\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(verify.CSV_FIELDS)
        for r in reports:
            w.writerow(verify.csv_row(r))
        return buf.getvalue()
    return "".join(r.summary() + "\n" for r in reports)


def run(cfg: RunConfig, stdin=None, stdout=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    reports, text = execute(cfg, stdin)
    if text is None:
        text = render(reports, cfg.format, cfg.timing)
    if cfg.output == "-":
        stdout.write(text)
    else:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0 if all(r.passed for r in reports) else 1


def main(argv=None) -> int:
    try:
        cfg = RunConfig.parse(sys.argv[1:] if argv is None else argv)
        return run(cfg)
    except SystemExit as exc:  # argparse already printed its message
        return int(exc.code or 0) if exc.code in (0, 2) else 2
    except UsageError as exc:
        print(f"psum-embed: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
