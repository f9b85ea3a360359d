"""Command line entry point.

Exit status: 0 success, 1 property violation (not an SSP, not live, refused
script), 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from . import pnio
from .errors import NetError, ParseError, SupervisorError
from .petri import DEFAULT_NODE_BUDGET

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


@dataclass
class PipelineConfig:
    input: Path
    budget: int = DEFAULT_NODE_BUDGET
    seed: int = 0
    policy: str = "random"
    reduce: bool = False
    out: Path | None = None

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not -(2**63) <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


def _load(cfg: PipelineConfig):
    doc = pnio.load_net(cfg.input)
    if cfg.reduce:
        from .ssp import preprocess_reductions

        doc = preprocess_reductions(doc)
    return doc


def _emit(cfg, stem, text):
    """Print ``text`` and, with ``--out``, also write it to ``<out>/<stem>``."""
    sys.stdout.write(text)
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / stem).write_text(text, encoding="utf-8")


def _write(cfg, stem, text):
    if cfg.out is None:
        sys.stdout.write(text)
        return None
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / stem
    path.write_text(text, encoding="utf-8")
    return path


def _name(doc):
    return doc.net.name


def cmd_validate(cfg) -> int:
    from .ssp import validate_ssp

    doc = _load(cfg)
    rep = validate_ssp(doc)
    _emit(cfg, f"{_name(doc)}_validate.txt", pnio.emit_report({"ssp": rep.as_sections()}))
    return EXIT_OK if rep.ok else EXIT_VIOLATION


def cmd_semiflows(cfg) -> int:
    from .semiflows import minimal_p_semiflows
    from .ssp import named_semiflows

    doc = _load(cfg)
    lines = ["[t_semiflows]"]
    for name, scope, x in named_semiflows(doc):
        lines.append(f"{name} = {x}")
        lines.append(f"{name}_scope = {scope}")
    lines.append("")
    lines.append("[p_semiflows]")
    for k, y in enumerate(minimal_p_semiflows(doc.net), 1):
        lines.append(f"y{k} = {y}")
    _emit(cfg, f"{_name(doc)}_semiflows.txt", "\n".join(lines) + "\n")
    return EXIT_OK


def _require_ssp(doc):
    from .ssp import validate_ssp

    rep = validate_ssp(doc)
    if not rep.ok:
        sys.stderr.write(pnio.emit_report({"ssp": rep.as_sections()}))
        return False
    return True


def _control_doc(cn):
    return pnio.NetDocument(cn.net, cn.m0, None, {})


def cmd_synthesize(cfg) -> int:
    from .control import build_control_pn, classify_subnets, simplify_control_pn

    doc = _load(cfg)
    if not _require_ssp(doc):
        return EXIT_VIOLATION
    cn = build_control_pn(doc)
    scn = simplify_control_pn(cn)
    classes = classify_subnets(scn)
    path = _write(cfg, f"{_name(doc)}_control.net", pnio.serialize_net(_control_doc(cn)))
    if cfg.out is not None:
        (cfg.out / f"{_name(doc)}_simplified.dot").write_text(pnio.export_dot(scn.net, scn.m0))
    sec = {"control_net": str(path) if path else "stdout", "subnets": len(classes)}
    for k, c in enumerate(classes, 1):
        sec[f"subnet_{k}"] = ", ".join(c["transitions"])
        sec[f"subnet_{k}_cf"] = c["CF"]
        sec[f"subnet_{k}_jf"] = c["JF"]
    sec["structurally_live"] = all(c["structurally_live"] for c in classes)
    sys.stdout.write(pnio.emit_report({"synthesis": sec}))
    return EXIT_OK


def cmd_enforce(cfg) -> int:
    from .supervisor import synthesize

    doc = _load(cfg)
    if not _require_ssp(doc):
        return EXIT_VIOLATION
    syn = synthesize(doc, cfg.budget)
    path = _write(cfg, f"{_name(doc)}_enforced.net", pnio.serialize_net(_control_doc(syn.control)))
    sec = {"control_net": str(path) if path else "stdout"}
    for k, res in sorted(syn.enforcements.items()):
        tag = f"subnet_{k + 1}"
        sec[f"{tag}_checks"] = ", ".join(
            c.transition + (f" ({'+'.join(c.members)})" if c.virtual else "") for c in res.checks.checks
        )
        for p, n in res.added_marking().items():
            sec[f"{tag}_{p}"] = n
    sec["added_places"] = ", ".join(syn.control.extra_places) or "none"
    sys.stdout.write(pnio.emit_report({"enforcement": sec}))
    return EXIT_OK


def cmd_compose(cfg) -> int:
    from .supervisor import compose, synthesize

    doc = _load(cfg)
    if not _require_ssp(doc):
        return EXIT_VIOLATION
    syn = synthesize(doc, cfg.budget)
    composed = compose(doc, syn.control)
    _write(cfg, f"{_name(doc)}_composed.net", pnio.serialize_net(composed))
    if cfg.out is not None:
        (cfg.out / f"{_name(doc)}_composed.dot").write_text(
            pnio.export_dot(composed.net, composed.initial_marking)
        )
    return EXIT_OK


def cmd_simulate(cfg, steps) -> int:
    from .analysis import census_items
    from .supervisor import format_trace, parse_script, run, synthesize

    doc = _load(cfg)
    if not _require_ssp(doc):
        return EXIT_VIOLATION
    syn = synthesize(doc, cfg.budget)
    policy = cfg.policy
    if policy.startswith("script:"):
        policy = parse_script(Path(policy[len("script:"):]).read_text())
    elif policy not in ("random", "exhaustive"):
        raise ValueError(f"unknown policy {policy!r}")
    res = run(doc, syn.control, policy, steps=steps, seed=cfg.seed, node_budget=cfg.budget)
    if res.census is not None:
        _emit(cfg, f"{_name(doc)}_joint.txt", pnio.emit_report({"joint": census_items(res.census)}))
    else:
        _emit(cfg, f"{_name(doc)}_trace.txt", format_trace(res.trace))
        if res.verdict != "running":
            extra = f" at script step {res.blocked_at}" if res.blocked_at is not None else ""
            sys.stderr.write(f"run {res.verdict}{extra}\n")
    return EXIT_OK if res.verdict in ("running", "live") else EXIT_VIOLATION


def cmd_census(cfg) -> int:
    from .analysis import full_pipeline_census
    from .plotting import census_figure

    doc = _load(cfg)
    if not _require_ssp(doc):
        return EXIT_VIOLATION
    sections = full_pipeline_census(doc, cfg.budget)
    _emit(cfg, f"{_name(doc)}_census.txt", pnio.emit_report(sections))
    if cfg.out is not None:
        census_figure(sections, cfg.out / f"{_name(doc)}_census.png", title=_name(doc))
    return EXIT_OK if int(sections["supervised"]["livelock"]) == 0 else EXIT_VIOLATION


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", type=Path, help="net file")
    common.add_argument("--budget", type=int, default=DEFAULT_NODE_BUDGET, help="reachability node budget")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--policy", default="random", help="random | exhaustive | script:<file>")
    common.add_argument("--reduce", action="store_true", help="apply net reductions first")
    common.add_argument("--out", type=Path, help="directory for written artifacts")

    p = argparse.ArgumentParser(prog="ssplive", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("validate", "check SSP class membership"),
        ("semiflows", "list minimal T- and P-semiflows"),
        ("synthesize", "build the control net and run the CF/JF test"),
        ("enforce", "control net with liveness enforcement applied"),
        ("compose", "synchronous composition of plant and control net"),
        ("census", "reachability census of plant, monitor baseline and supervised net"),
    ]:
        sub.add_parser(name, parents=[common], help=help_)
    sim = sub.add_parser("simulate", parents=[common], help="run the supervised system")
    sim.add_argument("--steps", type=int, default=100)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = PipelineConfig(args.file, args.budget, args.seed, args.policy, args.reduce, args.out)
        if args.command == "simulate":
            if args.steps < 0:
                raise ValueError("steps must be >= 0")
            return cmd_simulate(cfg, args.steps)
        return globals()[f"cmd_{args.command}"](cfg)
    except (ParseError, ValueError, OSError) as exc:
        sys.stderr.write(f"ssplive {args.command}: {exc}\n")
        return EXIT_USAGE
    except SupervisorError as exc:
        sys.stderr.write(f"ssplive {args.command}: {exc}\n")
        return EXIT_VIOLATION
    except NetError as exc:
        sys.stderr.write(f"ssplive {args.command}: {type(exc).__name__}: {exc}\n")
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
