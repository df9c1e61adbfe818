"""Command line surface.

Subcommands: ``cp``, ``train``, ``compose``, ``run``, ``classify``,
``oracle``, ``render``.  Exit codes are stable: 0 ok, 2 bad environment or
input, 3 training did not converge, 4 missing library task, 5 the requested
walk did not terminate (the report is still written).

Library layout: one ``<key>.qtab`` per trained task inside the directory
given by ``--lib`` or the ``TASKALG_LIB`` environment variable.  Safety
stacks trained with ``--k`` live in ``<key>.safety.qtab``.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

from . import io as tio
from .algebra import (
    KEY_EMPTY,
    KEY_UPPER,
    TaskLibrary,
    compile_formula,
    negated_key,
)
from .errors import (
    EnvironmentDisconnected,
    IncompatibleTables,
    InvalidEnvironment,
    MissingTask,
    NegationUnavailable,
    ParseError,
)
from .formula import Not, Prop, Semantics, TaskSpec, parse, props_of, render, to_nnf
from .mdp import LabeledMdp
from .penalty import (
    BoundarySpec,
    NegatedSpec,
    PenaltyConfig,
    PositiveSpec,
    derive_penalty_multiplier,
)
from .planner import (
    ExtendedQ,
    extract_policy,
    policy_arrows,
    value_iterate,
    value_iterate_safety,
)
from .runtime import classify, rollout, score, transcript

EXIT_OK = 0
EXIT_ENV = 2
EXIT_CONVERGENCE = 3
EXIT_MISSING_TASK = 4
EXIT_NONTERMINATING = 5


@dataclass
class RunConfig:
    """Parsed command inputs shared by the training and rollout commands."""

    env: Path
    task: str | None = None
    semantics: Semantics = Semantics.MINIMUM_VIOLATION
    r_step: float = -0.1
    r_goal: float = 2.0
    c_p: int | None = None
    k: int | None = None
    start: tuple[int, int] | None = None
    max_steps: int | None = None
    out_format: str = "text"
    lib: Path | None = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        lib = getattr(args, "lib", None) or os.environ.get("TASKALG_LIB")
        start = None
        if getattr(args, "start", None):
            x, y = args.start.split(",")
            start = (int(x), int(y))
        return cls(
            env=Path(args.env),
            task=getattr(args, "task", None),
            semantics=Semantics(getattr(args, "semantics", "min-violation")),
            r_step=getattr(args, "r_step", -0.1),
            r_goal=getattr(args, "r_goal", 2.0),
            c_p=getattr(args, "cp", None),
            k=getattr(args, "k", None),
            start=start,
            max_steps=getattr(args, "max_steps", None),
            out_format=getattr(args, "format", "text"),
            lib=Path(lib) if lib else None,
        )

    def penalty_config(self, mdp: LabeledMdp) -> PenaltyConfig:
        c_p = self.c_p if self.c_p is not None else derive_penalty_multiplier(mdp).c_p
        return PenaltyConfig(c_p=c_p, r_step=self.r_step, r_goal=self.r_goal)


def _spec_for_key(key: str, config: PenaltyConfig):
    if key == KEY_UPPER:
        return BoundarySpec(config=config, upper=True)
    if key == KEY_EMPTY:
        return BoundarySpec(config=config, upper=False)
    if key.startswith("not-"):
        props = frozenset(key[4:].split(","))
        if not all(p.isidentifier() for p in props):
            raise ParseError(f"bad task key {key!r}", 0)
        return NegatedSpec(config=config, avoid=props)
    return PositiveSpec(config=config, formula=parse(key))


def _required_keys(task: TaskSpec) -> list[str]:
    keys: list[str] = []
    if task.semantics is Semantics.MINIMUM_VIOLATION:
        keys.extend(sorted(props_of(task.formula)))
        keys.extend([KEY_UPPER, KEY_EMPTY])
        return keys
    nnf = to_nnf(task.formula)

    def walk(node):
        if isinstance(node, Prop):
            keys.append(node.name)
        elif isinstance(node, Not):
            keys.append(negated_key((node.child.name,)))
        else:
            walk(node.left)
            walk(node.right)

    walk(nnf)
    seen = set()
    return [k for k in keys if not (k in seen or seen.add(k))]


def _load_library(
    config: RunConfig, mdp: LabeledMdp, task: TaskSpec, g_ok: frozenset[int] | None
) -> TaskLibrary:
    if config.lib is None:
        raise MissingTask("(no library directory; set --lib or TASKALG_LIB)")
    keys = _required_keys(task)
    # A pre-trained bundle covering all negated literals replaces them.
    neg_keys = [k for k in keys if k.startswith("not-")]
    if len(neg_keys) >= 2:
        bundle = negated_key(sorted(k[4:] for k in neg_keys))
        if (config.lib / f"{bundle}.qtab").exists():
            keys = [k for k in keys if not k.startswith("not-")] + [bundle]
    lib = None
    for key in keys:
        if g_ok is not None:
            path = config.lib / f"{key}.safety.qtab"
            if not path.exists():
                raise MissingTask(f"{key} (safety stack)")
            first = tio.read_qtable_meta(path)
            cfg = tio._config_from_doc(first["config"])
            stack = tio.load_safety_qtable(path, _spec_for_key(key, cfg), mdp)
            table = stack.slice(g_ok)
        else:
            path = config.lib / f"{key}.qtab"
            if not path.exists():
                raise MissingTask(key)
            table = tio.load_qtable(path, mdp)
        if lib is None:
            lib = TaskLibrary(config=table.config, fingerprint=table.fingerprint)
        lib.add(key, table)
    assert lib is not None
    return lib


def cmd_cp(args: argparse.Namespace) -> int:
    mdp = tio.load_env(args.env)
    d = derive_penalty_multiplier(mdp)
    print(
        f"C_p = {d.c_p} (longest constrained path: region {d.g1} -> region {d.g2}, "
        f"literal {d.literal}, length {d.length})"
    )
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = RunConfig.from_args(args)
    mdp = tio.load_env(config.env)
    pcfg = config.penalty_config(mdp)
    spec = _spec_for_key(args.task, pcfg)
    out = Path(args.out) if args.out else (config.lib or Path(".")) / f"{args.task}.qtab"
    out.parent.mkdir(parents=True, exist_ok=True)

    if config.k is not None and config.k > 0:
        stack = value_iterate_safety(mdp, spec, k=config.k, max_sweeps=args.max_sweeps)
        path = out.with_suffix(".qtab").with_name(f"{args.task}.safety.qtab")
        tio.save_safety_qtable(stack, path)
        print(f"wrote {path} ({len(stack.subsets)} slices)")
        return EXIT_OK

    table = value_iterate(mdp, spec, max_sweeps=args.max_sweeps)
    tio.save_qtable(table, out, task={"key": args.task, "semantics": args.semantics})
    status = "converged" if table.converged else "did NOT converge"
    print(f"wrote {out} ({status} after {table.sweeps} sweeps, residual {table.residual:g})")
    return EXIT_OK if table.converged else EXIT_CONVERGENCE


def cmd_compose(args: argparse.Namespace) -> int:
    config = RunConfig.from_args(args)
    mdp = tio.load_env(config.env)
    task = TaskSpec.build(parse(args.task), config.semantics)
    g_ok = None
    if getattr(args, "g_ok", None):
        g_ok = frozenset(int(t) for t in args.g_ok.split(",") if t != "")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        lib = _load_library(config, mdp, task, g_ok)
        composed = compile_formula(task, lib)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = Path(args.out) if args.out else Path("composed.qtab")
    tio.save_qtable(
        composed,
        out,
        task={"formula": render(task.formula), "semantics": task.semantics.value},
    )
    print(f"wrote {out}")
    return EXIT_OK


def _resolve_table(args, config: RunConfig, mdp: LabeledMdp) -> tuple[ExtendedQ, TaskSpec]:
    """``--task`` is either a container path or a formula to compose."""
    candidate = Path(args.task)
    if candidate.exists():
        table = tio.load_qtable(candidate, mdp)
        meta = tio.read_qtable_meta(candidate)
        info = meta.get("task") or {}
        if "formula" in info:
            task = TaskSpec.build(parse(info["formula"]), Semantics(info["semantics"]))
        elif "key" in info and info["key"].startswith("not-"):
            props = info["key"][4:].split(",")
            text = " & ".join("!" + p for p in props)
            task = TaskSpec.build(parse(text), Semantics.PRIORITIZED_SAFETY)
        elif "key" in info and info["key"] not in (KEY_UPPER, KEY_EMPTY):
            task = TaskSpec.build(parse(info["key"]), Semantics(info.get("semantics", "min-violation")))
        else:
            raise InvalidEnvironment(f"{candidate}: container carries no task formula")
        return table, task
    task = TaskSpec.build(parse(args.task), config.semantics)
    lib = _load_library(config, mdp, task, None)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        composed = compile_formula(task, lib)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return composed, task


def cmd_run(args: argparse.Namespace) -> int:
    config = RunConfig.from_args(args)
    mdp = tio.load_env(config.env)
    table, task = _resolve_table(args, config, mdp)
    start = config.start or mdp.start
    if start is None:
        raise InvalidEnvironment("no start cell: pass --start or set one in the file")
    if not mdp.in_bounds(start):
        raise InvalidEnvironment(f"start cell {start} out of bounds")
    policy = extract_policy(table, mdp)
    max_steps = config.max_steps or max(table.config.c_p**2, 2 * mdp.n_cells)
    report = rollout(mdp, policy, start, max_steps=max_steps)
    report = classify(report, task, mdp)
    if report.terminated and table.spec is not None:
        score(report, table.spec, mdp)

    for line in transcript(report, mdp, table.spec):
        print(line)
    print(f"class: {report.path_class.value}")
    if args.out:
        tio.save_report(report, mdp, args.out)
        print(f"report written to {args.out}")
    return EXIT_OK if report.terminated else EXIT_NONTERMINATING


def cmd_classify(args: argparse.Namespace) -> int:
    config = RunConfig.from_args(args)
    mdp = tio.load_env(config.env)
    task = TaskSpec.build(parse(args.task), config.semantics)
    report = tio.load_report(args.report, mdp)
    report = classify(report, task, mdp)
    print(f"class: {report.path_class.value}")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    from .oracle import min_violation_path

    config = RunConfig.from_args(args)
    mdp = tio.load_env(config.env)
    task = TaskSpec.build(parse(args.task), config.semantics)
    start = config.start or mdp.start
    if start is None:
        raise InvalidEnvironment("no start cell: pass --start or set one in the file")
    result = min_violation_path(mdp, start, task.formula, avoid=task.avoid)
    if not result.feasible:
        print("feasible: no")
        return EXIT_OK
    labels = ["{" + ",".join(sorted(e)) + "}" for _, e in result.witness.steps if e]
    print(
        f"feasible: yes  min_violations: {result.min_violations}  "
        f"min_steps: {result.min_steps}  emissions: {' '.join(labels) or '(none)'}"
    )
    return EXIT_OK


def _render_svg(mdp: LabeledMdp, policy, table: ExtendedQ, path: Path) -> None:
    cell = 40
    w, h = mdp.width * cell, mdp.height * cell
    values = table.state_values().max(axis=1)
    lo, hi = float(values.min()), float(values.max())
    span = (hi - lo) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">'
    ]
    glyph_delta = {0: (0, -12), 1: (0, 12), 2: (-12, 0), 3: (12, 0)}
    for y in range(mdp.height):
        for x in range(mdp.width):
            idx = mdp.cell_index((x, y))
            px, py = x * cell, (mdp.height - 1 - y) * cell
            t = (float(values[idx]) - lo) / span
            shade = int(235 - 120 * t)
            green = int(235 - 40 * (1 - t))
            parts.append(
                f'<rect x="{px}" y="{py}" width="{cell}" height="{cell}" '
                f'fill="rgb({shade},{green},{shade})" stroke="gray"/>'
            )
            lbl = ",".join(sorted(mdp.label((x, y))))
            if lbl:
                parts.append(
                    f'<text x="{px + 3}" y="{py + 12}" font-size="9">{lbl}</text>'
                )
            a = int(policy.per_cell[idx])
            cx, cy = px + cell // 2, py + cell // 2
            if a == 4:
                parts.append(f'<circle cx="{cx}" cy="{cy}" r="4" fill="black"/>')
            else:
                dx, dy = glyph_delta[a]
                parts.append(
                    f'<line x1="{cx - dx}" y1="{cy - dy}" x2="{cx + dx}" y2="{cy + dy}" '
                    f'stroke="black" marker-end="url(#ah)"/>'
                )
    parts.insert(
        1,
        '<defs><marker id="ah" markerWidth="6" markerHeight="6" refX="5" refY="3" '
        'orient="auto"><path d="M0,0 L6,3 L0,6 z"/></marker></defs>',
    )
    parts.append("</svg>")
    path.write_text("\n".join(parts))


def cmd_render(args: argparse.Namespace) -> int:
    mdp = tio.load_env(args.env)
    if args.table:
        table = tio.load_qtable(args.table, mdp)
        policy = extract_policy(table, mdp)
        if args.format == "svg":
            out = Path(args.out or "policy.svg")
            _render_svg(mdp, policy, table, out)
            print(f"wrote {out}")
            return EXIT_OK
        for row in policy_arrows(policy):
            print(row)
        return EXIT_OK
    report = tio.load_report(args.report, mdp)
    visited = {}
    for i, (cell, _) in enumerate(report.execution.steps):
        visited.setdefault(cell, i)
    digits = "0123456789abcdefghijklmnopqrstuvwxyz"
    for y in range(mdp.height - 1, -1, -1):
        row = []
        for x in range(mdp.width):
            if (x, y) in visited:
                row.append(digits[visited[(x, y)] % len(digits)])
            elif mdp.label((x, y)):
                row.append("#")
            else:
                row.append(".")
        print(" ".join(row))
    print("cells marked in visit order; # labeled, . empty")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taskalg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, task_help: str, with_task: bool = True):
        p.add_argument("--env", required=True, help="environment YAML file")
        if with_task:
            p.add_argument("--task", required=True, help=task_help)
        p.add_argument(
            "--semantics",
            choices=[s.value for s in Semantics],
            default="min-violation",
        )
        p.add_argument("--r-step", type=float, default=-0.1, dest="r_step")
        p.add_argument("--r-goal", type=float, default=2.0, dest="r_goal")
        p.add_argument("--cp", type=int, default=None, help="override the derived multiplier")
        p.add_argument("--lib", default=None, help="library directory (or $TASKALG_LIB)")

    p = sub.add_parser("cp", help="print the derived penalty multiplier")
    p.add_argument("--env", required=True)
    p.set_defaults(func=cmd_cp)

    p = sub.add_parser("train", help="value-iterate one task table")
    common(p, "task key: a proposition, not-p, not-p,q, U or EMPTY")
    p.add_argument("--k", type=int, default=None, help="also train pass-through slices up to size k")
    p.add_argument("--max-sweeps", type=int, default=None, dest="max_sweeps")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compose", help="compose a formula from trained tables")
    common(p, "Boolean formula over propositions")
    p.add_argument("--g-ok", default=None, dest="g_ok", help="comma-separated region ids; compose safety slices")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("run", help="roll out a table or formula and classify the walk")
    common(p, "formula, or path to a .qtab container")
    p.add_argument("--start", default=None, help="start cell as x,y")
    p.add_argument("--max-steps", type=int, default=None, dest="max_steps")
    p.add_argument("--out", default=None, help="write the report YAML here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("classify", help="classify a stored report")
    common(p, "task formula the walk is judged against")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("oracle", help="minimum-violation ground truth for a start cell")
    common(p, "task formula")
    p.add_argument("--start", default=None, help="start cell as x,y")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("render", help="draw a policy or a stored walk")
    p.add_argument("--env", required=True)
    p.add_argument("--table", default=None)
    p.add_argument("--report", default=None)
    p.add_argument("--format", choices=["text", "structured", "svg"], default="text")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_render)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidEnvironment, EnvironmentDisconnected, IncompatibleTables, ParseError, NegationUnavailable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except MissingTask as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_TASK


if __name__ == "__main__":
    sys.exit(main())
