"""Command-line front end.

Exit codes: 0 equivalent / holds / ok, 1 not equivalent / fails,
2 parse, semantic or input error, 3 resource limit exceeded.
"""
from __future__ import annotations

import json
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import click

from .config import Limits, RunConfig
from .terms import TermError

EXIT_OK, EXIT_DIFFERENT, EXIT_ERROR, EXIT_LIMIT = 0, 1, 2, 3


class _Abort(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _is_limit(exc: Exception) -> bool:
    from .rewriter import StepLimitExceeded
    from .semantics import StateCapExceeded, StepTooLarge
    return isinstance(exc, (StateCapExceeded, StepLimitExceeded, StepTooLarge, RecursionError))


def _run(fn):
    """Map library exceptions onto the exit-code contract."""
    try:
        return fn()
    except _Abort as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.code
    except Exception as exc:  # noqa: BLE001 - every failure needs an exit code
        if _is_limit(exc):
            click.echo(f"resource limit: {exc}", err=True)
            return EXIT_LIMIT
        if isinstance(exc, (TermError, ValueError, OSError, UnicodeDecodeError)):
            click.echo(f"error: {exc}", err=True)
            return EXIT_ERROR
        raise


def _emit(cfg: RunConfig, text: str, data: dict):
    if cfg.json:
        click.echo(json.dumps(data, sort_keys=True, ensure_ascii=False))
    else:
        click.echo(text)


def _load(path: str):
    from .parser import parse_spec_file
    try:
        src = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise _Abort(EXIT_ERROR, f"no such file: {path}") from None
    return parse_spec_file(src)


def _root(spec, path: str):
    if spec.root is None:
        raise _Abort(EXIT_ERROR, f"{path} has no root term")
    return spec.root


def _frac(text: str) -> Fraction:
    from .parser import parse_probability
    return parse_probability(text)


def _exit(code: int):
    sys.exit(code)


@click.group()
@click.option("--json", "as_json", is_flag=True, help="Structured JSON output.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for randomized commands.")
@click.pass_context
def main(ctx, as_json, seed):
    """Probabilistic true-concurrency process algebra workbench."""
    try:
        limits = Limits.from_env()
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_ERROR)
    ctx.obj = RunConfig(command=ctx.invoked_subcommand or "", limits=limits, seed=seed, json=as_json)


@main.command()
@click.argument("file")
@click.pass_obj
def fmt(cfg, file):
    """Parse FILE and print it in canonical form."""
    from .parser import format_spec_file

    def go():
        spec = _load(file)
        text = format_spec_file(spec)
        _emit(cfg, text.rstrip("\n"), {"text": text, "warnings": spec.warnings})
        return EXIT_OK
    _exit(_run(go))


@main.command()
@click.argument("file")
@click.option("--trace", is_flag=True, help="Print every rewrite step.")
@click.pass_obj
def normalize(cfg, file, trace):
    """Rewrite the root term of FILE to a basic term."""
    from .parser import pretty_print
    from .rewriter import is_basic_term
    from .rewriter import normalize as do_normalize

    def go():
        spec = _load(file)
        nf, tr = do_normalize(_root(spec, file), spec.algebra, spec.data_env, limits=cfg.limits)
        lines = [pretty_print(nf)]
        if trace:
            lines.append(tr.export().rstrip("\n"))
        _emit(cfg, "\n".join(lines), {"normal_form": pretty_print(nf), "basic": is_basic_term(nf),
                                      "steps": len(tr.steps),
                                      "trace": tr.export().splitlines() if trace else None})
        return EXIT_OK
    _exit(_run(go))


@main.command()
@click.argument("file")
@click.option("-o", "--output", required=True, help="Where to write the transition system.")
@click.option("--max-states", type=int, default=None)
@click.option("--unfold", type=int, default=None)
@click.pass_obj
def lts(cfg, file, output, max_states, unfold):
    """Build the transition system of FILE's root and export it in .aut form."""
    from .semantics import build_plts

    def go():
        limits = cfg.limits
        if max_states is not None:
            limits = replace(limits, max_states=max_states)
        if unfold is not None:
            limits = replace(limits, unfold=unfold)
        spec = _load(file)
        sys_ = build_plts(_root(spec, file), spec.algebra, spec.recspec, spec.data_env, limits)
        Path(output).write_text(sys_.export(), encoding="utf-8")
        _emit(cfg, f"{sys_.n_states} states, {sys_.n_transitions} transitions -> {output}",
              {"states": sys_.n_states, "transitions": sys_.n_transitions, "output": output})
        return EXIT_OK
    _exit(_run(go))


@main.command()
@click.argument("file_a")
@click.argument("file_b")
@click.option("--rel", "relation", default="pstep", show_default=True,
              type=click.Choice(["pstep", "ppomset", "php", "phhp", "prbstep", "pbstep"]))
@click.option("--max-pomset", type=int, default=None)
@click.pass_obj
def equiv(cfg, file_a, file_b, relation, max_pomset):
    """Decide whether the roots of FILE_A and FILE_B are equivalent."""
    from .equivalence import check
    from .semantics import build_plts

    def go():
        systems = []
        for f in (file_a, file_b):
            spec = _load(f)
            systems.append(build_plts(_root(spec, f), spec.algebra, spec.recspec, spec.data_env, cfg.limits))
        v = check(*systems, relation, max_pomset=max_pomset or cfg.limits.max_pomset,
                  max_events=cfg.limits.max_events)
        _emit(cfg, v.report(), json.loads(v.to_json()))
        return EXIT_OK if v.equivalent else EXIT_DIFFERENT
    _exit(_run(go))


@main.command()
@click.argument("file")
@click.option("--derivation", default=None, help="Proof file to check against the rule schemas.")
@click.pass_obj
def hoare(cfg, file, derivation):
    """Check the triples declared in FILE, or a derivation tree for them."""
    from .hoare import (HoareError, check_derivation, check_sufficient_determinism,
                        check_triple_by_equivalence, parse_proof, triple_counterexample)
    from .parser import pretty_guard, pretty_print

    def go():
        spec = _load(file)
        if derivation is not None:
            try:
                src = Path(derivation).read_text(encoding="utf-8")
            except FileNotFoundError:
                raise _Abort(EXIT_ERROR, f"no such file: {derivation}") from None
            node = parse_proof(src, spec)
            try:
                check_derivation(node, spec)
            except HoareError as exc:
                _emit(cfg, f"derivation rejected: {exc}", {"valid": False, "reason": str(exc)})
                return EXIT_DIFFERENT
            _emit(cfg, f"derivation valid (rules: {', '.join(sorted(node.rules_used()))})",
                  {"valid": True, "rules": sorted(node.rules_used())})
            return EXIT_OK
        if not spec.triples:
            raise _Abort(EXIT_ERROR, f"{file} declares no hoare triples")
        lines, rows, ok = [], [], True
        for tr in spec.triples:
            cex = triple_counterexample(tr, spec, cfg.limits)
            by_eq = check_triple_by_equivalence(tr, spec, limits=cfg.limits)
            ok &= cex is None
            shown = f"{{{pretty_guard(tr.pre)}}} {pretty_print(tr.program)} {{{pretty_guard(tr.post)}}}"
            lines.append(f"{'holds' if cex is None else 'FAILS'}: {shown}"
                         + ("" if cex is None else f"  (from {cex[0]} reaching {cex[1]})")
                         + ("" if by_eq == (cex is None) else "  [equivalence reading disagrees]"))
            rows.append({"triple": shown, "holds": cex is None, "equivalence_reading": by_eq,
                         "counterexample": None if cex is None else list(cex)})
        det = None
        if spec.root is not None:
            det = check_sufficient_determinism(spec, limits=cfg.limits)
            lines.append(det.text())
        _emit(cfg, "\n".join(lines), {"triples": rows,
                                      "deterministic": None if det is None else det.deterministic})
        return EXIT_OK if ok else EXIT_DIFFERENT
    _exit(_run(go))


@main.command()
@click.option("--seed", type=int, default=None, help="Overrides the global seed.")
@click.option("--count", type=int, default=50, show_default=True, help="Instances per axiom.")
@click.option("--only", multiple=True, help="Restrict to these axioms.")
@click.option("--mutate", multiple=True, hidden=True)
@click.pass_obj
def axioms(cfg, seed, count, only, mutate):
    """Check every axiom on random closed instances."""
    from .axioms import run_suite

    def go():
        rep = run_suite(cfg.seed if seed is None else seed, count, names=set(only) or None,
                        mutate=mutate, limits=cfg.limits)
        _emit(cfg, rep.text(), rep.to_dict())
        return EXIT_OK if rep.all_passed else EXIT_DIFFERENT
    _exit(_run(go))


@main.command()
@click.option("--loss", default="1/2", show_default=True)
@click.option("--dup", default="0", show_default=True)
@click.option("--cap", "capacity", type=click.IntRange(1, 2), default=1, show_default=True)
@click.option("--depth", type=int, default=6, show_default=True)
@click.option("--no-hide", is_flag=True, help="Keep internal actions visible.")
@click.option("--no-branching", is_flag=True, help="Skip the branching bisimulation check.")
@click.pass_obj
def abp(cfg, loss, dup, capacity, depth, no_hide, no_branching):
    """Alternating-bit protocol against the two-place buffer."""
    from .abp import run_abp

    def go():
        rep = run_abp(_frac(loss), Fraction(dup), capacity, hide=not no_hide, depth=depth,
                      branching=not no_branching, limits=cfg.limits)
        _emit(cfg, rep.text(), rep.to_dict())
        return EXIT_OK if rep.traces_equal else EXIT_DIFFERENT
    _exit(_run(go))


@main.command()
@click.argument("file")
@click.argument("n", type=click.IntRange(1))
@click.pass_obj
def pi(cfg, file, n):
    """Projection of FILE's root to depth N, as a basic term."""
    from .parser import pretty_print
    from .rewriter import project_rewrite

    def go():
        spec = _load(file)
        t = project_rewrite(_root(spec, file), n, spec.algebra, spec.recspec, spec.data_env, cfg.limits)
        _emit(cfg, pretty_print(t), {"depth": n, "projection": pretty_print(t)})
        return EXIT_OK
    _exit(_run(go))


if __name__ == "__main__":
    main()
