"""Command-line front end.

Every command prints one JSON report on stdout (or CSV rows for sweeps).
Exit codes: 0 ok, 1 failed check or internal error, 2 bad input or
configuration, 3 resource cap exceeded, 4 rank undecided. Nothing is
written to stdout when the exit code is 2 or more.

Caps can be overridden with the environment variables
``SCHREIERLAB_UNIVERSE_CAP``, ``SCHREIERLAB_SUPPORT_CAP`` and
``SCHREIERLAB_SET_CAP``; explicit flags win.
"""
from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from . import families as fam
from . import spreading as spr
from .norms import ConfigError, NormError, WitnessError, evaluate, norm_from_json
from .ordinal import Ordinal, OrdinalError
from .suites import SUITES, run_suite
from .vectors import FLOAT, RATIONAL, Vector, basis_vector, scalar_to_json

log = logging.getLogger("schreierlab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RESOURCE, EXIT_UNDECIDED = 0, 1, 2, 3, 4


class UsageError(Exception):
    """Bad input detected by the front end itself."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{name} must be an integer, got {raw!r}") from None


def _caps(args) -> dict:
    return {
        "universe": args.universe_cap if args.universe_cap is not None
        else _env_int("SCHREIERLAB_UNIVERSE_CAP", fam.DEFAULT_UNIVERSE_CAP),
        "support": args.support_cap if args.support_cap is not None
        else _env_int("SCHREIERLAB_SUPPORT_CAP", 64),
        "set_size": args.set_cap if args.set_cap is not None
        else _env_int("SCHREIERLAB_SET_CAP", spr.DEFAULT_SET_CAP),
    }


# -- input files -----------------------------------------------------------------

def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def _vector(data, mode: str) -> Vector:
    """Accepts ``{"entries": [[i, v], ...]}`` or a plain ``{"i": v}`` mapping."""
    if isinstance(data, dict) and "entries" in data:
        return Vector.from_json(data, mode)
    if isinstance(data, dict):
        return Vector.from_mapping(data, mode)
    raise UsageError("a vector must be a JSON object")


def _load_norm(path: str):
    base = Path(path).parent

    def loader(ref):
        return fam.load_family(base / ref)[0]

    return norm_from_json(_read_json(path), loader)


def _parse_set(text: str) -> List[int]:
    text = text.strip().strip("{}")
    if not text:
        return []
    try:
        return [int(s) for s in text.split(",")]
    except ValueError:
        raise UsageError(f"bad set {text!r}; expected comma-separated integers") from None


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True, indent=2))


def _report(args, result, seed=None) -> dict:
    return {"command": args.command, "subcommand": getattr(args, "sub", None),
            "config": _echo(args), "seed": seed, "version": __version__, "result": result}


def _echo(args) -> dict:
    skip = {"func", "command", "sub"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


# -- norm ------------------------------------------------------------------------

def cmd_norm(args) -> int:
    mode = FLOAT if args.mode == "float" else RATIONAL
    norm = _load_norm(args.spec)
    x = _vector(_read_json(args.vec), mode)
    value, w = evaluate(norm, x, mode=mode, support_cap=_caps(args)["support"])
    _emit(_report(args, {"value": scalar_to_json(value), "witness": w.to_json()}))
    return EXIT_OK


# -- family ----------------------------------------------------------------------

def _write_family(F: fam.MaterializedFamily, out: Optional[str]) -> dict:
    if out:
        with open(out, "w") as fh:
            json.dump(F.to_json(), fh, sort_keys=True)
        return {"written": out, "size": len(F)}
    return {"size": len(F), "family": F.to_json()}


def cmd_family(args) -> int:
    caps = _caps(args)
    sub, code = args.sub, EXIT_OK
    if sub in ("contains", "maximal", "rank"):
        E = _parse_set(args.set)
        xi = Ordinal.of(args.xi)
        if sub == "contains":
            result = {"set": E, "contains": fam.schreier_contains(xi, E)}
        elif sub == "maximal":
            result = {"set": E, "maximal": fam.is_maximal(xi, E)}
        else:
            r = fam.rank(xi, E, budget=args.budget, method=args.method)
            result = {"set": E, "rank": str(r.value), "extrapolated": r.extrapolated}
    elif sub == "materialize":
        result = _write_family(fam.materialize(Ordinal.of(args.xi), args.N, caps["universe"]),
                               args.out)
    elif sub == "compose":
        F = fam.compose(args.m, args.n, args.N, caps["universe"])
        result = _write_family(F, args.out)
        if args.check_against is not None:
            G = fam.materialize(Ordinal.of(args.check_against), args.N, caps["universe"])
            extra = sorted(F.sets - G.sets)[:10]
            missing = sorted(G.sets - F.sets)[:10]
            ok = not extra and not missing
            result["check"] = {"against": args.check_against, "passed": ok,
                               "only_in_composition": [list(s) for s in extra],
                               "only_in_schreier": [list(s) for s in missing]}
            code = EXIT_OK if ok else EXIT_FAIL
    elif sub == "sum":
        F, closed = fam.load_family(args.family)
        result = _write_family(fam.sum_family(F, args.k), args.out)
        result["closure_added"] = closed
    else:
        rep = fam.partition_check(Ordinal.of(args.xi), args.N, budget=args.budget,
                                  cap=caps["universe"], method=args.method)
        result = rep.to_json()
        code = EXIT_OK if rep.passed else EXIT_FAIL
    _emit(_report(args, result))
    return code


# -- spread ----------------------------------------------------------------------

def _query(args, vectors) -> spr.SpreadingQuery:
    return spr.SpreadingQuery(tuple(vectors), _load_norm(args.norm), Ordinal.of(args.xi),
                              args.mode, tolerance=args.tolerance,
                              set_size_cap=_caps(args)["set_size"], exact=not args.float)


def _vectors(args) -> List[Vector]:
    mode = FLOAT if args.float else RATIONAL
    if args.vectors:
        data = _read_json(args.vectors)
        items = data.get("vectors") if isinstance(data, dict) else data
        if not isinstance(items, list):
            raise UsageError("vectors file must hold a list or {\"vectors\": [...]}")
        return [_vector(v, mode) for v in items]
    if args.basis is None:
        raise UsageError("give --basis N or --vectors FILE")
    return [basis_vector(n) for n in range(1, args.basis + 1)]


def cmd_spread(args) -> int:
    vectors = _vectors(args)
    if args.sub == "flatten":
        res = spr.flattening_search(vectors, _load_norm(args.norm), Ordinal.of(args.xi),
                                    args.eps, index_floor=args.floor, mode=args.mode,
                                    exact=not args.float, tolerance=args.tolerance)
        _emit(_report(args, res.to_json()))
        return EXIT_OK
    sizes = [int(s) for s in args.sweep.split(",")] if args.sweep else [len(vectors)]
    if any(not 1 <= n <= len(vectors) for n in sizes):
        raise UsageError(f"sweep sizes must lie in 1..{len(vectors)}")
    certs = [spr.spreading_constant(_query(args, vectors[:n]), lo=args.lo) for n in sizes]
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "xi", "delta", "gap", "witness_E", "sets_examined"])
        for n, c in zip(sizes, certs):
            w.writerow([n, args.xi, scalar_to_json(c.delta), scalar_to_json(c.gap),
                        " ".join(map(str, c.witness_E)), c.sets_examined])
        sys.stdout.write(buf.getvalue())
        return EXIT_OK
    if args.sweep:
        result = {"sweep": [dict(N=n, **c.to_json()) for n, c in zip(sizes, certs)]}
    else:
        result = certs[0].to_json()
    _emit(_report(args, result))
    return EXIT_OK


# -- verify ----------------------------------------------------------------------

def _suite_params():
    """Flag name -> (dest, type) over all registered suites."""
    params = {}
    for fn in SUITES.values():
        for p in inspect.signature(fn).parameters.values():
            params[p.name] = type(p.default)
    return params


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; known: {', '.join(sorted(SUITES))}")
    accepted = set(inspect.signature(SUITES[args.suite]).parameters)
    given = {k: getattr(args, "p_" + k) for k in _suite_params()
             if getattr(args, "p_" + k) is not None}
    unknown = sorted(set(given) - accepted)
    if unknown:
        raise UsageError(f"suite {args.suite} does not take {', '.join(unknown)}")
    rep = run_suite(args.suite, **given)
    _emit(_report(args, rep.to_json(), seed=rep.params.get("seed")))
    return EXIT_OK if rep.passed else EXIT_FAIL


# -- parser ----------------------------------------------------------------------

def _add_caps(p) -> None:
    p.add_argument("--universe-cap", type=int)
    p.add_argument("--support-cap", type=int)
    p.add_argument("--set-cap", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="schreierlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    top = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    norm = top.add_parser("norm", help="evaluate a norm")
    nsub = norm.add_subparsers(dest="sub", required=True, parser_class=_Parser)
    ev = nsub.add_parser("eval")
    ev.add_argument("--spec", required=True, help="norm spec JSON")
    ev.add_argument("--vec", required=True, help="vector JSON")
    ev.add_argument("--mode", choices=["rational", "float"], default="rational")
    _add_caps(ev)
    ev.set_defaults(func=cmd_norm)

    family = top.add_parser("family", help="Schreier family queries")
    fsub = family.add_subparsers(dest="sub", required=True, parser_class=_Parser)
    for name in ("contains", "maximal", "rank"):
        p = fsub.add_parser(name)
        p.add_argument("--xi", required=True)
        p.add_argument("--set", required=True, help="e.g. 2,3")
        if name == "rank":
            p.add_argument("--method", choices=["exact", "search"], default="exact")
            p.add_argument("--budget", type=int, default=4)
    p = fsub.add_parser("materialize")
    p.add_argument("--xi", required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--out")
    p = fsub.add_parser("compose")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--check-against")
    p.add_argument("--out")
    p = fsub.add_parser("sum")
    p.add_argument("--family", required=True, help="family JSON")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out")
    p = fsub.add_parser("partition")
    p.add_argument("--xi", required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--method", choices=["exact", "search"], default="exact")
    p.add_argument("--budget", type=int, default=4)
    for p in fsub.choices.values():
        _add_caps(p)
        p.set_defaults(func=cmd_family)

    spread = top.add_parser("spread", help="spreading-model constants")
    ssub = spread.add_subparsers(dest="sub", required=True, parser_class=_Parser)
    for name in ("constant", "flatten"):
        p = ssub.add_parser(name)
        p.add_argument("--xi", required=True)
        p.add_argument("--norm", required=True, help="norm spec JSON")
        p.add_argument("--basis", type=int, help="use the first N unit vectors")
        p.add_argument("--vectors", help="JSON list of vectors")
        p.add_argument("--mode", choices=[spr.CONVEX, spr.ELL1_SPHERE], default=spr.CONVEX)
        p.add_argument("--float", action="store_true", help="float LP instead of exact")
        p.add_argument("--tolerance", type=float, default=1e-9)
        _add_caps(p)
        p.set_defaults(func=cmd_spread)
    ssub.choices["constant"].add_argument("--lo", type=int, default=1)
    ssub.choices["constant"].add_argument("--sweep", help="comma-separated prefix sizes")
    ssub.choices["constant"].add_argument("--format", choices=["json", "csv"], default="json")
    ssub.choices["flatten"].add_argument("--eps", required=True)
    ssub.choices["flatten"].add_argument("--floor", type=int, default=0)

    verify = top.add_parser("verify", help="run a named verification suite")
    verify.add_argument("suite", help=", ".join(sorted(SUITES)))
    for name, kind in sorted(_suite_params().items()):
        flag = "--" + ("max-E" if name == "max_E" else name.replace("_", "-"))
        verify.add_argument(flag, dest="p_" + name, type=kind)
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            stream=sys.stderr, format="%(levelname)s %(message)s")
        return args.func(args)
    except fam.RankUndecided as exc:
        code, msg = EXIT_UNDECIDED, f"rank undecided: {exc}"
    except fam.ResourceError as exc:
        code, msg = EXIT_RESOURCE, f"resource cap: {exc}"
    except WitnessError as exc:
        code, msg = EXIT_FAIL, f"witness check failed: {exc}"
    except (UsageError, OrdinalError, ConfigError, NormError, fam.FamilyError,
            spr.SpreadingError, ValueError) as exc:
        code, msg = EXIT_CONFIG, f"error: {exc}"
    except Exception as exc:  # noqa: BLE001 - last-resort report
        log.debug("internal error", exc_info=True)
        code, msg = EXIT_FAIL, f"internal error: {type(exc).__name__}: {exc}"
    print(msg, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
