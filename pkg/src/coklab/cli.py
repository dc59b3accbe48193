"""The ``coklab`` command-line tool.

Every command writes one JSON document {command, provenance, result} (or CSV
where noted).  Exit status: 0 on success, 1 on invalid input, 2 when an
enumeration bound or convergence limit stops the computation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from fractions import Fraction
from typing import Sequence

from . import __version__
from .bounded import Bounded, fraction_str
from .errors import BoundExceeded, CoklabError, ConvergenceError, ValidationError
from .groups import (
    GroupType, aut_count, chain_count_nk, hom_count, joint_chain_count_mk, subgroup_type_count, sur_count,
)
from .partitions import Partition


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so bad flags map to exit 1."""

    def error(self, message):
        raise ValidationError(message)


# ------------------------------------------------------------------ parsing

def parse_group(text: str) -> GroupType:
    """'2:2,1+3:1' -> Z/4+Z/2+Z/3.  '0', '' or '[]' is the trivial group; a bare
    integer m is Z/m."""
    text = text.strip()
    if text in ("", "0", "[]", "1"):
        return GroupType()
    if ":" not in text:
        try:
            return GroupType.cyclic(int(text))
        except ValueError as exc:
            raise ValidationError(f"cannot parse group {text!r}") from exc
    comps = {}
    for part in text.split("+"):
        p, _, lam = part.partition(":")
        try:
            comps[int(p)] = Partition.parse(lam)
        except ValueError as exc:
            raise ValidationError(f"cannot parse group component {part!r}") from exc
    return GroupType(comps)


def parse_groups(text: str) -> list[GroupType]:
    return [parse_group(t) for t in text.split(";")]


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from exc


def parse_levels(text: str) -> dict[int, int]:
    out = {}
    for item in text.split(","):
        p, _, L = item.partition(":")
        try:
            out[int(p)] = int(L) if L else 1
        except ValueError as exc:
            raise ValidationError(f"bad level {item!r}; use p:L") from exc
    return out


def parse_entry(text: str, modulus: int):
    """'uniform' | 'bernoulli01:Q' | 'signed:P(-1),P(0),P(1)' | 'weights:r=w,...[@m]'."""
    from .montecarlo import EntryDistribution

    name, _, arg = text.partition(":")
    try:
        if name == "uniform":
            return EntryDistribution.uniform(modulus)
        if name == "bernoulli01":
            return EntryDistribution.bernoulli01(Fraction(arg), modulus)
        if name == "signed":
            pm, p0, pp = (Fraction(x) for x in arg.split(","))
            return EntryDistribution.signed(pm, p0, pp, modulus)
        if name == "weights":
            body, _, base = arg.partition("@")
            weights = {}
            for item in body.split(","):
                r, _, w = item.partition("=")
                weights[int(r)] = Fraction(w)
            base = int(base) if base else modulus
            if base == modulus:
                return EntryDistribution.from_weights(modulus, weights)
            return EntryDistribution.lifted(base, weights, modulus)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"cannot parse entry law {text!r}: {exc}") from exc
    raise ValidationError(f"unknown entry law {text!r}")


def _json_arg(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON argument: {exc}") from exc


def _load(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


def _hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _approx(b: Bounded) -> dict:
    out = b.to_json()
    return {"prob": out["approx"] if b.exact else out["value"], "bound": out["error_bound"],
            "error_bound": out["error_bound"], **({"exact": out["value"]} if b.exact else {})}


# ----------------------------------------------------------------- commands

def cmd_theory(args) -> tuple[dict, str | None]:
    from . import limits

    if args.what == "corank":
        return _approx(limits.corank_joint_limit(args.p, parse_int_list(args.pattern))), None
    if args.what == "single-corank":
        return _approx(limits.corank_single_limit(args.p, args.d)), None
    if args.what == "rank-step":
        return {"prob": fraction_str(limits.rank_step(args.p, args.n, args.k0, args.d))}, None
    if args.what == "cok-prod":
        return _approx(limits.cok_prod_limit(parse_int_list(args.primes), args.k, parse_group(args.group))), None
    if args.what == "cok-joint":
        groups = parse_groups(args.groups)
        return _approx(limits.cok_joint_limit(parse_int_list(args.primes), len(groups), groups)), None
    table = limits.theory_table(args.p, args.L, args.k, args.mode, max_len=args.max_len, max_total=args.max_total)
    return table.to_json(), None


def _sim_config(args):
    from .montecarlo import SimConfig

    if args.config:
        data = _load(args.config)
        for flag in ("seed", "samples", "workers", "chunk"):
            val = getattr(args, flag, None)
            if val is not None:
                data[flag] = val
        if "seed" not in data:
            raise ValidationError("a seed is required (config field or --seed)")
        try:
            return SimConfig.from_json(data)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad config: missing or malformed {exc}") from exc
    missing = [f for f in ("n", "k", "levels", "samples", "seed") if getattr(args, f) is None]
    if missing:
        raise ValidationError("missing flags: " + ", ".join("--" + m for m in missing))
    levels = parse_levels(args.levels)
    modulus = 1
    for p, L in levels.items():
        modulus *= p ** L
    return SimConfig(
        n=args.n, k=args.k, levels=levels, samples=args.samples, seed=args.seed,
        entry=parse_entry(args.entry, modulus), mode=args.mode or "cok_joint",
        chunk=args.chunk or 10_000, workers=args.workers or 1,
    )


def cmd_simulate(args):
    from .montecarlo import simulate_joint

    cfg = _sim_config(args)
    emp = simulate_joint(cfg)
    return emp.to_json(), (cfg.config_hash(), cfg.seed)


def cmd_oracle(args):
    from . import matrices
    from .concrete import ConcreteGroup, brute_census
    from .montecarlo import exhaustive_joint

    if args.what == "exhaustive":
        spec = parse_entry(args.entry, args.p ** args.L)
        dist = exhaustive_joint(args.n, args.p, args.k, spec, L=args.L, mode=args.mode)
        return dist.to_json(), None
    if args.what == "snf":
        M = matrices.MatrixModPrimePower(_json_arg(args.matrix), args.p, args.L)
        return {"type": str(matrices.snf_type(M))}, None
    if args.what == "chain":
        Ms = [matrices.MatrixModPrimePower(m, args.p, args.L) for m in _json_arg(args.matrices)]
        return {"types": [str(t) for t in matrices.cok_chain(Ms)]}, None
    if args.what == "rank":
        return {"rank": matrices.rank_fp(_json_arg(args.matrix), args.p)}, None
    if args.what == "census":
        G = ConcreteGroup.of_type(args.p, Partition.parse(args.type))
        return brute_census(G).to_json(), None
    # counts
    lam = Partition.parse(args.lam) if args.lam is not None else None
    mu = Partition.parse(args.mu) if args.mu is not None else None
    kind = args.kind
    need = {"aut": ("lam",), "hom": ("lam", "mu"), "sur": ("lam", "mu"), "subgroups": ("lam", "mu"), "nk": ("lam", "k")}
    for flag in need.get(kind, ()):
        if getattr(args, flag) is None:
            raise ValidationError(f"counts {kind} needs --{flag}")
    if kind == "aut":
        value = aut_count(args.p, lam)
    elif kind == "hom":
        value = hom_count(args.p, mu, lam)
    elif kind == "sur":
        value = sur_count(args.p, lam, mu)
    elif kind == "subgroups":
        value = subgroup_type_count(args.p, mu, lam)
    elif kind == "nk":
        value = chain_count_nk(GroupType({args.p: lam}), args.k)
    else:
        if args.groups is None:
            raise ValidationError("counts mk needs --groups")
        value = joint_chain_count_mk(parse_groups(args.groups))
    return {"kind": kind, "value": int(value)}, None


def cmd_compare(args):
    from .limits import TheoryTable
    from .montecarlo import EmpiricalJointDistribution, Thresholds, compare

    emp_doc = _load(args.emp)
    th_doc = _load(args.theory)
    emp_data = emp_doc.get("result", emp_doc)
    th_data = th_doc.get("result", th_doc)
    try:
        emp = EmpiricalJointDistribution.from_json(emp_data)
        table = TheoryTable.from_json(th_data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed input document: {exc}") from exc
    report = compare(emp, table, Thresholds(args.tv, args.z))
    prov = emp_data.get("provenance", {})
    return report, (prov.get("config_hash"), prov.get("seed"))


def _spec(text: str):
    from .hl import SpecDescriptor

    kind, _, arg = text.partition(":")
    if kind == "geometric":
        a, k = (parse_int_list(arg) + [0, 1])[:2] if arg else (0, 1)
        return SpecDescriptor.geometric(a, k)
    if kind == "finite":
        try:
            return SpecDescriptor.finite(Fraction(x) for x in arg.split(",") if x.strip())
        except ValueError as exc:
            raise ValidationError(f"bad finite specialization {arg!r}") from exc
    raise ValidationError(f"unknown specialization {text!r}; use geometric:a,k or finite:x1,x2,...")


def _family(text: str):
    """'1,t' -> t^0, t^1, ...; 't,t^2' -> t^1, ...; a suffix [k] repeats each value k times."""
    from .hl import SpecDescriptor

    first = text.split(",")[0].strip()
    k = 1
    if first.endswith("]") and "[" in first:
        first, _, rep = first[:-1].partition("[")
        k = int(rep)
    if first == "1":
        a = 0
    elif first == "t":
        a = 1
    elif first.startswith("t^"):
        a = int(first[2:])
    else:
        raise ValidationError(f"cannot parse family {text!r}")
    return SpecDescriptor.geometric(a, k)


def cmd_hl(args):
    from . import hl

    t = Fraction(args.t)
    if args.what == "eval":
        xs = [Fraction(x) for x in args.vars.split(",") if x.strip()]
        value = hl.eval_skew(args.kind, Partition.parse(args.lam), Partition.parse(args.mu), xs, t)
        return Bounded(value).to_json(), None
    if args.what == "principal":
        if args.spec and args.family:
            raise ValidationError("give --spec or --family, not both")
        spec = _family(args.family) if args.family else _spec(args.spec or "geometric:0,1")
        b = hl.principal(args.kind, Partition.parse(args.lam), Partition.parse(args.mu), spec, t,
                         tol=args.tol, method=args.method)
    elif args.what == "measure-prod":
        b = hl.measure_prod(Partition.parse(args.lam), args.k, t)
    else:
        b = hl.measure_joint([Partition.parse(x) for x in args.lams.split(";")], t)
    return b.to_json(), None


def cmd_seq(args):
    from . import sequences

    if args.what == "classify":
        classes = sequences.classify(args.p, args.types)
        return {"p": args.p, "types": args.types, "classes": [c.to_json() for c in classes]}, None
    if args.what == "marginal":
        return sequences.marginal_check(args.p, args.types).to_json(), None
    S = sequences.SurjectionChain.from_json(_json_arg(args.first))
    T = sequences.SurjectionChain.from_json(_json_arg(args.second))
    return {"isomorphic": sequences.chains_isomorphic(S, T)}, None


def cmd_moments(args):
    from .montecarlo import estimate_moments

    cfg = _sim_config(args)
    targets = [parse_groups(t) for t in args.targets]
    ests = estimate_moments(cfg, targets, exhaustive=args.exhaustive)
    return {"estimates": [e.to_json() for e in ests]}, (cfg.config_hash(), None if args.exhaustive else cfg.seed)


# ------------------------------------------------------------------ parser

def _sim_flags(p):
    p.add_argument("--config", help="JSON file with SimConfig fields")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--levels", help="per-prime levels, e.g. 2:2,3:1")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--entry", default="uniform")
    p.add_argument("--mode", choices=["cok_joint", "corank"])
    p.add_argument("--chunk", type=int)
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="coklab", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=f"coklab {__version__}")
    top.add_argument("--format", choices=["json", "csv"], default="json")
    top.add_argument("--out", help="write the result here instead of stdout")
    # output flags are accepted before or after the subcommand
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=["json", "csv"], default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    th = sub.add_parser("theory", parents=[common], help="closed-form limit laws")
    ths = th.add_subparsers(dest="what", required=True, parser_class=_Parser)
    x = ths.add_parser("corank", parents=[common])
    x.add_argument("--p", type=int, required=True)
    x.add_argument("--k", type=int, required=True)
    x.add_argument("--pattern", required=True)
    x = ths.add_parser("single-corank", parents=[common])
    x.add_argument("--p", type=int, required=True)
    x.add_argument("--d", type=int, required=True)
    x = ths.add_parser("rank-step", parents=[common])
    for f in ("p", "n", "k0", "d"):
        x.add_argument(f"--{f}", type=int, required=True)
    x = ths.add_parser("cok-prod", parents=[common])
    x.add_argument("--primes", required=True)
    x.add_argument("--k", type=int, required=True)
    x.add_argument("--group", required=True)
    x = ths.add_parser("cok-joint", parents=[common])
    x.add_argument("--primes", required=True)
    x.add_argument("--groups", required=True, help="B_1;...;B_k")
    x = ths.add_parser("table", parents=[common])
    x.add_argument("--p", type=int, required=True)
    x.add_argument("--L", type=int, required=True)
    x.add_argument("--k", type=int, required=True)
    x.add_argument("--mode", choices=["cok_joint", "cok_single", "corank"], required=True)
    x.add_argument("--max-len", type=int, dest="max_len")
    x.add_argument("--max-total", type=int, default=4, dest="max_total")

    sim = sub.add_parser("simulate", parents=[common], help="Monte-Carlo run")
    _sim_flags(sim)

    orc = sub.add_parser("oracle", parents=[common], help="exact and brute-force oracles")
    ors = orc.add_subparsers(dest="what", required=True, parser_class=_Parser)
    x = ors.add_parser("exhaustive", parents=[common])
    x.add_argument("--n", type=int, required=True)
    x.add_argument("--p", type=int, required=True)
    x.add_argument("--k", type=int, required=True)
    x.add_argument("--L", type=int, default=1)
    x.add_argument("--mode", choices=["corank", "cok_joint"], default="corank")
    x.add_argument("--entry", default="uniform")
    x = ors.add_parser("snf", parents=[common])
    x.add_argument("--p", type=int, required=True)
    x.add_argument("--L", type=int, required=True)
    x.add_argument("--matrix", required=True, help="row-major JSON array")
    x = ors.add_parser("chain", parents=[common])
    x.add_argument("--p", type=int, required=True)
    x.add_argument("--L", type=int, required=True)
    x.add_argument("--matrices", required=True, help="JSON list of row-major arrays")
    x = ors.add_parser("rank", parents=[common])
    x.add_argument("--p", type=int, required=True)
    x.add_argument("--matrix", required=True)
    x = ors.add_parser("census", parents=[common])
    x.add_argument("--p", type=int, required=True)
    x.add_argument("--type", required=True)
    x = ors.add_parser("counts", parents=[common])
    x.add_argument("--kind", choices=["aut", "hom", "sur", "subgroups", "nk", "mk"], required=True)
    x.add_argument("--p", type=int, default=2)
    x.add_argument("--lam")
    x.add_argument("--mu")
    x.add_argument("--k", type=int)
    x.add_argument("--groups")

    cmp_ = sub.add_parser("compare", parents=[common], help="empirical run against a theory table")
    cmp_.add_argument("--emp", required=True)
    cmp_.add_argument("--theory", required=True)
    cmp_.add_argument("--tv", type=float, default=0.01)
    cmp_.add_argument("--z", type=float, default=5.0)

    hlp = sub.add_parser("hl", parents=[common], help="Hall-Littlewood evaluations")
    hls = hlp.add_subparsers(dest="what", required=True, parser_class=_Parser)
    x = hls.add_parser("eval", parents=[common])
    x.add_argument("--kind", choices=["P", "Q"], required=True)
    x.add_argument("--lam", "--lambda", dest="lam", required=True)
    x.add_argument("--mu", default="[]")
    x.add_argument("--vars", required=True, help="comma-separated rationals")
    x.add_argument("--t", default="1/2")
    x = hls.add_parser("principal", parents=[common])
    x.add_argument("--kind", choices=["P", "Q"], required=True)
    x.add_argument("--lam", "--lambda", dest="lam", required=True)
    x.add_argument("--mu", default="[]")
    x.add_argument("--spec", help="geometric:a,k or finite:x1,x2,...")
    x.add_argument("--family", help="geometric family such as 1,t or t,t^2 or 1[k],t[k]")
    x.add_argument("--t", default="1/2")
    x.add_argument("--tol", type=float, default=1e-12)
    x.add_argument("--method", choices=["exact", "truncate"], default="exact")
    x = hls.add_parser("measure-prod", parents=[common])
    x.add_argument("--lam", required=True)
    x.add_argument("--k", type=int, required=True)
    x.add_argument("--t", default="1/2")
    x = hls.add_parser("measure-joint", parents=[common])
    x.add_argument("--lams", required=True, help="lam_1;...;lam_k")
    x.add_argument("--t", default="1/2")

    sq = sub.add_parser("seq", parents=[common], help="sequences of surjections")
    sqs = sq.add_subparsers(dest="what", required=True, parser_class=_Parser)
    for name in ("classify", "marginal"):
        x = sqs.add_parser(name, parents=[common])
        x.add_argument("--p", type=int, required=True)
        x.add_argument("--types", required=True, help="lam_k;...;lam_1")
    x = sqs.add_parser("isomorphic", parents=[common])
    x.add_argument("--first", required=True, help="chain JSON")
    x.add_argument("--second", required=True, help="chain JSON")

    mom = sub.add_parser("moments", parents=[common], help="surjection moments of cokernels")
    _sim_flags(mom)
    mom.add_argument("--targets", action="append", required=True, help="G_1;...;G_k (repeatable)")
    mom.add_argument("--exhaustive", action="store_true")
    return top


HANDLERS = {
    "theory": cmd_theory,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
    "hl": cmd_hl,
    "seq": cmd_seq,
    "moments": cmd_moments,
}


def _command_name(args) -> str:
    what = getattr(args, "what", None)
    return f"{args.command} {what}" if what else args.command


def _csv(name: str, result, report=None) -> str:
    from .montecarlo import flat_key

    if report is not None:
        return report.to_csv()
    buf = io.StringIO()
    w = csv.writer(buf)
    mode = result.get("mode", "corank") if isinstance(result, dict) else "corank"

    def fk(key):
        if mode == "corank":
            return flat_key(mode, key)
        return ";".join("|".join(step) for step in key)

    if "cells" in result and result["cells"] and "count" in result["cells"][0]:
        w.writerow(["key", "count"])
        for c in result["cells"]:
            w.writerow([fk(c["key"]), c["count"]])
    elif "cells" in result:
        w.writerow(["key", "prob", "bound"])
        for c in result["cells"]:
            w.writerow([fk(c["key"]), c["prob"], c.get("bound", 0)])
    else:
        raise ValidationError(f"--format csv is not available for {name}")
    return buf.getvalue()


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        name = _command_name(args)
        result, prov = HANDLERS[args.command](args)
        report = None
        if hasattr(result, "to_json") and not isinstance(result, dict):
            report, result = result, result.to_json()
        config_hash, seed = prov if prov else (_hash(vars(args)), None)
        doc = {
            "command": name,
            "provenance": {"tool": "coklab", "version": __version__, "config_hash": config_hash or "", "seed": seed},
            "result": result,
        }
        if args.format == "csv":
            text = _csv(name, result, report)
        else:
            from .schema import validate_document

            validate_document(doc)
            text = json.dumps(doc, indent=2) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            stdout.write(text)
        return 0
    except (BoundExceeded, ConvergenceError) as exc:
        _error(stderr, exc, 2)
        return 2
    except (ValidationError, ValueError, KeyError) as exc:
        _error(stderr, exc, 1)
        return 1
    except CoklabError as exc:
        _error(stderr, exc, 1)
        return 1


def _error(stream, exc: Exception, code: int) -> None:
    stream.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
