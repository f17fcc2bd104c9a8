"""Command-line interface: every subcommand prints one JSON document.

Exit codes: 0 success, 1 internal failure, 2 invalid input (the JSON lists
the errors), 64 usage errors such as an unknown subcommand.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import attractor, coupling, measures, schemes, sequences, variational
from .schemes import SchemeError, SchemeFamily
from .variational import DomainError, FrequencyVector, OptimizerOptions

EX_USAGE = 64


class InputError(Exception):
    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _load_json(ref: str) -> Any:
    """Parse ``ref`` as inline JSON when it starts with ``{``, else as a file path."""
    if ref.lstrip().startswith("{"):
        source, text = "<inline>", ref
    else:
        source = ref
        try:
            text = Path(ref).read_text()
        except OSError as exc:
            raise InputError([f"{ref}: {exc.strerror}"]) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError([f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None


def _family(args) -> SchemeFamily:
    if getattr(args, "family", None):
        return schemes.family_from_dict(_load_json(args.family))
    if getattr(args, "scheme", None):
        return SchemeFamily((schemes.validate_scheme(_load_json(args.scheme)),))
    raise InputError(["one of --family or --scheme is required"])


def _sequence(ref: str, m: int) -> sequences.SymbolSequence:
    seq = sequences.sequence_from_dict(_load_json(ref), m)
    if seq.m != m:
        raise InputError([f"sequence uses {seq.m} symbols but the family has {m} schemes"])
    return seq


def _word(text: str) -> list[int]:
    """Symbol word from ``"1,2,1"`` or the compact ``"121"``."""
    text = text.strip()
    if "," not in text and text.isdigit():
        return [int(ch) for ch in text]
    return _ints(text)


def _ints(text: str) -> list[int]:
    """Integer list from ``"2,3,5"`` or an inclusive range ``"0-31"``."""
    text = text.strip()
    if "-" in text and "," not in text:
        lo, hi = text.split("-")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",") if x.strip()]


def _opts(args) -> OptimizerOptions:
    return OptimizerOptions(
        restarts=args.restarts,
        max_iters=args.max_iters,
        seed=args.seed,
        tol_obj=args.tol_obj,
        tol_grad=args.tol_grad,
        alphabet_cap=args.alphabet_cap,
        threads=args.threads,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> dict:
    fam = _family(args)
    return {
        "valid": True,
        "schemes": [
            {"alphabet_size": s.alphabet_size, "rows": len(s.rows), "strictly_separated": s.strictly_separated}
            for s in fam.schemes
        ],
    }


def cmd_dim(args) -> dict:
    fam = _family(args)
    if len(fam) != 1:
        raise InputError(["dim takes a single scheme; use dim-word or dim-freq for families"])
    return variational.maximize_dimension(fam[1], _opts(args)).to_dict(args.weights)


def cmd_dim_word(args) -> dict:
    fam = _family(args)
    opts = _opts(args)
    word = _word(args.word)
    scheme = schemes.compose_word(fam, word, cap=opts.alphabet_cap)
    out = variational.maximize_dimension(scheme, opts).to_dict(args.weights)
    out["word"] = word
    out["alphabet_size"] = scheme.alphabet_size
    return out


def cmd_dim_freq(args) -> dict:
    fam = _family(args)
    Q = FrequencyVector.parse(args.q)
    if Q.rational is None:
        raise InputError(["--q must be rational, e.g. 1/2,1/2"])
    word = _word(args.word_order) if args.word_order else variational.balanced_word(Q)
    out = variational.dim_of_rational_frequency(fam, Q, _opts(args), word=word).to_dict(args.weights)
    out["word"] = word
    out["q"] = Q.to_dict()
    return out


def cmd_dim_limit(args) -> dict:
    fam = _family(args)
    P = FrequencyVector.parse(args.p)
    dens = _ints(args.denominators) if args.denominators else None
    res = variational.dim_of_frequency_limit(
        fam, P, args.tol, _opts(args), denominators=dens, max_denominator=args.max_denominator
    )
    return res.to_dict()


def cmd_oracle(args) -> dict:
    if args.kind == "mcmullen":
        if args.n is None or args.m is None or not args.t:
            raise InputError(["mcmullen oracle needs --n, --m and --t"])
        return {"oracle": "mcmullen", "dimension": variational.mcmullen_oracle(args.n, args.m, _ints(args.t))}
    fam = _family(args)
    if len(fam) != 1:
        raise InputError(["grid oracle takes a single scheme"])
    value = variational.grid_search_oracle(fam[1], args.resolution)
    return {"oracle": "grid", "dimension": value, "resolution": args.resolution}


def cmd_epsilon(args) -> dict:
    seq = sequences.sequence_from_dict(_load_json(args.sequence))
    P = FrequencyVector.parse(args.p) if args.p else seq.frequencies()
    prof = sequences.epsilon_profile(seq, P, args.k, args.n_max)
    return {
        "symbol": args.k,
        "p": list(P.entries),
        "eps": prof.eps.tolist(),
        "envelope": prof.envelope.tolist(),
    }


def cmd_verify_tau(args) -> dict:
    fam = _family(args)
    omega = _sequence(args.omega, len(fam))
    omegaQ = _sequence(args.omegaq, len(fam))
    reports = coupling.exponent_ladder(fam, omega, omegaQ, _ints(args.depths), seed=args.seed)
    out: dict = {"reports": [r.to_dict() for r in reports]}
    if len(reports) >= 2 and any(r.delta + r.eps > 0 for r in reports):
        out["fit"] = coupling.fit_k_from_reports(reports).to_dict()
    return out


def cmd_verify_sandwich(args) -> dict:
    fam = _family(args)
    omega = _sequence(args.omega, len(fam))
    Q = FrequencyVector.parse(args.q)
    rep = measures.sandwich_check(
        fam, omega, Q, args.depth, _ints(args.seeds), k_hat=args.k_hat, slack=args.slack, opts=_opts(args)
    )
    out = rep.to_dict()
    out["ratios"] = {
        "quantiles": np.quantile(
            [r for s in rep.per_seed for r in (s["ratio_outer"], s["ratio_inner"])], [0, 0.25, 0.5, 0.75, 1]
        ).tolist()
    }
    return out


def cmd_local_dim(args) -> dict:
    fam = _family(args)
    if args.q:
        Q = FrequencyVector.parse(args.q)
    elif len(fam) == 1:
        Q = FrequencyVector.from_fractions([1])
    else:
        raise InputError(["--q is required for families with more than one scheme"])
    mu, dim = measures.period_measure(fam, Q, _opts(args))
    depths = _ints(args.depths)
    depths = [d - d % mu.period for d in depths]
    traces = [measures.local_dimension_trace(mu, s, depths) for s in _ints(args.seeds)]
    last = [t.last for t in traces]
    return {
        "dimension": dim,
        "depths": depths,
        "traces": [{"seed": t.seed, "ratios": t.ratios} for t in traces],
        "summary": {
            "median_last": float(np.median(last)),
            "min_last": float(np.min(last)),
            "max_last": float(np.max(last)),
            "median_minus_dimension": float(np.median(last) - dim),
        },
    }


def _cloud(args):
    fam = _family(args)
    seq = _sequence(args.sequence, len(fam)) if args.sequence else sequences.SymbolSequence.periodic([1], len(fam))
    return attractor.generate_points(fam, seq, args.depth, args.mode, args.count, args.seed)


def cmd_points(args) -> dict:
    cloud = _cloud(args)
    out = {"count": int(len(cloud.points)), "depth": cloud.depth, "mode": cloud.mode,
           "bbox": [cloud.points.min(axis=0).tolist(), cloud.points.max(axis=0).tolist()]}
    if args.csv:
        cloud.to_csv(args.csv)
        out["csv"] = args.csv
    return out


def cmd_boxcount(args) -> dict:
    est = attractor.box_count_estimate(_cloud(args), args.k_min, args.k_max)
    return {
        "estimate": est.estimate,
        "scales": est.scales,
        "counts": est.counts,
        "residuals": est.residuals,
        "note": "box dimension upper-bounds Hausdorff dimension; not an equality check",
    }


def cmd_render(args) -> dict:
    path = attractor.render_pgm(_cloud(args), args.resolution, args.out)
    return {"path": str(path), "resolution": args.resolution}


# ---------------------------------------------------------------------------


def _add_opt_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--tol-obj", type=float, default=1e-12)
    p.add_argument("--tol-grad", type=float, default=1e-8)
    p.add_argument("--alphabet-cap", type=int, default=schemes.DEFAULT_ALPHABET_CAP)
    p.add_argument("--weights", action="store_true", help="include maximizing weights in the report")


def _add_input(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--scheme", help="scheme JSON file (or inline JSON)")
    g.add_argument("--family", help="family JSON file (or inline JSON)")


def _add_cloud_flags(p: argparse.ArgumentParser) -> None:
    _add_input(p)
    p.add_argument("--sequence", help="sequence JSON; default: scheme 1 repeated")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--mode", choices=["exhaustive", "sampled"], default="exhaustive")
    p.add_argument("--count", type=int, default=100_000)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lgdim", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        p.add_argument("--threads", type=int, default=argparse.SUPPRESS)
        return p

    p = add("validate", cmd_validate, "validate a scheme or family")
    _add_input(p)

    p = add("dim", cmd_dim, "dimension of a single scheme")
    _add_input(p)
    _add_opt_flags(p)

    p = add("dim-word", cmd_dim_word, "dimension of the scheme composed along a word")
    _add_input(p)
    p.add_argument("--word", required=True, help="e.g. 1,2,1 or 121")
    _add_opt_flags(p)

    p = add("dim-freq", cmd_dim_freq, "dimension for rational scheme frequencies")
    _add_input(p)
    p.add_argument("--q", required=True, help="e.g. 1/2,1/2")
    p.add_argument("--word-order", help="explicit period word, e.g. 21")
    _add_opt_flags(p)

    p = add("dim-limit", cmd_dim_limit, "dimension for arbitrary frequencies via rational approximation")
    _add_input(p)
    p.add_argument("--p", required=True)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--denominators", help="e.g. 2,3,5,8")
    p.add_argument("--max-denominator", type=int, default=64)
    _add_opt_flags(p)

    p = add("oracle", cmd_oracle, "independent dimension oracles")
    _add_input(p)
    p.add_argument("--kind", choices=["grid", "mcmullen"], default="grid")
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--t", help="chosen cells per nonempty row, e.g. 2,1")

    p = add("epsilon", cmd_epsilon, "appearance-position deviation profile")
    p.add_argument("--sequence", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n-max", type=int, default=1000)
    p.add_argument("--p", help="reference frequencies (default: the sequence's own)")

    p = add("verify-tau", cmd_verify_tau, "exponent brackets of coupled rectangles")
    _add_input(p)
    p.add_argument("--omega", required=True)
    p.add_argument("--omegaq", required=True)
    p.add_argument("--depths", default="100,1000,10000")

    p = add("verify-sandwich", cmd_verify_sandwich, "transported local-dimension bracket")
    _add_input(p)
    p.add_argument("--omega", required=True)
    p.add_argument("--q", required=True)
    p.add_argument("--depth", type=int, default=10000)
    p.add_argument("--seeds", default="0-31")
    p.add_argument("--k-hat", type=float, default=0.0)
    p.add_argument("--slack", type=float, default=0.05)
    _add_opt_flags(p)

    p = add("local-dim", cmd_local_dim, "local-dimension ratios along approximate squares")
    _add_input(p)
    p.add_argument("--q", help="rational frequencies (families only)")
    p.add_argument("--depths", default="100,1000,10000")
    p.add_argument("--seeds", default="0-31")
    _add_opt_flags(p)

    p = add("points", cmd_points, "generate an attractor point cloud")
    _add_cloud_flags(p)
    p.add_argument("--csv", help="write points as x,y lines")

    p = add("boxcount", cmd_boxcount, "box-counting estimate (sanity bound)")
    _add_cloud_flags(p)
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=12)

    p = add("render", cmd_render, "render a point cloud as binary PGM")
    _add_cloud_flags(p)
    p.add_argument("--resolution", type=int, default=512)
    p.add_argument("--out", required=True)
    return parser


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def dispatch(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EX_USAGE
    config = _config(args)
    try:
        result = args.func(args)
        code = 0
    except (InputError, SchemeError) as exc:
        result, code = {"errors": exc.errors}, 2
    except (DomainError, schemes.AlphabetCapError, sequences.SequenceError,
            coupling.CouplingError, attractor.AttractorError) as exc:
        result, code = {"errors": [str(exc)]}, 2
    except Exception as exc:  # noqa: BLE001 - reported as internal failure
        result, code = {"errors": [f"internal error: {exc!r}"]}, 1
    if args.command == "validate" and code == 2:
        result["valid"] = False
    result["config"] = config
    json.dump(result, out, sort_keys=True, default=_json_default)
    out.write("\n")
    return code


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def main() -> None:
    sys.exit(dispatch())
