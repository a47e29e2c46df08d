"""Command-line entry point: ``friendly-wigner <subcommand>``.

Exit codes: 0 success, 1 internal error, 2 usage error, 3 invalid input
(config, state catalog).
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
from typing import Any, Sequence

from . import __version__
from .config import ConfigParseError, load_config
from .experiment import (
    ConfigError,
    Protocol,
    TimePoint,
    evolve_exact,
    joint_distribution,
    monte_carlo,
)
from .perspectives import (
    NotModeledError,
    RecordSuperposition,
    assign_state,
    catalog,
    open_lab_message,
)
from .reasoning import Pathway, consistency_report, enumerate_pathways, evaluate_pathway
from .statevec import DensityMatrix, Ket, StateError

SEED_ENV = "FRIENDLY_WIGNER_SEED"

_R2 = math.sqrt(2)
SYMBOLS = {
    "1/12": 1 / 12,
    "1/10": 1 / 10,
    "1/6": 1 / 6,
    "1/3": 1 / 3,
    "1/2": 1 / 2,
    "2/3": 2 / 3,
    "3/4": 3 / 4,
    "5/6": 5 / 6,
    "9/10": 9 / 10,
    "1/(4-2*sqrt2)": 1 / (4 - 2 * _R2),
    "1/(4+2*sqrt2)": 1 / (4 + 2 * _R2),
}


class UsageError(Exception):
    pass


def symbol_for(x: float) -> str | None:
    for name, v in SYMBOLS.items():
        if abs(x - v) <= 1e-9:
            return name
    return None


def _r12(x: float) -> float:
    if abs(x) < 1e-15:
        return 0.0
    return float(f"{x:.12g}")


def _prob(x: float) -> dict:
    d = {"value": _r12(x)}
    s = symbol_for(x)
    if s:
        d["symbol"] = s
    return d


def _amp(a: complex):
    a = complex(a)
    if abs(a.imag) <= 1e-15:
        return _r12(a.real)
    return [_r12(a.real), _r12(a.imag)]


def _ket(k: Ket) -> dict:
    return {"space": list(k.names), "amplitudes": {",".join(lab): _amp(a) for lab, a in k.amplitudes.items()}}


def _density(rho: DensityMatrix) -> dict:
    return {"space": list(rho.names), "matrix": [[_amp(x) for x in row] for row in rho.matrix]}


# --- payload builders ------------------------------------------------------


def exact_payload(protocol: Protocol) -> dict:
    tree = evolve_exact(protocol)
    table = joint_distribution(tree)
    rows = {k: _ket(v) for k, v in tree.rows.items() if isinstance(v, Ket)}
    rows["wbar_measures_lbar"] = [
        {"outcome": lab, "probability": _prob(p), "state": _ket(k)} for lab, p, k in tree.rows["wbar_measures_lbar"]
    ]
    rows["w_measures_l"] = [
        {"outcome": [wb, w], "conditional": _prob(p), "state": _ket(k)} for wb, w, p, k in tree.rows["w_measures_l"]
    ]
    cond = {}
    for wb in ("okbar", "failsbar"):
        if table.marginal_wbar(wb) > 0:
            for w in ("ok", "fails"):
                cond[f"{w}|{wb}"] = _prob(table.conditional(w, wb))
    return {
        "joint": [{"outcome_wbar": wb, "outcome_w": w, "probability": _prob(p)} for wb, w, p in table.cells()],
        "marginal_wbar": {wb: _prob(table.marginal_wbar(wb)) for wb in ("okbar", "failsbar")},
        "conditional_w_given_wbar": cond,
        "states": rows,
    }


def simulate_payload(protocol: Protocol, rounds: int, seed: int, workers: int) -> dict:
    freq = monte_carlo(protocol, rounds, seed, workers)
    exact = joint_distribution(evolve_exact(protocol))
    zs = freq.z_scores(exact)
    cells = []
    for wb, w, p in exact.cells():
        se = freq.stderr(wb, w)
        cells.append(
            {
                "outcome_wbar": wb,
                "outcome_w": w,
                "count": freq.joint_counts[(wb, w)],
                "frequency": _r12(freq.frequency(wb, w)),
                "stderr": None if math.isnan(se) else _r12(se),
                "exact": _prob(p),
                "z_score": _r12(zs[(wb, w)]) if math.isfinite(zs[(wb, w)]) else None,
            }
        )
    marg = {}
    for var, counts in freq.marginal_counts.items():
        marg[var] = {}
        for lab, n in counts.items():
            se = freq.marginal_stderr(var, lab)
            marg[var][lab] = {"count": n, "frequency": _r12(n / rounds), "stderr": None if math.isnan(se) else _r12(se)}
    return {"rounds": rounds, "seed": seed, "degenerate_stderr": freq.degenerate, "joint": cells, "marginals": marg}


def _perspective_body(ps) -> dict:
    body = ps.body
    d: dict[str, Any] = {"lab": ps.lab, "kind": ps.kind, "note": ps.note}
    if isinstance(body, Ket):
        d["state"] = _ket(body)
    elif isinstance(body, DensityMatrix):
        d["state"] = _density(body)
        d["eigenvalues"] = [_r12(x) for x in body.eigenvalues()]
    elif isinstance(body, RecordSuperposition):
        gram = body.gram()
        msg = open_lab_message(body.lab_outcome)
        d["state"] = {
            "normalization": _r12(body.normalization),
            "branches": [
                {"record_of": b.record_of, "coefficient": _amp(c), "record": _ket(b.record), "claim": _r12(b.claim)}
                for c, b in zip(body.coefficients, body.branches)
            ],
            "gram": [[_amp(x) for x in row] for row in gram],
            "normalized": _ket(body.state),
        }
        d["messages"] = {
            "entries": [{"quasi_weight": _r12(q), "claim": _r12(m)} for q, m in msg.entries],
            "effective_probability": _prob(msg.effective_probability),
            "born_probability": _prob(msg.born_probability),
            "consistent": msg.consistent,
        }
    return d


def perspectives_payload(protocol: Protocol, agent: str, time: str, conditions: list[str], lab: str | None) -> dict:
    labs = [lab]
    if lab is None:
        probe = assign_state(agent, time, conditions, None, protocol)
        entry = next(e for e in catalog() if e[0] == probe.agent.value and e[1] == probe.time.label and e[2] == tuple(k for k, _ in probe.conditioning))
        labs = list(entry[3])
    states = [assign_state(agent, time, conditions, lb, protocol) for lb in labs]
    first = states[0]
    return {
        "agent": first.agent.value,
        "time": first.time.label,
        "conditioning": dict(first.conditioning),
        "assignments": [_perspective_body(s) for s in states],
    }


def _verdict(v) -> dict:
    d = v.as_dict()
    for key in ("probability", "claimed", "quantum"):
        if key in d:
            d[key] = _prob(d[key])
    return d


def reason_payload(protocol: Protocol, pathway: str | None) -> dict:
    if pathway is None:
        verdicts = [evaluate_pathway(p, protocol) for p in enumerate_pathways()]
    else:
        verdicts = [evaluate_pathway(_pathway_arg(pathway), protocol)]
    return {"verdicts": [_verdict(v) for v in verdicts], "count": len(verdicts)}


def report_payload(protocol: Protocol) -> dict:
    rep = consistency_report(protocol)
    d = rep.as_dict()
    d["joint"] = {k: _prob(v) for k, v in d["joint"].items()}
    d["conditional_chain"]["factors"] = [[k, _prob(v)] for k, v in d["conditional_chain"]["factors"]]
    d["conditional_chain"]["product"] = _prob(d["conditional_chain"]["product"])
    for key in ("equal_time_prediction", "quantum_conditional", "literal_printed_value"):
        if d[key] is not None:
            d[key] = _prob(d[key])
    d["pathways"] = [_verdict(v) for v in rep.verdicts]
    if d["non_equal_time_check"]:
        d["non_equal_time_check"] = {
            k: (_r12(v) if isinstance(v, float) else v) for k, v in d["non_equal_time_check"].items()
        }
    return d


def _pathway_arg(text: str) -> Pathway:
    valid = enumerate_pathways()
    try:
        p = Pathway.parse(text)
    except ValueError:
        p = None
    if p not in valid:
        raise UsageError(f"unknown pathway {text!r}; valid pathways are: " + "; ".join(v.label for v in valid))
    return p


# --- rendering ---------------------------------------------------------------


def _fmt6(x) -> str:
    if isinstance(x, dict) and "value" in x:
        s = f"{x['value']:.6g}"
        return f"{s} ({x['symbol']})" if "symbol" in x else s
    if isinstance(x, float):
        return f"{x:.6g}"
    return "" if x is None else str(x)


def to_markdown(command: str, payload: dict, meta: dict) -> str:
    out = [f"# friendly-wigner {command}", ""]
    out.append(" ".join(f"{k}={v}" for k, v in meta.items()))
    out.append("")
    if command == "exact":
        out += ["| wbar | w | probability |", "|---|---|---|"]
        out += [f"| {c['outcome_wbar']} | {c['outcome_w']} | {_fmt6(c['probability'])} |" for c in payload["joint"]]
        out += ["", "| quantity | value |", "|---|---|"]
        out += [f"| P(wbar={k}) | {_fmt6(v)} |" for k, v in payload["marginal_wbar"].items()]
        out += [f"| P(w={k}) | {_fmt6(v)} |" for k, v in payload["conditional_w_given_wbar"].items()]
    elif command == "simulate":
        out.append(f"rounds={payload['rounds']} seed={payload['seed']}")
        out += ["", "| wbar | w | count | frequency | stderr | exact | z |", "|---|---|---|---|---|---|---|"]
        for c in payload["joint"]:
            out.append(
                f"| {c['outcome_wbar']} | {c['outcome_w']} | {c['count']} | {_fmt6(c['frequency'])} | "
                f"{_fmt6(c['stderr'])} | {_fmt6(c['exact'])} | {_fmt6(c['z_score'])} |"
            )
    elif command in ("reason", "report"):
        verdicts = payload["verdicts"] if command == "reason" else payload["pathways"]
        if command == "report":
            out.append(f"overall: **{payload['overall']}**")
            out.append("")
            out += ["| wbar,w | probability |", "|---|---|"]
            out += [f"| {k} | {_fmt6(v)} |" for k, v in payload["joint"].items()]
            out.append("")
            chain = " x ".join(_fmt6(v) for _, v in payload["conditional_chain"]["factors"])
            out.append(f"conditional chain: {chain} = {_fmt6(payload['conditional_chain']['product'])}")
            out.append("")
        out += ["| pathway | verdict | value |", "|---|---|---|"]
        for v in verdicts:
            if v["verdict"] == "ConsistentPrediction":
                val = _fmt6(v["probability"])
            elif v["verdict"] == "ContradictionWithQM":
                val = f"claimed {_fmt6(v['claimed'])} vs quantum {_fmt6(v['quantum'])}"
            else:
                val = f"{v['hop']}: {v['reason']}"
            out.append(f"| {v['notation']} | {v['verdict']} | {val} |")
        if command == "report":
            out += ["", "## derivation", ""] + [f"- {line}" for line in payload["derivation"]]
            if payload["non_equal_time_check"]:
                c = payload["non_equal_time_check"]
                out += [
                    "",
                    "## non-equal-time check",
                    "",
                    f"- P(z=minus) in the heralded state: {_fmt6(c['p_z_minus_heralded_global'])}",
                    f"- P(z=minus) given Fbar's record at t1: {_fmt6(c['p_z_minus_given_record_at_t1'])}",
                    f"- contradiction: {c['contradiction']}",
                ]
            out += ["", "## notes", ""] + [f"- {n}" for n in payload["notes"]]
    else:
        out += ["```json", json.dumps(payload, indent=2), "```"]
    return "\n".join(out) + "\n"


def to_csv(command: str, payload: dict) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    if command == "exact":
        wr.writerow(["outcome_wbar", "outcome_w", "probability", "stderr"])
        for c in payload["joint"]:
            wr.writerow([c["outcome_wbar"], c["outcome_w"], repr(c["probability"]["value"]), ""])
    elif command == "simulate":
        wr.writerow(["outcome_wbar", "outcome_w", "probability", "stderr"])
        for c in payload["joint"]:
            wr.writerow([c["outcome_wbar"], c["outcome_w"], repr(c["frequency"]), "" if c["stderr"] is None else repr(c["stderr"])])
    elif command == "reason":
        wr.writerow(["pathway", "verdict", "probability", "claimed", "quantum", "hop", "reason"])
        for v in payload["verdicts"]:
            wr.writerow(
                [
                    v["pathway"],
                    v["verdict"],
                    v.get("probability", {}).get("value", ""),
                    v.get("claimed", {}).get("value", ""),
                    v.get("quantum", {}).get("value", ""),
                    v.get("hop", ""),
                    v.get("reason", ""),
                ]
            )
    else:
        raise UsageError(f"csv output is not available for {command}")
    return buf.getvalue()


# --- argument handling ---------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="protocol TOML file")
    common.add_argument("--default", action="store_true", help="fall back to the default protocol if the config is missing")
    common.add_argument("--format", choices=("json", "csv", "markdown"), default="json")
    common.add_argument("--stamp", action="store_true", help="add a timestamp to the metadata")

    parser = argparse.ArgumentParser(prog="friendly-wigner", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("exact", parents=[common], help="exact branch tree and joint table")
    sim = sub.add_parser("simulate", parents=[common], help="seeded Monte Carlo rounds")
    sim.add_argument("--rounds", type=_positive_int, required=True)
    sim.add_argument("--seed", type=int, default=None, help=f"defaults to ${SEED_ENV}, then 0")
    sim.add_argument("--workers", type=_positive_int, default=1)
    per = sub.add_parser("perspectives", parents=[common], help="one agent's state assignment")
    per.add_argument("--agent", required=True, choices=("FBAR", "F", "WBAR", "W"))
    per.add_argument("--time", required=True, choices=("t0", "t1", "t2", "t3"))
    per.add_argument("--condition", action="append", default=[], metavar="VAR=VALUE")
    per.add_argument("--lab", choices=("Lbar", "L", "S"))
    rea = sub.add_parser("reason", parents=[common], help="pathway verdicts")
    group = rea.add_mutually_exclusive_group()
    group.add_argument("--pathway", metavar='"WBAR:tX,F:tY,FBAR:tZ"')
    group.add_argument("--all", action="store_true")
    sub.add_parser("report", parents=[common], help="full consistency report")
    return parser


def _seed(args, parser) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        parser.error(f"{SEED_ENV} must be an integer, got {env!r}")


def run_subcommand(argv: Sequence[str] | None = None) -> tuple[int, str]:
    """Parse ``argv`` and produce (exit code, document)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), ""
    try:
        config = load_config(args.config, default_if_missing=args.default)
        protocol = Protocol(config)
        meta: dict[str, Any] = {
            "version": __version__,
            "config_hash": hashlib.sha256(json.dumps(config.as_dict(), sort_keys=True).encode()).hexdigest()[:16],
        }
        cmd = args.command
        if cmd == "exact":
            payload = exact_payload(protocol)
        elif cmd == "simulate":
            seed = _seed(args, parser)
            meta["seed"] = seed
            payload = simulate_payload(protocol, args.rounds, seed, args.workers)
        elif cmd == "perspectives":
            payload = perspectives_payload(protocol, args.agent, args.time, args.condition, args.lab)
        elif cmd == "reason":
            payload = reason_payload(protocol, args.pathway)
        else:
            payload = report_payload(protocol)
        if args.stamp:
            meta["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        if args.format == "json":
            doc = json.dumps({"command": cmd, "metadata": meta, "payload": payload}, indent=2) + "\n"
        elif args.format == "csv":
            doc = to_csv(cmd, payload)
        else:
            doc = to_markdown(cmd, payload, meta)
    except SystemExit as exc:
        return int(exc.code or 0), ""
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"friendly-wigner: error: {exc}", file=sys.stderr)
        return 2, ""
    except (ConfigError, ConfigParseError, NotModeledError, StateError) as exc:
        print(f"friendly-wigner: invalid input: {exc}", file=sys.stderr)
        return 3, ""
    except Exception as exc:  # noqa: BLE001
        print(f"friendly-wigner: internal error: {exc!r}", file=sys.stderr)
        return 1, ""
    return 0, doc


def main(argv: Sequence[str] | None = None) -> int:
    code, doc = run_subcommand(argv)
    if doc:
        sys.stdout.write(doc)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
