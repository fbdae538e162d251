"""Command-line front end.

Every subcommand writes JSON (or CSV for ``mc-study``) to ``--out`` or stdout.
Domain errors exit with status 1 and a JSON object on stderr; usage errors
exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, decomp, serialize, states, witness
from .opalg import as_dims

log = logging.getLogger("witnesskit")

# earlier analytic lower bound on the UPB witness shift
TERHAL_BOUND = 0.0013


class CLIError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int | None
    tolerance: float | None
    output_path: str | None
    format: str = "json"


# --- argument helpers -------------------------------------------------------------


def parse_state_spec(spec: str, seed: int | None = None) -> tuple[states.BipartiteState, dict]:
    """Build a state from ``kind:key=value,...`` or ``file:path``.

    Kinds: ``form1`` (p, a, d), ``memory`` (a, eta, mu), ``upb`` (p).
    Returns the state and the parsed parameters.
    """
    kind, _, rest = spec.partition(":")
    if kind == "file" or (not rest and spec.endswith(".json")):
        path = rest if kind == "file" else spec
        return serialize.state_from_json(serialize.read_json(path)), {"file": path}
    params: dict[str, float] = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise CLIError(f"bad state parameter {item!r}, expected key=value")
        try:
            params[key.strip()] = float(value)
        except ValueError as exc:
            raise CLIError(f"state parameter {key!r} is not a number: {value!r}") from exc
    if kind == "form1":
        a = params.get("a", 1 / math.sqrt(2))
        b = params.get("b", math.sqrt(max(0.0, 1 - a * a)))
        p, d = params.get("p", 1.0), params.get("d", 0.0)
        psi = states.target_ket(a, b)
        psi = psi / np.linalg.norm(psi)
        if d > 0:
            if seed is None:
                raise CLIError("form1 states with d > 0 sample noise and need --seed")
            sigma = states.sample_noise(states.NoiseBall(d), np.random.default_rng(seed))
        else:
            sigma = states.maximally_mixed()
        params.update(a=a, b=b, p=p, d=d)
        return states.noisy_target(psi, p, sigma), params
    if kind == "memory":
        try:
            mp = states.MemoryChannelParams(params["a"], params["eta"], params["mu"])
        except KeyError as exc:
            raise CLIError(f"memory state needs a, eta and mu (missing {exc})") from exc
        return states.memory_channel_state(mp), params
    if kind == "upb":
        return states.upb_noisy(params.get("p", 1.0)), params
    raise CLIError(f"unknown state kind {kind!r}; use form1, memory, upb or file")


def parse_float_list(text: str) -> list[float]:
    """``"0.05,0.15"`` or an inclusive range ``"start:stop:step"``."""
    if ":" in text:
        try:
            start, stop, step = (float(x) for x in text.split(":"))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad range {text!r}, expected start:stop:step") from exc
        if step <= 0 or stop < start:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        n = int(round((stop - start) / step))
        return [round(start + k * step, 12) for k in range(n + 1)]
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _load_operator(path: str) -> tuple[np.ndarray, tuple[int, int]]:
    m, dims = serialize.matrix_from_json(serialize.read_json(path))
    if dims is None:
        n = math.isqrt(m.shape[0])
        if n * n != m.shape[0]:
            raise CLIError(f"{path}: no 'dims' field and dim {m.shape[0]} is not a square")
        dims = as_dims((n, n))
    return m, dims


def _epsilon_arg(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}") from exc


# --- subcommands ----------------------------------------------------------------------


def cmd_witness_construct(args, cfg):
    state, _ = parse_state_spec(args.state, cfg.seed)
    w = witness.witness_from_npt(state)
    out = serialize.witness_to_json(w)
    summary = f"NPT witness ({w.dims.n_a}x{w.dims.n_b}), Tr(W rho) = {analysis.expectation(w, state):.12g}"
    return out, summary


def cmd_witness_epsilon(args, cfg):
    op, dims = _load_operator(args.operator)
    tol = cfg.tolerance if cfg.tolerance is not None else witness.SEESAW_TOL
    if args.denominator:
        den, _ = _load_operator(args.denominator)
        res = witness.optimize_epsilon_ratio(op, den, dims, args.restarts, tol, cfg.seed)
    else:
        res = witness.optimize_epsilon(op, dims, args.restarts, tol, cfg.seed)
    out = {"value": res.value, "restarts_used": res.restarts_used, "converged": res.converged,
           "argmin": {"e": serialize.ket_to_json(res.argmin.e), "f": serialize.ket_to_json(res.argmin.f)}}
    return out, f"product-state infimum ~ {res.value:.6f} ({res.restarts_used} restarts)"


def cmd_witness_tau(args, cfg):
    tau = witness.tau_bound(args.d)
    return {"d": args.d, "tau": tau}, f"tau({args.d}) = {tau:.10g}"


def cmd_decompose(args, cfg):
    w = serialize.witness_from_json(serialize.read_json(args.witness))
    if args.mode == "generic":
        d = decomp.generic_setting_decomposition(w.op, w.dims)
    else:
        if tuple(w.dims) != (2, 2):
            raise CLIError("onp/ons modes need a two-qubit witness of the form (|e><e|)^{T_A}; use --mode generic")
        d = decomp.decompose_two_qubit_witness(w.op, args.mode)
    rep = decomp.verify_decomposition(w.op, d)
    out = serialize.decomposition_to_json(d)
    return out, f"{args.mode}: {rep.n_terms} terms, {rep.n_settings} settings, error {rep.max_error:.2e}"


def cmd_verify(args, cfg):
    target, _ = serialize.matrix_from_json(serialize.read_json(args.target))
    d = serialize.decomposition_from_json(serialize.read_json(args.decomposition))
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-10
    rep = decomp.verify_decomposition(target, d, tol)
    return rep.to_dict(), (f"{'OK' if rep.ok else 'MISMATCH'}: error {rep.max_error:.3e}, "
                           f"{rep.n_terms} terms, {rep.n_settings} settings, coefficient sum {rep.coeff_sum:.12g}")


def cmd_analyze(args, cfg):
    w = serialize.witness_from_json(serialize.read_json(args.witness))
    state, params = parse_state_spec(args.state, cfg.seed)
    ev = analysis.expectation(w, state)
    d = args.d if args.d is not None else params.get("d", 0.0)
    rep = analysis.classify(w, ev, d)
    if params.get("d", None) == 0 and "a" in params and min(params["a"], params["b"]) > 0:
        rep = analysis.WitnessReport(rep.expectation, rep.verdict, rep.tau, rep.epsilon_used,
                                     analysis.estimate_p(ev, params["a"], params["b"]), rep.heuristic)
    return rep.to_dict(), f"Tr(W rho) = {ev:.12g} -> {rep.verdict}"


def cmd_measure(args, cfg):
    d = serialize.decomposition_from_json(serialize.read_json(args.decomposition))
    if isinstance(d, decomp.PseudoMixture):
        d = decomp.group_into_settings(d)
    state, _ = parse_state_spec(args.state, cfg.seed)
    est = analysis.simulate_measurement(d, state, args.shots, np.random.default_rng(cfg.seed))
    return est.to_dict(), f"Tr(W rho) ~ {est.mean:.6f} +/- {est.std_error:.6f} ({est.n_settings} settings)"


def cmd_mc_study(args, cfg):
    study = analysis.mc_error_study(args.d, args.eps, args.samples, args.bins, cfg.seed)
    if cfg.output_path:
        with open(cfg.output_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["d", "epsilon", "p_bin", "error_rate", "n_samples", "max_over_p"])
            for r in study.rows:
                writer.writerow([repr(r.d), repr(r.epsilon), repr(r.p_bin), repr(r.error_rate),
                                 r.n_samples, repr(r.max_over_p)])
    opt = study.optimal_epsilon()
    c, r2 = study.quadratic_fit()
    out = {
        "samples": args.samples,
        "p_bins": args.bins,
        "optimal_epsilon": [{"d": d, "epsilon": e} for d, e in opt.items()],
        "max_error_at_optimum": [float(study.max_error[j].min()) for j in range(len(study.d_values))],
        "max_error_at_zero_shift": [float(study.max_error[j][0]) for j in range(len(study.d_values))],
        "quadratic_fit": {"model": "epsilon = c * d^2", "c": c, "r_squared": r2},
    }
    lines = [f"d = {d:g}: optimal epsilon {e:g}" for d, e in opt.items()]
    lines.append(f"fit epsilon* = {c:.4f} d^2 (R^2 = {r2:.3f})")
    return out, "\n".join(lines)


def cmd_upb(args, cfg):
    P = states.upb_projector()
    prewitness = witness.edge_witness(P, P, 0.0, (3, 3)).op
    out: dict = {}
    if args.epsilon == "auto":
        if cfg.seed is None:
            raise CLIError("--epsilon auto needs --seed")
        res = witness.optimize_epsilon(prewitness, (3, 3), args.restarts, rng=cfg.seed)
        eps = res.value
        out["epsilon_source"] = "see-saw"
    else:
        eps = args.epsilon
        out["epsilon_source"] = "given"
    I = decomp.upb_identity_replacement()
    if args.epsilon_prime == "auto":
        if cfg.seed is None:
            raise CLIError("--epsilon-prime auto needs --seed")
        eps_p = witness.optimize_epsilon_ratio(prewitness, I, (3, 3), args.restarts, rng=cfg.seed).value
    else:
        eps_p = args.epsilon_prime
    w = witness.edge_witness(P, P, eps, (3, 3))
    pm10 = decomp.upb_witness_pseudomixture(eps)
    sd6 = decomp.upb_witness_settings(eps)
    pm9 = decomp.upb_onp_decomposition(eps_p)
    sd5 = decomp.upb_onp_settings(eps_p)
    rep10 = decomp.verify_decomposition(w.op, sd6)
    rep9 = decomp.verify_decomposition(prewitness - eps_p * I, sd5)
    out.update({
        "epsilon": eps,
        "terhal_bound": TERHAL_BOUND,
        "above_terhal_bound": eps >= TERHAL_BOUND,
        "epsilon_prime": eps_p,
        "noise_threshold": analysis.upb_noise_threshold(eps),
        "expectation_rho_be": analysis.expectation(w, states.upb_rho_be()),
        "witness_decomposition": {"projectors": len(pm10), "settings": rep10.n_settings,
                                  "max_error": rep10.max_error,
                                  "pseudo_mixture": serialize.decomposition_to_json(pm10),
                                  "setting_decomposition": serialize.decomposition_to_json(sd6)},
        "onp_decomposition": {"projectors": len(pm9), "settings": rep9.n_settings,
                              "max_error": rep9.max_error,
                              "pseudo_mixture": serialize.decomposition_to_json(pm9),
                              "setting_decomposition": serialize.decomposition_to_json(sd5)},
    })
    summary = (f"epsilon = {eps:.6f}, epsilon' = {eps_p:.6f}, detection for p > {out['noise_threshold']:.6f}\n"
               f"witness: {len(pm10)} projectors in {rep10.n_settings} settings; "
               f"ONP: {len(pm9)} projectors in {rep9.n_settings} settings")
    return out, summary


def cmd_bounds(args, cfg):
    counts = decomp.generalization_counts(args.n, args.m)
    c = counts.to_dict()
    return c, (f"{args.n}x{args.m}: ONP in [{c['onp_lower']}, {c['onp_upper']}], "
               f"ONS in [{c['ons_lower']}, {c['ons_upper']}]")


# --- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the primary output here instead of stdout")
    common.add_argument("--format", choices=("json", "pretty"), default="json")
    common.add_argument("--tol", type=float, default=None, help="tolerance override")
    common.add_argument("-v", "--verbose", action="store_true")

    def seed(p, required):
        p.add_argument("--seed", type=int, required=required,
                       help="master RNG seed" + (" (required)" if required else ""))

    parser = argparse.ArgumentParser(prog="witnesskit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    pw = sub.add_parser("witness", help="construct witnesses and bounds")
    wsub = pw.add_subparsers(dest="action", required=True)
    p = wsub.add_parser("construct", parents=[common])
    p.add_argument("--state", required=True)
    seed(p, False)
    p.set_defaults(func=cmd_witness_construct)
    p = wsub.add_parser("epsilon", parents=[common])
    p.add_argument("--operator", required=True)
    p.add_argument("--denominator")
    p.add_argument("--restarts", type=int, default=witness.DEFAULT_RESTARTS)
    seed(p, True)
    p.set_defaults(func=cmd_witness_epsilon)
    p = wsub.add_parser("tau", parents=[common])
    p.add_argument("--d", type=float, required=True)
    p.set_defaults(func=cmd_witness_tau, seed=None)

    p = sub.add_parser("decompose", parents=[common])
    p.add_argument("--witness", required=True)
    p.add_argument("--mode", choices=("onp", "ons", "generic"), required=True)
    p.set_defaults(func=cmd_decompose, seed=None)

    p = sub.add_parser("verify", parents=[common])
    p.add_argument("--target", required=True)
    p.add_argument("--decomposition", required=True)
    p.set_defaults(func=cmd_verify, seed=None)

    p = sub.add_parser("analyze", parents=[common])
    p.add_argument("--witness", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--d", type=float)
    seed(p, False)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("measure", parents=[common])
    p.add_argument("--decomposition", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--shots", type=int, required=True)
    seed(p, True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("mc-study", parents=[common])
    p.add_argument("--d", type=parse_float_list, default=[0.05, 0.15, 0.25])
    p.add_argument("--eps", type=parse_float_list, default=parse_float_list("0:0.1:0.005"))
    p.add_argument("--samples", type=int, default=50_000)
    p.add_argument("--bins", type=int, default=50)
    seed(p, True)
    p.set_defaults(func=cmd_mc_study, out_is_csv=True)

    p = sub.add_parser("upb", parents=[common])
    p.add_argument("--epsilon", type=_epsilon_arg, default=0.0284)
    p.add_argument("--epsilon-prime", type=_epsilon_arg, default=0.0311)
    p.add_argument("--restarts", type=int, default=witness.DEFAULT_RESTARTS)
    seed(p, False)
    p.set_defaults(func=cmd_upb)

    p = sub.add_parser("bounds", parents=[common])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(func=cmd_bounds, seed=None)
    return parser


def _error(kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return 1


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = RunConfig(args.seed, args.tol, args.out, args.format)
    try:
        out, summary = args.func(args, cfg)
    except (CLIError, ValueError, OSError, states.SamplingError) as exc:
        return _error(type(exc).__name__, str(exc))
    text = serialize.dumps(out)
    # mc-study writes its CSV to --out itself; the JSON summary goes to stdout
    to_file = cfg.output_path and not getattr(args, "out_is_csv", False)
    if to_file:
        Path(cfg.output_path).write_text(text)
    if cfg.format == "pretty":
        sys.stdout.write(summary + "\n")
    elif not to_file:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())
