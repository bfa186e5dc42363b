"""Command-line interface.

Subcommands:
  run           execute a scenario and write a result bundle (+ figures)
  spectrum      instantaneous spectrum of a scenario's model at a given time
  oracle        closed-form reference quantities for a scenario's model
  list-presets  names of the built-in scenarios

Exit codes: 0 success, 2 configuration/usage error, 3 numerical abort.
Output root resolution: --out flag, then config output_dir, then the
BLOCHSIM_OUT environment variable, then ./out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from ._version import __version__
from .adiabatic import time_averaged_energies
from .core import eig_hermitian
from .errors import ConfigError, NumericalAbort
from .experiments import (
    model_spec_from_config,
    preset_config,
    preset_names,
    probe_indices,
    resolve_config,
    run_scenario,
)
from .models import (
    build_model,
    ho_theta,
    lz_adiabatic_energy,
    lz_transition_probability,
    single_band_eigenstate_oracle,
)
from .output import bundle_hash, json_text, write_bundle
from .plots import render_figures

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def load_schema() -> dict:
    with resources.files("blochsim").joinpath("schema.json").open() as fh:
        return json.load(fh)


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a JSON object")
    # a bundle's metadata.json round-trips: the scenario lives under "config"
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return data


def _apply_set(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got '{assignment}'")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings are fine
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        nxt = node.get(p)
        if not isinstance(nxt, dict):
            nxt = {}
            node[p] = nxt
        node = nxt
    node[parts[-1]] = value


def _gather_config(args) -> dict:
    if bool(args.preset) == bool(args.config):
        raise ConfigError("give exactly one of --preset or --config")
    cfg = preset_config(args.preset) if args.preset else _load_config_file(args.config)
    for assignment in args.set or []:
        _apply_set(cfg, assignment)
    if getattr(args, "dt", None) is not None:
        cfg.setdefault("time", {})["dt"] = args.dt
    if getattr(args, "seed", None) is not None:
        if cfg.get("ensemble"):
            cfg["ensemble"]["master_seed"] = args.seed
        elif isinstance(cfg.get("model"), dict) and "disorder" in cfg["model"]:
            cfg["model"]["disorder"]["seed"] = args.seed
        else:
            print("note: --seed has no effect without disorder or an ensemble",
                  file=sys.stderr)
    validate_config(cfg)
    return cfg


def _out_root(args, cfg: dict) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if cfg.get("output_dir"):
        return Path(cfg["output_dir"])
    env = os.environ.get("BLOCHSIM_OUT")
    return Path(env) if env else Path("out")


# --- subcommands -----------------------------------------------------------

def cmd_run(args) -> int:
    cfg = _gather_config(args)
    if args.dump_preset:
        print(json_text(resolve_config(cfg)), end="")
        return EXIT_OK
    result = run_scenario(cfg, threads=args.threads)
    out_dir = _out_root(args, result.config) / result.config["name"]
    probe = probe_indices(result.config, result.times)
    write_bundle(out_dir, result, probe_idx=probe)
    if not args.no_figures:
        render_figures(out_dir, result)
    print(f"bundle: {out_dir}")
    print(f"bundle_sha256: {bundle_hash(out_dir)}")
    for key in ("width_period", "power_law", "pr_minimum", "center_excursion"):
        if key in result.report:
            print(f"{key}: {json.dumps(result.report[key], sort_keys=True)}")
    return EXIT_OK


def _emit(text: str, out) -> None:
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)


def cmd_spectrum(args) -> int:
    """Diabatic and adiabatic energy curves over a time grid."""
    cfg = _gather_config(args)
    resolved = resolve_config(cfg)
    model = build_model(model_spec_from_config(resolved["model"]))
    if args.averaged:
        energies = time_averaged_energies(model, n_quad=args.quadrature,
                                          source="numeric")
        text = "n,E\n" + "".join(f"{n},{e:.17g}\n" for n, e in enumerate(energies))
        _emit(text, args.out)
        return EXIT_OK
    t1 = args.t1 if args.t1 is not None else args.t0 + 2 * model.characteristic_period
    if args.points < 2:
        raise ConfigError("--points must be >= 2")
    lines = ["t,k,E_diabatic,E_adiabatic"]
    for t in [args.t0 + i * (t1 - args.t0) / (args.points - 1)
              for i in range(args.points)]:
        dia = sorted(model.diabatic_energies(t))
        adia = eig_hermitian(model.hamiltonian_op(t), check=False).values
        lines.extend(f"{t:.17g},{k},{d:.17g},{a:.17g}"
                     for k, (d, a) in enumerate(zip(dia, adia)))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _oracle_grid(args):
    if args.points < 2:
        raise ConfigError("--points must be >= 2")
    return [args.t0 + i * (args.t1 - args.t0) / (args.points - 1)
            for i in range(args.points)]


def cmd_oracle(args) -> int:
    """Closed-form reference tables, independent of the eigensolver."""
    name = args.name
    if name == "bessel":
        from .models import SingleBandSpec
        spec = SingleBandSpec(J=args.J, omega=args.omega, n_sites=3)
        k = args.levels
        text = "k,amplitude\n" + "".join(
            f"{j},{single_band_eigenstate_oracle(0, j, spec):.17g}\n"
            for j in range(-k, k + 1))
    elif name == "ho-coherent":
        from .models import DrivenHOSpec
        from .propagate import driven_ho_coherent_alpha
        spec = DrivenHOSpec(omega=args.omega, J=args.J, Omega=args.Omega,
                            n_fock=2)
        rows = ["t,re_alpha,im_alpha"]
        for t in _oracle_grid(args):
            a = driven_ho_coherent_alpha(args.alpha, spec, t)
            rows.append(f"{t:.17g},{a.real:.17g},{a.imag:.17g}")
        text = "\n".join(rows) + "\n"
    elif name == "lz-energies":
        from .models import LZGridSpec
        spec = LZGridSpec(omega=args.omega, lam=args.lam, J=args.J, n_levels=3)
        rows = ["t,m,E_plus,E_minus"]
        for t in _oracle_grid(args):
            for m in range(-args.levels, args.levels + 1):
                ep = lz_adiabatic_energy(m, +1, t, spec)
                em = lz_adiabatic_energy(m, -1, t, spec)
                rows.append(f"{t:.17g},{m},{ep:.17g},{em:.17g}")
        text = "\n".join(rows) + "\n"
    elif name == "lz-prob":
        from .models import LZGridSpec
        spec = LZGridSpec(omega=args.omega, lam=args.lam, J=args.J, n_levels=3)
        text = f"stay_probability\n{lz_transition_probability(spec):.17g}\n"
    elif name == "ho-theta":
        from .models import DrivenHOSpec
        spec = DrivenHOSpec(omega=args.omega, J=args.J, Omega=args.Omega,
                            n_fock=2)
        rows = ["t,n,theta_n_nplus1"]
        for t in _oracle_grid(args):
            for n in range(args.levels):
                rows.append(f"{t:.17g},{n},{ho_theta(n, n + 1, t, spec):.17g}")
        text = "\n".join(rows) + "\n"
    else:
        raise ConfigError(
            f"unknown oracle '{name}' (available: bessel, ho-coherent, "
            "lz-energies, lz-prob, ho-theta)")
    _emit(text, args.out)
    return EXIT_OK


def cmd_list_presets(args) -> int:
    for name in preset_names():
        print(name)
    return EXIT_OK


# --- parser ----------------------------------------------------------------

def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--preset", help="built-in scenario name")
    p.add_argument("--config", help="path to a JSON scenario file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config entry (dotted path, JSON value); "
                        "repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blochsim",
        description="Simulator for Bloch-like oscillations in energy space.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write a bundle")
    _add_config_args(p_run)
    p_run.add_argument("--out", help="output root directory")
    p_run.add_argument("--seed", type=int, help="override disorder/ensemble seed")
    p_run.add_argument("--dt", type=float, help="override the integration step")
    p_run.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker processes for ensembles (default: all cores)")
    p_run.add_argument("--dump-preset", action="store_true",
                       help="print the resolved configuration and exit")
    p_run.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering")
    p_run.set_defaults(func=cmd_run)

    p_spec = sub.add_parser("spectrum",
                            help="diabatic/adiabatic energy curves over time")
    _add_config_args(p_spec)
    p_spec.add_argument("--t0", type=float, default=0.0, help="grid start")
    p_spec.add_argument("--t1", type=float,
                        help="grid end (default: t0 + 2 model periods)")
    p_spec.add_argument("--points", type=int, default=201, help="grid points")
    p_spec.add_argument("--averaged", action="store_true",
                        help="emit the period-averaged spectrum instead")
    p_spec.add_argument("--quadrature", type=int, default=256,
                        help="quadrature points for --averaged")
    p_spec.add_argument("--out", help="write CSV here instead of stdout")
    p_spec.set_defaults(func=cmd_spectrum)

    p_or = sub.add_parser("oracle", help="closed-form reference tables")
    p_or.add_argument("name",
                      help="bessel | ho-coherent | lz-energies | lz-prob | ho-theta")
    p_or.add_argument("--J", type=float, default=1.0)
    p_or.add_argument("--omega", type=float, default=1.0)
    p_or.add_argument("--Omega", type=float, default=1.2)
    p_or.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_or.add_argument("--alpha", type=float, default=1.0)
    p_or.add_argument("--t0", type=float, default=0.0)
    p_or.add_argument("--t1", type=float, default=1.0)
    p_or.add_argument("--points", type=int, default=101)
    p_or.add_argument("--levels", type=int, default=10,
                      help="how many indices to tabulate")
    p_or.add_argument("--out", help="write the table here instead of stdout")
    p_or.set_defaults(func=cmd_oracle)

    p_ls = sub.add_parser("list-presets", help="list built-in scenarios")
    p_ls.set_defaults(func=cmd_list_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
