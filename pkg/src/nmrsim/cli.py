"""Command-line front end.

    nmrsim list
    nmrsim run --name shor15 --out out/
    nmrsim run --config exp.json --set parameters.mode=finite_pulses --out out/
    nmrsim simulate --config sim.json --out out/
    nmrsim optimize-pulse --config opt.json --out out/
    nmrsim spectrum --fid out/fid.csv --out out2/

Exit status: 0 success, 1 configuration error, 2 runtime failure.
Messages go to stderr; results go to files in ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .control import rotation_propagator, save_segments, selective_benchmark, smp_optimize
from .experiments import ConfigError, ExperimentConfig
from .operators import State
from .parallel import set_default_threads
from .program import EnsembleSpec, PulseProgram, RotationSpec
from .readout import AcquisitionConfig, acquire_fid, peak_integrals, read_fid_csv, spectrum, write_fid_csv
from .results import write_json
from .sequence import run_program
from .spins import PRESETS, SpinSystem, ThermalParams, internal_hamiltonian, load_preset, thermal_state

log = logging.getLogger("nmrsim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


# Config handling -------------------------------------------------------------


def load_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a JSON object")
    return data


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides, default_section: str | None = None, top_level=()) -> dict:
    """Apply ``key=value`` strings; dotted keys descend into nested objects.

    A bare key not in ``top_level`` goes under ``default_section``.
    """
    out = json.loads(json.dumps(cfg))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, raw = item.partition("=")
        path = key.strip().split(".")
        if default_section and len(path) == 1 and path[0] not in top_level:
            path = [default_section, *path]
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r}: {part!r} is not an object")
        node[path[-1]] = parse_value(raw)
    return out


def _check_keys(cfg: dict, allowed, where: str) -> None:
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def system_from(value) -> SpinSystem:
    try:
        if isinstance(value, dict):
            return SpinSystem.from_dict(value)
        if isinstance(value, str) and value in PRESETS:
            return load_preset(value)
        if isinstance(value, str):
            return SpinSystem.from_dict(load_json(value))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"system: {exc}") from None
    raise ConfigError("system must be a preset name, a JSON path or an object")


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    return out


# Subcommands -----------------------------------------------------------------


def cmd_list(args) -> int:
    for name, spec in experiments.REGISTRY.items():
        print(f"experiment  {name:12s} {spec.description}")
    for name in PRESETS:
        sys_ = load_preset(name)
        print(f"preset      {name:12s} {sys_.n_spins} spins, {sys_.coupling_model}")
    return EXIT_OK


def cmd_run(args) -> int:
    base: dict = load_json(args.config) if args.config else {}
    if args.name:
        base["name"] = args.name
    cfg = apply_overrides(base, args.set, "parameters", ("name", "system", "seed", "parameters"))
    if args.seed is not None:
        cfg["seed"] = args.seed
    exp = ExperimentConfig.from_dict(cfg)
    exp.threads = args.threads
    out = _out_dir(args.out)
    res = experiments.run_experiment(exp, out)
    log.info("%s: wrote %s to %s", res.name, ", ".join(res.files), out)
    return EXIT_OK


SIM_KEYS = ("system", "program", "initial_state", "mode", "rf_amplitude_hz", "acquisition", "seed")


def initial_state(spec, sys_: SpinSystem) -> State:
    if spec in (None, "thermal"):
        return thermal_state(sys_, ThermalParams.for_system(sys_))
    if isinstance(spec, dict) and set(spec) == {"bits"}:
        bits = str(spec["bits"])
        if len(bits) != sys_.n_spins or set(bits) - {"0", "1"}:
            raise ConfigError(f"initial_state.bits must be {sys_.n_spins} binary digits")
        return State.basis(bits)
    if isinstance(spec, dict) and set(spec) == {"diagonal"}:
        diag = np.asarray(spec["diagonal"], dtype=float)
        if diag.size != sys_.dim:
            raise ConfigError(f"initial_state.diagonal needs {sys_.dim} entries")
        return State(np.diag(diag), "mixed")
    raise ConfigError("initial_state must be 'thermal', {'bits': ...} or {'diagonal': [...]}")


def cmd_simulate(args) -> int:
    cfg = apply_overrides(load_json(args.config), args.set)
    _check_keys(cfg, SIM_KEYS, "simulate config")
    if "system" not in cfg:
        raise ConfigError(f"{args.config}: missing key 'system'")
    sys_ = system_from(cfg["system"])
    prog_spec = cfg.get("program", {"events": []})
    try:
        prog = PulseProgram.from_json(prog_spec) if isinstance(prog_spec, str) else PulseProgram.from_dict(prog_spec)
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"program: {exc}") from None
    rho0 = initial_state(cfg.get("initial_state"), sys_)
    acq_spec = cfg.get("acquisition", "auto")
    try:
        if acq_spec == "auto" or (isinstance(acq_spec, dict) and set(acq_spec) <= {"observe_spin"}):
            spin = acq_spec.get("observe_spin", 1) if isinstance(acq_spec, dict) else 1
            acq = AcquisitionConfig.auto(sys_, spin)
        else:
            acq = AcquisitionConfig.from_dict(acq_spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"acquisition: {exc}") from None
    res = run_program(prog, sys_, rho0, mode=cfg.get("mode", "ideal_pulses"), rf_amplitude_hz=float(cfg.get("rf_amplitude_hz", 25e3)))
    fid = acquire_fid(res.state, internal_hamiltonian(sys_), acq)
    out = _out_dir(args.out)
    write_json(out / "config.json", {**cfg, "acquisition": acq.to_dict(), "seed": cfg.get("seed", args.seed or 0)})
    write_fid_csv(out / "fid.csv", fid, acq, {"system": sys_.name})
    spec = spectrum(fid, acq, {"system": sys_.name})
    spec.to_csv(out / "spectrum.csv")
    write_json(out / "result.json", {"populations": res.state.populations(), "program_duration_s": prog.duration_s, "n_events": len(prog)})
    log.info("simulate: wrote fid.csv, spectrum.csv, result.json to %s", out)
    return EXIT_OK


OPT_KEYS = ("system", "target", "max_amplitude_hz", "n_segments", "restarts", "max_evaluations", "ensemble", "seed")


def cmd_optimize(args) -> int:
    cfg = apply_overrides(load_json(args.config) if args.config else {}, args.set)
    _check_keys(cfg, OPT_KEYS, "optimize-pulse config")
    bench_target, bench_sys = selective_benchmark()
    sys_ = system_from(cfg["system"]) if "system" in cfg else bench_sys
    tgt = cfg.get("target", "selective_benchmark")
    if tgt == "selective_benchmark":
        if "system" in cfg and sys_.n_spins != 2:
            raise ConfigError("the selective benchmark target needs a 2-spin system")
        target = bench_target
    else:
        try:
            rots = [RotationSpec.from_dict(r) for r in (tgt if isinstance(tgt, list) else [tgt])]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"target: {exc}") from None
        target = np.eye(sys_.dim, dtype=complex)
        for r in rots:
            target = rotation_propagator(r, sys_.n_spins) @ target
    ens = EnsembleSpec.from_dict(cfg["ensemble"]) if "ensemble" in cfg else None
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    res = smp_optimize(
        target,
        sys_,
        ens,
        max_amplitude_hz=float(cfg.get("max_amplitude_hz", 5000.0)),
        n_segments=int(cfg.get("n_segments", 4)),
        seed=seed,
        restarts=int(cfg.get("restarts", 8)),
        max_evaluations=int(cfg.get("max_evaluations", 5000)),
        threads=args.threads,
    )
    out = _out_dir(args.out)
    write_json(out / "config.json", {**cfg, "seed": seed})
    save_segments(res.segments, out / "pulse.json", fidelity=res.fidelity)
    write_json(out / "result.json", {"fidelity": res.fidelity, "restart_fidelities": res.restart_fidelities, "n_evaluations": res.n_evaluations})
    log.info("optimize-pulse: fidelity %.6f, wrote pulse.json to %s", res.fidelity, out)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    path = Path(args.fid)
    if not path.is_file():
        raise ConfigError(f"FID file not found: {path}")
    try:
        fid, acq = read_fid_csv(path)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    windows = parse_value(args.windows) if args.windows else None
    spec = spectrum(fid, acq, {"source": path.name})
    out = _out_dir(args.out)
    spec.to_csv(out / "spectrum.csv")
    if windows:
        try:
            ints = peak_integrals(spec, windows)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"windows: {exc}") from None
        write_json(out / "integrals.json", {"windows": windows, "integrals": ints})
    log.info("spectrum: wrote spectrum.csv to %s", out)
    return EXIT_OK


# Entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nmrsim", description="Desk-scale NMR quantum information simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config value (repeatable)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: NMRSIM_THREADS or CPU count)")

    sub.add_parser("list", help="registered experiments and presets")
    p = sub.add_parser("run", help="run a registered experiment")
    p.add_argument("--name")
    common(p)
    common(sub.add_parser("simulate", help="run a pulse program and acquire FID and spectrum"), config_required=True)
    common(sub.add_parser("optimize-pulse", help="search a strongly modulating pulse"))
    p = sub.add_parser("spectrum", help="recompute a spectrum from a stored FID")
    p.add_argument("--fid", required=True)
    p.add_argument("--windows", help="JSON list of [lo, hi] integration windows in Hz")
    p.add_argument("--out", required=True)
    return ap


COMMANDS = {"list": cmd_list, "run": cmd_run, "simulate": cmd_simulate, "optimize-pulse": cmd_optimize, "spectrum": cmd_spectrum}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="nmrsim: %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse usage errors count as config errors
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    threads = getattr(args, "threads", None)
    if threads is not None and threads < 1:
        log.error("--threads must be >= 1")
        return EXIT_CONFIG
    set_default_threads(threads)
    if args.command == "run" and not (args.name or args.config):
        log.error("run needs --name or --config")
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report any failure as a runtime error
        log.error("runtime failure: %s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME
    finally:
        set_default_threads(None)


if __name__ == "__main__":
    sys.exit(main())
