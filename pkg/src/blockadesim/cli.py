"""Command-line front end.

Subcommands: ``entangle`` (heralded pair protocol, exact plus optional
sampling), ``ghz`` (four-qubit chain and the general acceptance formula),
``budget`` (analytic error report), ``grow`` (cluster growth Monte Carlo with
Markov cross-check), and ``sweep`` (grid scan of any of the former).

Conventions: parameter values resolve as defaults < config file < command
line; unknown keys anywhere are errors.  Identical config and seed give
byte-identical artifacts.  Output goes to stdout unless ``--output`` names a
file, which is written atomically; a relative path lands under
``$BLOCKADESIM_OUTPUT_DIR`` when that is set.

Exit codes: 0 success, 2 configuration/usage error, 3 parameter validation
error, 4 runtime cap (sweep grid bound) exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Callable, Optional

from . import budget as budget_mod
from . import growth as growth_mod
from . import protocol as protocol_mod
from .ensemble import AbsorptionModel
from .optics import DetectorModel

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "BLOCKADESIM_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_CAP = 4


class ConfigError(Exception):
    """Bad config file, unknown key, or untypable value."""


class GridBoundError(Exception):
    """Sweep grid larger than the configured bound."""


@dataclass(frozen=True)
class ParamSpec:
    name: str
    parse: Callable
    default: object
    help: str
    choices: Optional[tuple] = None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise ValueError(f"must be >= 0, got {value}")
    return value


COMMAND_PARAMS = {
    "entangle": (
        ParamSpec("eta", float, 1.0, "detector efficiency"),
        ParamSpec("p_abs", float, 1.0, "single-photon absorption probability"),
        ParamSpec("gamma_dc", float, 0.0, "detector dark-count rate [Hz]"),
        ParamSpec("gate_time", float, 5e-6, "detector gate window [s]"),
        ParamSpec("policy", str, "per-detector", "herald policy",
                  ("per-detector", "exclusive")),
        ParamSpec("trials", _positive_int, 0, "Monte Carlo trials (0 = exact only)"),
    ),
    "ghz": (
        ParamSpec("qubits", int, 4, "chain size (even, >= 4)"),
        ParamSpec("eta", float, 1.0, "detector efficiency"),
        ParamSpec("p_abs", float, 1.0, "single-photon absorption probability"),
    ),
    "budget": (
        ParamSpec("preset", str, "paper-43d", "parameter preset",
                  tuple(sorted(budget_mod.PRESETS))),
    ),
    "grow": (
        ParamSpec("block_size", int, 4, "GHZ block size (even, >= 4)"),
        ParamSpec("target", int, 8, "target cluster size"),
        ParamSpec("eta", float, 1.0, "detector efficiency for block generation"),
        ParamSpec("eta_prime", float, 1.0, "source efficiency for linking"),
        ParamSpec("pairing", str, "largest-first", "linking order",
                  tuple(r.value for r in growth_mod.PairingRule)),
        ParamSpec("trials", int, 1000, "Monte Carlo trials"),
        ParamSpec("cap", int, 1_000_000, "per-trial step cap"),
    ),
}

# budget accepts every BudgetParams field as an override key
_BUDGET_FIELDS = tuple(f.name for f in fields(budget_mod.BudgetParams))


def _param_index(command: str) -> dict:
    return {spec.name: spec for spec in COMMAND_PARAMS[command]}


def _parse_override(command: str, text: str) -> tuple:
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    key = key.strip().replace("-", "_")
    raw = raw.strip()
    index = _param_index(command)
    if key in index:
        spec = index[key]
        try:
            value = spec.parse(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
        if spec.choices and value not in spec.choices:
            raise ConfigError(f"{key} must be one of {spec.choices}, got {value!r}")
        return key, value
    if command == "budget" and key in _BUDGET_FIELDS:
        try:
            return key, float(raw)
        except ValueError:
            raise ConfigError(f"bad numeric value for {key}: {raw!r}") from None
    raise ConfigError(f"unknown parameter {key!r} for command {command!r}")


def read_config_file(path: Path) -> dict:
    """key = value lines; '#' starts a comment; empty lines ignored."""
    out = {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, raw = (part.strip() for part in body.split("=", 1))
        out[key.replace("-", "_")] = raw
    return out


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict
    seed: int
    output: Optional[Path]
    fmt: str
    # sweep only
    sweep_command: Optional[str] = None
    ranges: tuple = ()
    max_grid: int = 10_000


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockadesim",
        description="heralded entanglement and cluster growth toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=None, help="master RNG seed")
        p.add_argument("--config", type=Path, default=None,
                       help="key = value file with parameter defaults")
        p.add_argument("--output", type=Path, default=None,
                       help="artifact path (stdout when omitted)")
        p.add_argument("--format", dest="fmt", choices=("json", "csv", "text"),
                       default=None, help="artifact format (default json)")

    for command, specs in COMMAND_PARAMS.items():
        p = sub.add_parser(command)
        for spec in specs:
            flag = "--" + spec.name.replace("_", "-")
            kwargs = {"type": spec.parse, "default": None, "help": spec.help}
            if spec.choices:
                kwargs["choices"] = spec.choices
                kwargs.pop("type")
            p.add_argument(flag, dest=spec.name, **kwargs)
        if command == "budget":
            p.add_argument("--set", dest="overrides", action="append", default=[],
                           metavar="FIELD=VALUE", help="override one parameter field")
        add_common(p)

    p = sub.add_parser("sweep")
    p.add_argument("swept", choices=tuple(COMMAND_PARAMS), help="command to sweep")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="fixed parameter for every grid point")
    p.add_argument("--range", dest="ranges", action="append", default=[],
                   metavar="KEY=START:STOP:STEP", help="swept parameter (max 2)")
    p.add_argument("--max-grid", type=int, default=None, help="grid size bound")
    add_common(p)
    return parser


def _resolve_params(command: str, args, config_values: dict) -> dict:
    params = {}
    known = _param_index(command)
    for spec in COMMAND_PARAMS[command]:
        value = getattr(args, spec.name, None)
        if value is None and spec.name in config_values:
            _, value = _parse_override(command, f"{spec.name}={config_values[spec.name]}")
        if value is None:
            value = spec.default
        if spec.choices and value not in spec.choices:
            raise ConfigError(f"{spec.name} must be one of {spec.choices}")
        params[spec.name] = value
    for key in config_values:
        if key in known or key in ("seed", "format", "output"):
            continue
        if command == "budget" and key in _BUDGET_FIELDS:
            params[key] = float(config_values[key])
            continue
        raise ConfigError(f"unknown parameter {key!r} for command {command!r}")
    for text in getattr(args, "overrides", []) or []:
        key, value = _parse_override(command, text)
        params[key] = value
    return params


def _parse_range(command: str, text: str) -> tuple:
    if "=" not in text:
        raise ConfigError(f"expected KEY=START:STOP:STEP, got {text!r}")
    key, spec_text = text.split("=", 1)
    key = key.strip().replace("-", "_")
    index = _param_index(command)
    if key not in index and not (command == "budget" and key in _BUDGET_FIELDS):
        raise ConfigError(f"unknown swept parameter {key!r} for {command!r}")
    parts = spec_text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"range for {key} needs START:STOP:STEP, got {spec_text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"range bounds for {key} must be numeric: {spec_text!r}") from None
    if step <= 0.0 or stop < start:
        raise ConfigError(f"range for {key} needs stop >= start and step > 0")
    count = int((stop - start) / step + 1e-9) + 1
    values = [start + i * step for i in range(count)]
    if key in index and index[key].parse in (int, _positive_int):
        values = [int(round(v)) for v in values]
    return key, tuple(values)


def parse_args(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    config_values = read_config_file(args.config) if args.config else {}

    def global_value(name, fallback):
        cli = getattr(args, name if name != "format" else "fmt")
        if cli is not None:
            return cli
        if name in config_values:
            raw = config_values[name]
            if name == "seed":
                try:
                    return int(raw)
                except ValueError:
                    raise ConfigError(f"seed must be an integer, got {raw!r}") from None
            if name == "format":
                if raw not in ("json", "csv", "text"):
                    raise ConfigError(f"unknown format {raw!r}")
                return raw
            return Path(raw)
        return fallback

    seed = global_value("seed", 0)
    fmt = global_value("format", "json")
    output = global_value("output", None)

    if args.command == "sweep":
        inner = args.swept
        params = _resolve_params(inner, args, config_values)
        ranges = tuple(_parse_range(inner, r) for r in args.ranges)
        if not ranges:
            raise ConfigError("sweep needs at least one --range")
        if len(ranges) > 2:
            raise ConfigError("at most 2 swept parameters")
        names = [r[0] for r in ranges]
        if len(set(names)) != len(names):
            raise ConfigError("swept parameters must be distinct")
        return RunConfig(
            command="sweep",
            params=params,
            seed=seed,
            output=output,
            fmt=fmt,
            sweep_command=inner,
            ranges=ranges,
            max_grid=args.max_grid if args.max_grid is not None else 10_000,
        )
    params = _resolve_params(args.command, args, config_values)
    return RunConfig(command=args.command, params=params, seed=seed,
                     output=output, fmt=fmt)


# ---------------------------------------------------------------------------
# handlers: each returns (results dict, flat row dict)

def _handle_entangle(params: dict, seed: int) -> tuple:
    absorption = AbsorptionModel(params["p_abs"])
    detector = DetectorModel(
        efficiency=params["eta"],
        dark_count_rate_hz=params["gamma_dc"],
        gate_time_s=params["gate_time"],
    )
    policy = protocol_mod.HeraldPolicy(params["policy"])
    outcome = protocol_mod.entangle_pair_exact(absorption, detector, policy)

    def branch_dict(b):
        return {"probability": b.probability, "fidelity": b.fidelity}

    results = {
        "success_probability": outcome.success_probability,
        "fidelity": outcome.heralded_fidelity,
        "up": branch_dict(outcome.up),
        "down": branch_dict(outcome.down),
        "sampled": None,
    }
    if params["trials"]:
        stats = protocol_mod.entangle_pair_sampled(
            absorption, detector, seed, params["trials"], policy)
        results["sampled"] = {
            "trials": stats.trials,
            "herald_rate": stats.herald_rate,
            "n_both": stats.n_both,
            "n_up_only": stats.n_up_only,
            "n_down_only": stats.n_down_only,
            "n_none": stats.n_none,
        }
    row = {
        "eta": params["eta"],
        "p_abs": params["p_abs"],
        "gamma_dc": params["gamma_dc"],
        "policy": params["policy"],
        "success_probability": outcome.success_probability,
        "fidelity": outcome.heralded_fidelity,
        "sampled_herald_rate": results["sampled"]["herald_rate"] if results["sampled"] else "",
    }
    return results, row


def _handle_ghz(params: dict, seed: int) -> tuple:
    qubits = params["qubits"]
    eta = params["eta"]
    formula = protocol_mod.ghz_success_probability(qubits, eta)
    circuit = None
    if qubits == 4:
        outcome = protocol_mod.ghz4_exact(
            AbsorptionModel(params["p_abs"]),
            DetectorModel(efficiency=eta),
        )
        circuit = {
            "success_probability": outcome.success_probability,
            "accepted": [
                {
                    "pattern": repr(b.pattern),
                    "probability": b.probability,
                    "fidelity": b.fidelity,
                }
                for b in outcome.accepted
            ],
        }
    results = {
        "qubits": qubits,
        "eta": eta,
        "success_probability": formula,
        "circuit": circuit,
    }
    row = {
        "qubits": qubits,
        "eta": eta,
        "p_abs": params["p_abs"],
        "success_probability": formula,
        "circuit_success_probability": circuit["success_probability"] if circuit else "",
    }
    return results, row


def _handle_budget(params: dict, seed: int) -> tuple:
    base = budget_mod.preset(params["preset"])
    overrides = {k: v for k, v in params.items() if k != "preset"}
    if overrides:
        base = replace(base, **overrides)
    report = budget_mod.budget_report(base)
    results = report.to_json_dict()
    results["preset"] = params["preset"]
    row = {
        "preset": params["preset"],
        **{k: v for k, v in results["derived"].items()},
        "dominant_error": report.dominant_error,
    }
    return results, row


def _handle_grow(params: dict, seed: int) -> tuple:
    policy = growth_mod.GrowthPolicy(
        block_size=params["block_size"],
        target_size=params["target"],
        pairing=growth_mod.PairingRule(params["pairing"]),
        step_cap=params["cap"],
    )
    stats = growth_mod.simulate_growth(policy, params["eta"], params["eta_prime"],
                                       seed, params["trials"])
    results = stats.to_json_dict()
    markov = None
    if policy.target_size <= 16:
        cost = growth_mod.expected_cost_markov(policy, params["eta"], params["eta_prime"])
        markov = {
            "blocks": cost.blocks,
            "link_attempts": cost.link_attempts,
            "generation_attempts": cost.generation_attempts,
            "steps": cost.steps,
        }
    results["markov"] = markov
    row = {
        "block_size": policy.block_size,
        "target_size": policy.target_size,
        "eta": params["eta"],
        "eta_prime": params["eta_prime"],
        "trials": params["trials"],
        "mean_blocks": stats.mean_blocks,
        "mean_link_attempts": stats.mean_link_attempts,
        "success_fraction": stats.success_fraction,
        "markov_blocks": markov["blocks"] if markov else "",
    }
    return results, row


HANDLERS = {
    "entangle": _handle_entangle,
    "ghz": _handle_ghz,
    "budget": _handle_budget,
    "grow": _handle_grow,
}


def _run_sweep(config: RunConfig) -> list:
    names = [name for name, _ in config.ranges]
    grids = [values for _, values in config.ranges]
    size = 1
    for g in grids:
        size *= len(g)
    if size > config.max_grid:
        raise GridBoundError(f"sweep grid has {size} points, bound is {config.max_grid}")
    handler = HANDLERS[config.sweep_command]
    rows = []
    if len(grids) == 1:
        points = [(v,) for v in grids[0]]
    else:
        points = [(a, b) for a in grids[0] for b in grids[1]]
    for point in points:
        params = dict(config.params)
        params.update(zip(names, point))
        _, row = handler(params, config.seed)
        rows.append(row)
    return rows


def run(config: RunConfig) -> str:
    """Execute a parsed RunConfig and render the artifact text."""
    if config.command == "sweep":
        rows = _run_sweep(config)
        if config.fmt == "json":
            envelope = {
                "schema_version": SCHEMA_VERSION,
                "command": f"sweep {config.sweep_command}",
                "seed": config.seed,
                "rows": rows,
            }
            return json.dumps(envelope, indent=2, sort_keys=True) + "\n"
        if config.fmt == "csv":
            return _render_csv(rows)
        return _render_rows_text(rows)

    handler = HANDLERS[config.command]
    results, row = handler(config.params, config.seed)
    if config.fmt == "json":
        envelope = {
            "schema_version": SCHEMA_VERSION,
            "command": config.command,
            "seed": config.seed,
            "params": _jsonable(config.params),
            "results": results,
        }
        return json.dumps(envelope, indent=2, sort_keys=True) + "\n"
    if config.fmt == "csv":
        return _render_csv([row])
    if config.command == "budget":
        base = budget_mod.preset(config.params["preset"])
        overrides = {k: v for k, v in config.params.items() if k != "preset"}
        if overrides:
            base = replace(base, **overrides)
        return budget_mod.render_text(budget_mod.budget_report(base))
    return _render_result_text(config, results)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def _render_csv(rows: list) -> str:
    if not rows:
        return "schema_version\n"
    buf = io.StringIO()
    names = ["schema_version"] + list(rows[0])
    writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({"schema_version": SCHEMA_VERSION, **row})
    return buf.getvalue()


def _flatten(prefix: str, value, out: list):
    if isinstance(value, dict):
        for k in value:
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], out)
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, value))


def _render_result_text(config: RunConfig, results: dict) -> str:
    pairs = []
    _flatten("", results, pairs)
    lines = [f"blockadesim {config.command} (schema_version={SCHEMA_VERSION}, seed={config.seed})"]
    lines += [f"{key} = {value}" for key, value in pairs]
    return "\n".join(lines) + "\n"


def _render_rows_text(rows: list) -> str:
    lines = [f"blockadesim sweep (schema_version={SCHEMA_VERSION})"]
    for row in rows:
        lines.append("  ".join(f"{k}={v}" for k, v in row.items()))
    return "\n".join(lines) + "\n"


def _write_atomic(path: Path, text: str):
    path = Path(path)
    if not path.is_absolute():
        base = os.environ.get(OUTPUT_DIR_ENV)
        if base:
            path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def main(argv=None) -> int:
    try:
        config = parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    try:
        text = run(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GridBoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if config.output is None:
        sys.stdout.write(text)
    else:
        _write_atomic(config.output, text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
