"""Command-line front end.

Subcommands:
    run <config.json>       build the scenario, sweep the grid, write the
                            field dump and a residual report
    validate <config.json>  schema and construction checks only, no sweep
    examples                list the built-in scenario configs

Exit codes: 0 verification passed, 1 residual failure, 2 config or schema
error, 3 construction error. Complex scalars in configs are numbers or
two-element [re, im] arrays; matrices are row-major nested arrays. Output
files are deterministic: rerunning an identical config byte-matches.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import dirac, dsi, gnoe, loewner, schrodinger, verify
from .errors import ConfigError, ConstructionError, NoSolutionError

__all__ = ["main", "main_entry", "catalog"]

_TOP_KEYS = {"description", "family", "params", "grid", "verify", "output", "seed"}
_FORMATS = ("csv", "json")


# -- config parsing ----------------------------------------------------------


def _parse_complex(value, name: str) -> complex:
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be a number or [re, im] pair")
    if isinstance(value, (int, float)):
        return complex(value)
    if (
        isinstance(value, list)
        and len(value) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        return complex(value[0], value[1])
    raise ConfigError(f"{name} must be a number or [re, im] pair")


def _parse_matrix(value, name: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{name} must be a non-empty nested array")
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list) or not row:
            raise ConfigError(f"{name}[{i}] must be a non-empty array")
        rows.append([_parse_complex(v, f"{name}[{i}][{j}]") for j, v in enumerate(row)])
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ConfigError(f"{name} rows must all have the same length")
    return np.array(rows, dtype=complex)


def _parse_vector(value, name: str) -> list[complex]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{name} must be a non-empty array")
    return [_parse_complex(v, f"{name}[{j}]") for j, v in enumerate(value)]


def _parse_real_vector(value, name: str) -> list[float]:
    out = []
    for z in _parse_vector(value, name):
        if z.imag != 0.0:
            raise ConfigError(f"{name} entries must be real")
        out.append(z.real)
    return out


def _parse_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer")
    return value


def _take(params: Mapping, name: str, allowed: set) -> None:
    extra = set(params) - allowed
    if extra:
        raise ConfigError(f"unknown {name} keys: {sorted(extra)}")


def _opt_matrix(params: Mapping, key: str) -> Optional[np.ndarray]:
    return _parse_matrix(params[key], key) if key in params else None


def _rng_for(seed, builder: str) -> np.random.Generator:
    if seed is None:
        raise ConfigError(f"builder {builder!r} needs a top-level seed")
    return np.random.default_rng(_parse_int(seed, "seed"))


# -- family adapters ---------------------------------------------------------


def _build_dirac(params: Mapping, seed):
    builder = params.get("builder", "general")
    if builder == "two_channel":
        _take(params, "params", {"builder", "g1", "n1", "d", "c", "s0"})
        for key in ("g1", "n1", "d"):
            if key not in params:
                raise ConfigError(f"two_channel builder needs {key!r}")
        return dirac.build_two_channel(
            _parse_matrix(params["g1"], "g1"),
            _parse_int(params["n1"], "n1"),
            _parse_vector(params["d"], "d"),
            c=_opt_matrix(params, "c"),
            s0=_opt_matrix(params, "s0"),
        )
    if builder == "general":
        _take(params, "params", {"builder", "a1", "a2", "chat", "c", "s0"})
        for key in ("a1", "a2", "chat"):
            if key not in params:
                raise ConfigError(f"general builder needs {key!r}")
        return dirac.build_dirac(
            _parse_matrix(params["a1"], "a1"),
            _parse_matrix(params["a2"], "a2"),
            _parse_matrix(params["chat"], "chat"),
            c=_opt_matrix(params, "c"),
            s0=_opt_matrix(params, "s0"),
        )
    if builder == "random":
        _take(params, "params", {"builder"})
        return dirac.random_scenario(_rng_for(seed, builder))
    raise ConfigError(f"unknown dirac builder {builder!r}")


def _build_schrodinger(params: Mapping, seed):
    builder = params.get("builder", "general")
    if builder == "singular_line":
        _take(params, "params", {"builder", "beta", "r11", "im_r12", "b", "d"})
        kwargs = {}
        for key in ("beta", "r11", "im_r12", "d"):
            if key in params:
                z = _parse_complex(params[key], key)
                if z.imag != 0.0:
                    raise ConfigError(f"{key} must be real")
                kwargs[key] = z.real
        if "b" in params:
            kwargs["b"] = _parse_complex(params["b"], "b")
        return schrodinger.build_singular_line_example(**kwargs)[0]
    if builder == "rational":
        _take(params, "params", {"builder", "mu0"})
        kwargs = {}
        if "mu0" in params:
            kwargs["mu0"] = _parse_complex(params["mu0"], "mu0")
        return schrodinger.build_rational_example(**kwargs)[0]
    if builder == "nonsingular":
        _take(params, "params", {"builder", "mu0", "d"})
        kwargs = {}
        if "mu0" in params:
            kwargs["mu0"] = _parse_complex(params["mu0"], "mu0")
        if "d" in params:
            z = _parse_complex(params["d"], "d")
            if z.imag != 0.0:
                raise ConfigError("d must be real")
            kwargs["d"] = z.real
        return schrodinger.build_nonsingular_example(**kwargs)[0]
    if builder == "general":
        _take(params, "params", {"builder", "a", "chat", "c", "s0"})
        for key in ("a", "chat"):
            if key not in params:
                raise ConfigError(f"general builder needs {key!r}")
        return schrodinger.build_schrodinger(
            _parse_matrix(params["a"], "a"),
            _parse_matrix(params["chat"], "chat"),
            c=_opt_matrix(params, "c"),
            s0=_opt_matrix(params, "s0"),
        )
    if builder == "random":
        _take(params, "params", {"builder"})
        return schrodinger.random_scenario(_rng_for(seed, builder))
    raise ConfigError(f"unknown schrodinger builder {builder!r}")


def _build_loewner(params: Mapping, seed):
    builder = params.get("builder", "general")
    if builder == "general":
        _take(
            params,
            "params",
            {"builder", "d", "a1", "a2", "c1", "c2", "chat1", "chat2", "allow_repeated"},
        )
        for key in ("d", "a1", "a2", "c1", "c2", "chat1", "chat2"):
            if key not in params:
                raise ConfigError(f"general builder needs {key!r}")
        allow = params.get("allow_repeated", False)
        if not isinstance(allow, bool):
            raise ConfigError("allow_repeated must be a boolean")
        return loewner.build_loewner(
            _parse_real_vector(params["d"], "d"),
            _parse_matrix(params["a1"], "a1"),
            _parse_matrix(params["a2"], "a2"),
            _parse_matrix(params["c1"], "c1"),
            _parse_matrix(params["c2"], "c2"),
            _parse_matrix(params["chat1"], "chat1"),
            _parse_matrix(params["chat2"], "chat2"),
            allow_repeated=allow,
        )
    if builder == "random":
        _take(params, "params", {"builder"})
        return loewner.random_scenario(_rng_for(seed, builder))
    raise ConfigError(f"unknown loewner builder {builder!r}")


def _build_dsi(params: Mapping, seed):
    builder = params.get("builder", "general")
    if builder == "rational":
        _take(params, "params", {"builder", "chat1_head", "chat2_head", "c1", "c2", "s0"})
        kwargs = {}
        for key in ("chat1_head", "chat2_head"):
            if key in params:
                kwargs[key] = _parse_complex(params[key], key)
        return dsi.build_rational_dsi(
            c1=_opt_matrix(params, "c1"),
            c2=_opt_matrix(params, "c2"),
            s0=_opt_matrix(params, "s0"),
            **kwargs,
        )
    if builder == "general":
        _take(
            params,
            "params",
            {"builder", "a1", "a2", "c1", "c2", "chat1", "chat2", "s0"},
        )
        for key in ("a1", "a2", "chat1", "chat2"):
            if key not in params:
                raise ConfigError(f"general builder needs {key!r}")
        return dsi.build_dsi(
            _parse_matrix(params["a1"], "a1"),
            _parse_matrix(params["a2"], "a2"),
            _opt_matrix(params, "c1"),
            _opt_matrix(params, "c2"),
            _parse_matrix(params["chat1"], "chat1"),
            _parse_matrix(params["chat2"], "chat2"),
            s0=_opt_matrix(params, "s0"),
        )
    if builder == "random":
        _take(params, "params", {"builder"})
        return dsi.random_scenario(_rng_for(seed, builder))
    raise ConfigError(f"unknown dsi builder {builder!r}")


def _build_gnoe(params: Mapping, seed):
    builder = params.get("builder", "general")
    if builder == "general":
        _take(params, "params", {"builder", "a", "chat", "c", "d", "dtilde", "b", "s0"})
        for key in ("a", "chat", "d", "dtilde", "b"):
            if key not in params:
                raise ConfigError(f"general builder needs {key!r}")
        return gnoe.build_gnoe(
            _parse_matrix(params["a"], "a"),
            _parse_matrix(params["chat"], "chat"),
            _opt_matrix(params, "c"),
            _parse_real_vector(params["d"], "d"),
            _parse_real_vector(params["dtilde"], "dtilde"),
            _parse_real_vector(params["b"], "b"),
            s0=_opt_matrix(params, "s0"),
        )
    if builder == "random":
        _take(params, "params", {"builder"})
        return gnoe.random_scenario(_rng_for(seed, builder))
    raise ConfigError(f"unknown gnoe builder {builder!r}")


def _loewner_part(sc, idx: int) -> Callable:
    def field(point):
        out = loewner.eval_loewner(sc, point)
        return None if out is None else out[idx]

    return field


def _dsi_part(sc, idx: int) -> Callable:
    def field(point):
        out = dsi.fields_uq(sc, point)
        return None if out is None else out[idx]

    return field


_FAMILIES: dict = {
    "dirac": {
        "vars": dirac.VAR_NAMES,
        "build": _build_dirac,
        "verify": dirac.verify_scenario,
        "fields": {
            "potential": lambda sc: (lambda p: dirac.potential(sc, p)),
            "wave": lambda sc: (lambda p: dirac.wave(sc, p)),
        },
    },
    "schrodinger": {
        "vars": schrodinger.VAR_NAMES,
        "build": _build_schrodinger,
        "verify": schrodinger.verify_scenario,
        "fields": {
            "potential": lambda sc: (lambda p: schrodinger.potential(sc, p)),
            "wave": lambda sc: (lambda p: schrodinger.wave(sc, p)),
        },
    },
    "loewner": {
        "vars": loewner.VAR_NAMES,
        "build": _build_loewner,
        "verify": loewner.verify_scenario,
        "fields": {
            "solution": lambda sc: _loewner_part(sc, 0),
            "coefficient": lambda sc: _loewner_part(sc, 1),
        },
    },
    "dsi": {
        "vars": dsi.VAR_NAMES,
        "build": _build_dsi,
        "verify": dsi.verify_scenario,
        "fields": {
            "u": lambda sc: _dsi_part(sc, 0),
            "q1": lambda sc: _dsi_part(sc, 1),
            "q2": lambda sc: _dsi_part(sc, 2),
        },
    },
    "gnoe": {
        "vars": gnoe.VAR_NAMES,
        "build": _build_gnoe,
        "verify": gnoe.verify_scenario,
        "fields": {"xi": lambda sc: (lambda p: gnoe.xi(sc, p))},
    },
}

# Default per-channel tolerances, mirrored from the family modules so config
# overrides can be validated before any sweep starts.
_DEFAULT_TOLERANCES = {
    "dirac": {"wave_analytic": 1e-9, "wave_fd": 1e-6},
    "schrodinger": {"wave_analytic": 1e-9, "wave_fd": 1e-6},
    "loewner": {
        "system_analytic": 1e-9,
        "premise_1": 1e-11,
        "premise_2": 1e-11,
        "system_fd": 1e-6,
    },
    "dsi": {
        "premise_x": 1e-12,
        "premise_t": 1e-12,
        "evolution_fd": 1e-5,
        "coupling1_fd": 1e-5,
        "coupling2_fd": 1e-5,
    },
    "gnoe": {
        "system_analytic": 1e-9,
        "system_fd": 1e-6,
        "premise_x": 1e-12,
        "premise_t": 1e-12,
        "reduction": 1e-12,
    },
}


# -- schema ------------------------------------------------------------------


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(config) - _TOP_KEYS
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    return config


def _family_entry(config: Mapping) -> tuple[str, dict]:
    family = config.get("family")
    if family not in _FAMILIES:
        raise ConfigError(
            f"family must be one of {sorted(_FAMILIES)}, got {family!r}"
        )
    return family, _FAMILIES[family]


def _grid_from_config(config: Mapping, var_names: Sequence[str]) -> verify.Grid:
    spec = config.get("grid")
    if not isinstance(spec, list):
        raise ConfigError("grid must be an array of axis objects")
    if len(spec) != len(var_names):
        raise ConfigError(f"grid must list the variables {list(var_names)} in order")
    axes = []
    for entry, expected in zip(spec, var_names):
        if not isinstance(entry, dict) or set(entry) != {"name", "min", "max", "count"}:
            raise ConfigError("each grid axis needs exactly name, min, max, count")
        if entry["name"] != expected:
            raise ConfigError(
                f"grid axes must be {list(var_names)} in order, got {entry['name']!r}"
            )
        count = entry["count"]
        if isinstance(count, bool) or not isinstance(count, int) or count < 2:
            raise ConfigError("grid counts must be integers >= 2")
        lo, hi = entry["min"], entry["max"]
        for v in (lo, hi):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError("grid min/max must be numbers")
        if not lo < hi:
            raise ConfigError("grid min must be strictly below max")
        axes.append(verify.Axis(expected, float(lo), float(hi), count))
    return verify.Grid(tuple(axes))


def _verify_settings(config: Mapping, family: str) -> tuple[float, int, dict]:
    vcfg = config.get("verify", {})
    if not isinstance(vcfg, dict):
        raise ConfigError("verify must be an object")
    _take(vcfg, "verify", {"h", "accuracy", "tolerance"})
    h = vcfg.get("h", verify.DEFAULT_H)
    if isinstance(h, bool) or not isinstance(h, (int, float)) or h <= 0:
        raise ConfigError("verify.h must be a positive number")
    accuracy = vcfg.get("accuracy", verify.DEFAULT_ACCURACY)
    if isinstance(accuracy, bool) or accuracy not in (2, 4):
        raise ConfigError("verify.accuracy must be 2 or 4")
    tolerances = dict(_DEFAULT_TOLERANCES[family])
    tol_cfg = vcfg.get("tolerance")
    if tol_cfg is not None:
        if isinstance(tol_cfg, (int, float)) and not isinstance(tol_cfg, bool):
            tolerances = {name: float(tol_cfg) for name in tolerances}
        elif isinstance(tol_cfg, dict):
            unknown = set(tol_cfg) - set(tolerances)
            if unknown:
                raise ConfigError(
                    f"unknown residual channels for {family}: {sorted(unknown)}"
                )
            for name, value in tol_cfg.items():
                if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
                    raise ConfigError("tolerances must be positive numbers")
                tolerances[name] = float(value)
        else:
            raise ConfigError("verify.tolerance must be a number or an object")
    return float(h), int(accuracy), tolerances


def _output_settings(config: Mapping, family_fields: Mapping) -> tuple[list[str], str, str]:
    ocfg = config.get("output")
    if not isinstance(ocfg, dict):
        raise ConfigError("output must be an object")
    _take(ocfg, "output", {"fields", "format", "path"})
    fields = ocfg.get("fields")
    if not isinstance(fields, list) or not fields:
        raise ConfigError("output.fields must be a non-empty array")
    unknown = [f for f in fields if f not in family_fields]
    if unknown:
        raise ConfigError(
            f"unknown output fields {unknown}; available: {sorted(family_fields)}"
        )
    if len(set(fields)) != len(fields):
        raise ConfigError("output.fields must not repeat")
    fmt = ocfg.get("format")
    if fmt not in _FORMATS:
        raise ConfigError(f"output.format must be one of {_FORMATS}")
    path = ocfg.get("path")
    if not isinstance(path, str) or not path:
        raise ConfigError("output.path must be a non-empty string")
    return list(fields), fmt, path


# -- output writers ----------------------------------------------------------


def _encode_matrix(m: np.ndarray) -> list:
    return [
        [[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(m)
    ]


def _field_shapes(field_fns: Mapping[str, Callable], grid: verify.Grid) -> dict:
    for point in grid.points():
        probe = {name: fn(point) for name, fn in field_fns.items()}
        if all(v is not None for v in probe.values()):
            return {name: np.atleast_2d(v).shape for name, v in probe.items()}
    raise ConstructionError("every grid point is singular; nothing to export")


def _write_csv(path: Path, grid: verify.Grid, names: list, field_fns: Mapping, shapes: Mapping) -> None:
    header = [ax.name for ax in grid.axes]
    for name in names:
        rows, cols = shapes[name]
        for i in range(rows):
            for j in range(cols):
                header.extend((f"{name}[{i}][{j}].re", f"{name}[{i}][{j}].im"))
    header.append("singular")
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for point in grid.points():
            row = [repr(float(v)) for v in point]
            values = [field_fns[name](point) for name in names]
            if any(v is None for v in values):
                pad = sum(2 * shapes[n][0] * shapes[n][1] for n in names)
                writer.writerow(row + [""] * pad + ["1"])
                continue
            for value in values:
                for entry_row in np.atleast_2d(value):
                    for z in entry_row:
                        row.extend((repr(float(z.real)), repr(float(z.imag))))
            writer.writerow(row + ["0"])


def _write_json(path: Path, grid: verify.Grid, names: list, field_fns: Mapping) -> None:
    records = []
    for point in grid.points():
        entry: dict = {"point": [float(v) for v in point]}
        values = {name: field_fns[name](point) for name in names}
        if any(v is None for v in values.values()):
            entry["singular"] = True
        else:
            entry["singular"] = False
            entry["values"] = {n: _encode_matrix(v) for n, v in values.items()}
        records.append(entry)
    payload = {"grid": grid.spec(), "fields": names, "points": records}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- subcommands -------------------------------------------------------------


def _prepare(path: str):
    config = _load_config(path)
    family, entry = _family_entry(config)
    params = config.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    grid = _grid_from_config(config, entry["vars"])
    h, accuracy, tolerances = _verify_settings(config, family)
    fields, fmt, out_path = _output_settings(config, entry["fields"])
    scenario = entry["build"](params, config.get("seed"))
    return config, family, entry, scenario, grid, h, accuracy, tolerances, fields, fmt, out_path


def _cmd_run(path: str) -> int:
    (
        config,
        family,
        entry,
        scenario,
        grid,
        h,
        accuracy,
        tolerances,
        fields,
        fmt,
        out_path,
    ) = _prepare(path)
    report = entry["verify"](
        scenario, grid=grid, tolerances=tolerances, h=h, accuracy=accuracy
    )

    field_fns = {name: entry["fields"][name](scenario) for name in fields}
    dump_path = Path(out_path)
    if fmt == "csv":
        shapes = _field_shapes(field_fns, grid)
        _write_csv(dump_path, grid, fields, field_fns, shapes)
    else:
        _write_json(dump_path, grid, fields, field_fns)

    report_path = dump_path.with_suffix(".report.json")
    payload = {
        "config": config,
        "family": family,
        "output": {"fields": fields, "format": fmt, "path": out_path},
        "report": report.to_dict(),
        "verify": {"h": h, "accuracy": accuracy},
    }
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    status = "pass" if report.passed else "FAIL"
    print(
        f"{family}: {status}, {report.total_points} points, "
        f"{report.masked_count} singular, max relative residual "
        f"{report.max_relative:.3e}"
    )
    print(f"wrote {dump_path} and {report_path}")
    return 0 if report.passed else 1


def _cmd_validate(path: str) -> int:
    config, family, entry, scenario, grid, *_ = _prepare(path)
    print(f"ok: {family} scenario, grid of {grid.size} points")
    return 0


def catalog() -> list[tuple[str, str, str]]:
    """(name, description, path) for every shipped config, sorted by name."""
    root = resources.files("pseudoexp") / "configs"
    entries = []
    for item in sorted(root.iterdir(), key=lambda p: p.name):
        if not item.name.endswith(".json"):
            continue
        data = json.loads(item.read_text())
        entries.append(
            (item.name[: -len(".json")], data.get("description", ""), str(item))
        )
    return entries


def _cmd_examples() -> int:
    for name, description, path in catalog():
        print(f"{name}: {description}")
        print(f"    {path}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pseudoexp",
        description="Build and verify explicit wave-equation solutions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a scenario config and write artifacts")
    run_p.add_argument("config", help="path to a JSON scenario config")
    val_p = sub.add_parser("validate", help="schema and construction checks only")
    val_p.add_argument("config", help="path to a JSON scenario config")
    sub.add_parser("examples", help="list the built-in scenario configs")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code else 0
    try:
        if args.command == "run":
            return _cmd_run(args.config)
        if args.command == "validate":
            return _cmd_validate(args.config)
        return _cmd_examples()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConstructionError, NoSolutionError) as exc:
        print(f"construction error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def main_entry() -> None:
    raise SystemExit(main(sys.argv[1:]))


if __name__ == "__main__":
    main_entry()
