"""Command-line front end: ``cim-mimo {ber,throughput,trajectory,oracle-compare}``.

Options come from flags and, optionally, a flat ``key=value`` config file
(``--config``); flags win. Keys are the long flag names without dashes,
e.g. ``nt=16`` or ``snr=0:4:32``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .link import (
    ExperimentConfig,
    amc_experiment,
    ber_experiment,
    oracle_comparison,
    random_instance,
    trajectory_capture,
    worker_count,
)
from .detectors import ORACLE_MAX_BITS
from .mimo import make_constellation

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(Exception):
    pass


def parse_snr_grid(text: str) -> tuple[float, ...]:
    """``start:step:stop`` (inclusive), a comma list, or a single value."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad SNR grid {text!r}; expected start:step:stop")
        start, step, stop = map(float, parts)
        if step <= 0 or stop < start:
            raise ValueError(f"bad SNR grid {text!r}")
        n = (stop - start) / step
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"SNR grid {text!r}: step does not divide the range")
        return tuple(float(start + k * step) for k in range(int(round(n)) + 1))
    return tuple(float(v) for v in text.split(","))


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _delta(text: str) -> tuple[int, ...]:
    vals = _int_list(text)
    if len(vals) == 1:
        r = vals[0]
        return tuple(range(-r, r + 1, 2))
    return vals


# key -> (converter, help)
OPTIONS = {
    "nt": (int, "number of users / transmit antennas"),
    "nr": (int, "number of receive antennas"),
    "mod": (int, "modulation order M (2, 4, 16, 64, 256)"),
    "snr": (parse_snr_grid, "SNR grid in dB: start:step:stop, list, or value"),
    "bits": (int, "total bits per SNR point (BER)"),
    "na": (int, "anneals per instance"),
    "seed": (int, "master seed"),
    "delta": (_delta, "search radius (2, 4, ...) or explicit level list"),
    "detectors": (_str_list, "comma list of MMSE, DI, DIRECT, ORACLE"),
    "blocks": (int, "coded blocks per (modulation, rate, SNR)"),
    "block_len": (int, "information bits per coded block"),
    "mods": (_int_list, "AMC modulation menu"),
    "rates": (_str_list, "AMC code-rate menu"),
    "instances": (int, "instances for oracle-compare"),
    "formulations": (_str_list, "trajectory formulations (DI, DIRECT)"),
    "out": (str, "output CSV path (default: stdout)"),
}

COMMAND_KEYS = {
    "ber": ["nt", "nr", "mod", "snr", "bits", "na", "seed", "delta", "detectors", "out"],
    "throughput": ["nt", "nr", "snr", "blocks", "block_len", "na", "seed", "delta", "detectors",
                   "mods", "rates", "out"],
    "trajectory": ["nt", "nr", "mod", "snr", "seed", "delta", "formulations", "out"],
    "oracle-compare": ["nt", "nr", "mod", "snr", "na", "seed", "delta", "instances", "out"],
}


def read_config_file(path: str) -> dict[str, str]:
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge config-file values and flags into typed settings."""
    allowed = COMMAND_KEYS[command]
    raw: dict[str, str] = {}
    if args.config:
        raw.update(read_config_file(args.config))
        for key in raw:
            if key not in allowed:
                raise ConfigError(f"unknown config key '{key}' for {command}")
    for key in allowed:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    settings = {}
    for key, text in raw.items():
        conv = OPTIONS[key][0]
        try:
            settings[key] = conv(text)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value for '{key}': {text!r} ({exc})") from None
    if "mod" in allowed and "mod" not in settings:
        raise ConfigError("modulation required")
    return settings


def build_config(settings: dict, command: str = "ber") -> ExperimentConfig:
    cfg = ExperimentConfig()
    mapping = {
        "nt": "n_tx", "nr": "n_rx", "mod": "modulation", "snr": "snr_grid_db", "bits": "total_bits",
        "na": "n_anneals", "seed": "master_seed", "delta": "delta_levels", "detectors": "detectors",
        "blocks": "blocks", "block_len": "block_len", "mods": "modulations", "rates": "code_rates",
        "instances": "instances",
    }
    if "nt" in settings and "nr" not in settings:
        settings["nr"] = settings["nt"]
    for key, attr in mapping.items():
        if key in settings:
            setattr(cfg, attr, settings[key])
    if "detectors" in settings:
        cfg.detectors = tuple(d.upper() for d in cfg.detectors)
    checks = [
        ("nt", lambda: cfg.n_tx >= 1), ("nr", lambda: cfg.n_rx >= cfg.n_tx),
        ("bits", lambda: cfg.total_bits >= 1), ("na", lambda: cfg.n_anneals >= 1),
        ("blocks", lambda: cfg.blocks >= 1), ("block_len", lambda: cfg.block_len >= 1),
        ("instances", lambda: cfg.instances >= 1), ("seed", lambda: cfg.master_seed >= 0),
    ]
    for key, ok in checks:
        if not ok():
            raise ConfigError(f"invalid value for '{key}'")
    for key, fn in [("mod", lambda: make_constellation(cfg.modulation)),
                    ("mods", lambda: [make_constellation(m) for m in cfg.modulations]),
                    ("delta", lambda: cfg.space),
                    ("detectors", cfg.validate), ("rates", cfg.validate)]:
        try:
            fn()
        except ValueError as exc:
            raise ConfigError(f"invalid value for '{key}': {exc}") from None
    uses_oracle = command == "oracle-compare" or (command == "ber" and "ORACLE" in cfg.detectors)
    if uses_oracle and cfg.n_tx * make_constellation(cfg.modulation).bits_per_symbol > ORACLE_MAX_BITS:
        raise ConfigError(f"invalid value for 'nt': oracle needs nt*log2(mod) <= {ORACLE_MAX_BITS}")
    return cfg


def _write_csv(header, rows, out: str | None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    text = buf.getvalue()
    if out:
        Path(out).write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.write(text)
    return text


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_manifest(command: str, settings: dict, cfg: ExperimentConfig, started: str, out: str | None):
    if not out:
        return
    manifest = {
        "command": command,
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()},
        "seed": cfg.master_seed,
        "version": __version__,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": [str(out)],
    }
    Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def cmd_ber(cfg: ExperimentConfig, settings: dict):
    rows = ber_experiment(cfg)
    _write_csv(["detector", "modulation", "snr_db", "ber", "bits", "seed"],
               [[r.detector, r.modulation, _fmt(r.snr_db), _fmt(r.ber), r.bits, r.seed] for r in rows],
               settings.get("out"))


def cmd_throughput(cfg: ExperimentConfig, settings: dict):
    rows = amc_experiment(cfg)
    _write_csv(["detector", "modulation", "code_rate", "snr_db", "bler", "throughput", "seed"],
               [[r.detector, r.modulation, r.code_rate, _fmt(r.snr_db), _fmt(r.bler), _fmt(r.throughput), r.seed]
                for r in rows],
               settings.get("out"))


def cmd_trajectory(cfg: ExperimentConfig, settings: dict):
    c = make_constellation(cfg.modulation)
    _, cs = random_instance(cfg, c, cfg.snr_grid_db[0])
    forms = settings.get("formulations", ("DI", "DIRECT"))
    traces = trajectory_capture(cs, c, [f.upper() for f in forms], cfg.params, cfg.master_seed, cfg.space)
    rows = []
    for name, tr in traces.items():
        for step in range(tr.t.size):
            for user in range(cs.n_tx):
                rows.append([name, step, _fmt(tr.t[step]), user, _fmt(tr.iq[step, user, 0]), _fmt(tr.iq[step, user, 1])])
    _write_csv(["formulation", "step", "t", "user", "i_value", "q_value"], rows, settings.get("out"))


def cmd_oracle_compare(cfg: ExperimentConfig, settings: dict):
    rows = oracle_comparison(cfg)
    _write_csv(["instance", "obj_mmse", "obj_di", "obj_oracle", "match"],
               [[r.instance, _fmt(r.obj_mmse), _fmt(r.obj_di), _fmt(r.obj_oracle), str(r.match).lower()]
                for r in rows],
               settings.get("out"))
    rate = float(np.mean([r.match for r in rows])) if rows else 0.0
    summary = f"match rate: {rate:.4f} ({sum(r.match for r in rows)}/{len(rows)})\n"
    (sys.stdout if settings.get("out") else sys.stderr).write(summary)


COMMANDS = {
    "ber": cmd_ber,
    "throughput": cmd_throughput,
    "trajectory": cmd_trajectory,
    "oracle-compare": cmd_oracle_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cim-mimo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, keys in COMMAND_KEYS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value config file")
        for key in keys:
            p.add_argument("--" + key.replace("_", "-"), dest=key, help=OPTIONS[key][1])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = datetime.now(timezone.utc).isoformat()
    try:
        worker_count()
    except ValueError as exc:
        print(f"cim-mimo: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        settings = resolve(args.command, args)
        cfg = build_config(settings, args.command)
    except ConfigError as exc:
        print(f"cim-mimo {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](cfg, settings)
        _write_manifest(args.command, settings, cfg, started, settings.get("out"))
    except Exception as exc:  # noqa: BLE001 - surface any failure as exit 3
        print(f"cim-mimo {args.command}: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
