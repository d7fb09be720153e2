"""Command-line front end: ``mimoauth sweep | validate | pair``.

Configuration is an INI file with sections ``[building]``, ``[grid]``,
``[radio]`` and optionally ``[sweep]`` and ``[validate]``. Numbers may carry a
unit suffix (``5 GHz``, ``0.25 MHz``, ``0.1 mW``). Exit codes: 0 success,
1 validation disagreement, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import os
import re
import sys
import tempfile
import time
from dataclasses import asdict, dataclass

from . import __version__
from .detector import BOLTZMANN_290K_MW_PER_HZ, RadioConfig
from .experiment import (
    ScenarioGrid,
    SweepSpec,
    grid_points,
    monte_carlo_rates,
    pair_summary,
    run_sweep,
)
from .raychannel import BuildingBox

log = logging.getLogger("mimoauth")

EXIT_OK, EXIT_DISAGREE, EXIT_USAGE = 0, 1, 2
CSV_HEADER = ("param", "value", "config_label", "avg_miss_rate", "security_gain")

_UNITS = {
    "hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9,
    "mw": 1.0, "w": 1e3, "uw": 1e-3,
    "m": 1.0, "cm": 1e-2,
    "db": None,
}
_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)\s*$")


class ConfigFileError(Exception):
    """Problems found while reading a configuration file (possibly several)."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


# (section, key, kind, default); a default of ... marks the key as required
SCHEMA = [
    ("building", "length_m", "float", ...),
    ("building", "width_m", "float", ...),
    ("building", "height_m", "float", ...),
    ("building", "reflection_coeff", "float", -0.7),
    ("building", "excess_loss_db", "float", 0.0),
    ("building", "max_order", "int", 3),
    ("grid", "ap_position", "vec3", ...),
    ("grid", "region_origin", "vec3", ...),
    ("grid", "region_extent_m", "vec2", ...),
    ("grid", "spacing_m", "float", ...),
    ("grid", "tx_height_m", "float", ...),
    ("grid", "antenna_spacing_m", "float", 0.03),
    ("grid", "antenna_axis", "vec3", (1.0, 0.0, 0.0)),
    ("radio", "n_tx", "int", ...),
    ("radio", "n_rx", "int", ...),
    ("radio", "num_tones", "int", ...),
    ("radio", "bandwidth_hz", "float", ...),
    ("radio", "subband_hz", "float", ...),
    ("radio", "center_freq_hz", "float", ...),
    ("radio", "tx_power_mw", "float", ...),
    ("radio", "noise_figure", "float", ...),
    ("radio", "thermal_noise_mw_per_hz", "float", BOLTZMANN_290K_MW_PER_HZ),
    ("radio", "alpha", "float", ...),
]
SWEEP_SCHEMA = [
    ("sweep", "parameter", "str", ...),
    ("sweep", "values", "list", ...),
    ("sweep", "configurations", "labels", ((1, 1), (2, 1), (1, 2), (2, 2))),
    ("sweep", "narrowband", "bool", False),
]
VALIDATE_SCHEMA = [
    ("validate", "point_a", "vec3", None),
    ("validate", "point_b", "vec3", None),
]


@dataclass
class Settings:
    scenario: ScenarioGrid
    radio: RadioConfig
    sweep: SweepSpec | None
    configurations: tuple
    point_a: tuple | None
    point_b: tuple | None
    raw: dict


def _number(text):
    m = _NUMBER.match(text)
    if not m:
        raise ValueError(f"not a number: {text!r}")
    value, unit = float(m.group(1)), m.group(2).lower()
    if unit:
        if unit not in _UNITS or _UNITS[unit] is None:
            raise ValueError(f"unknown unit {m.group(2)!r}")
        value *= _UNITS[unit]
    return value


def _split(text):
    # commas separate items when present, so "1 MHz, 2 MHz" keeps its units
    sep = r"\s*,\s*" if "," in text else r"\s+"
    return [p for p in re.split(sep, text.strip()) if p]


def _convert(kind, text):
    if kind == "float":
        return _number(text)
    if kind == "int":
        v = _number(text)
        if v != int(v):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(v)
    if kind in ("vec2", "vec3"):
        parts = _split(text.strip().strip("[]()"))
        want = 2 if kind == "vec2" else 3
        if len(parts) != want:
            raise ValueError(f"expected {want} comma-separated numbers, got {text!r}")
        return tuple(_number(p) for p in parts)
    if kind == "list":
        parts = _split(text.strip().strip("[]"))
        if not parts:
            raise ValueError("expected at least one value")
        return tuple(_number(p) for p in parts)
    if kind == "labels":
        out = []
        for p in (p for p in re.split(r"[,\s]+", text.strip()) if p):
            m = re.fullmatch(r"(\d+)[xX](\d+)", p)
            if not m:
                raise ValueError(f"antenna configuration must look like 2x2, got {p!r}")
            out.append((int(m.group(1)), int(m.group(2))))
        return tuple(out)
    if kind == "bool":
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected true/false, got {text!r}")
    return text.strip()


def _line_numbers(text):
    """Map (section, key) to the 1-based line where the key is set."""
    where, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            where[(section, None)] = n
            continue
        m = re.match(r"([^=:]+)[=:]", s)
        if m and section:
            where[(section, m.group(1).strip().lower())] = n
    return where


def _read_section(parser, lines, schema, problems, required=True):
    values = {}
    for section, key, kind, default in schema:
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                values[key] = _convert(kind, raw)
            except ValueError as exc:
                line = lines.get((section, key), "?")
                problems.append(f"[{section}] {key} (line {line}): {exc}")
        elif default is ... and required:
            problems.append(f"[{section}] {key}: missing required key")
        else:
            values[key] = default
    return values


def parse_config(path) -> Settings:
    """Read and validate a configuration file.

    Every problem found is collected and raised together as a
    :class:`ConfigFileError`, each message naming the key and its line.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigFileError([f"cannot read {path}: {exc}"]) from exc
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigFileError([f"{path}: {exc}"]) from exc
    lines = _line_numbers(text)

    problems = []
    v = _read_section(parser, lines, SCHEMA, problems)
    has_sweep = parser.has_section("sweep")
    sv = _read_section(parser, lines, SWEEP_SCHEMA, problems) if has_sweep else {}
    vv = _read_section(parser, lines, VALIDATE_SCHEMA, problems)
    if problems:
        raise ConfigFileError(problems)

    def at(section, key=None):
        line = lines.get((section, key), lines.get((section, None), "?"))
        return f"[{section}]{' ' + key if key else ''} (line {line})"

    try:
        building = BuildingBox(v["length_m"], v["width_m"], v["height_m"], v["reflection_coeff"], v["excess_loss_db"])
    except ValueError as exc:
        problems.append(f"{at('building')}: {exc}")
    try:
        radio = RadioConfig(
            n_tx=v["n_tx"],
            n_rx=v["n_rx"],
            num_tones=v["num_tones"],
            system_bandwidth_hz=v["bandwidth_hz"],
            subband_bandwidth_hz=v["subband_hz"],
            center_freq_hz=v["center_freq_hz"],
            tx_power_per_tone_mw=v["tx_power_mw"],
            noise_figure_linear=v["noise_figure"],
            thermal_noise_density_mw_per_hz=v["thermal_noise_mw_per_hz"],
            false_alarm_target=v["alpha"],
        )
    except ValueError as exc:
        key = "subband_hz" if "subband" in str(exc) else None
        problems.append(f"{at('radio', key)}: {exc}")
    if problems:
        raise ConfigFileError(problems)

    try:
        scenario = ScenarioGrid(
            building=building,
            ap_position=v["ap_position"],
            region_origin=v["region_origin"],
            region_extent_m=v["region_extent_m"],
            grid_spacing_m=v["spacing_m"],
            tx_height_m=v["tx_height_m"],
            max_order=v["max_order"],
            antenna_spacing_m=v["antenna_spacing_m"],
            antenna_axis=v["antenna_axis"],
        )
    except ValueError as exc:
        raise ConfigFileError([f"{at('grid')}: {exc}"]) from exc

    sweep = None
    configurations = sv.get("configurations", SWEEP_SCHEMA[2][3])
    if has_sweep:
        values = sv["values"]
        if sv["parameter"] in ("M", "N_T", "N_R"):
            values = tuple(int(x) for x in values)
        try:
            sweep = SweepSpec(sv["parameter"], values, radio, narrowband=sv["narrowband"])
        except ValueError as exc:
            raise ConfigFileError([f"{at('sweep', 'values')}: {exc}"]) from exc

    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    return Settings(scenario, radio, sweep, tuple(configurations), vv.get("point_a"), vv.get("point_b"), raw)


def _fmt(x):
    # repr gives the shortest string that round-trips the float
    return repr(float(x))


def _csv_text(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in result.rows:
        w.writerow([r.parameter, _fmt(r.value), r.config_label, _fmt(r.avg_miss_rate), _fmt(r.security_gain)])
    return buf.getvalue()


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".mimoauth-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def manifest_path(output_path) -> str:
    root, _ = os.path.splitext(output_path)
    return root + ".manifest.json"


def cmd_sweep(config_path, output_path, seed=0, workers=None) -> int:
    """Run the configured sweep and write the CSV plus a JSON manifest next to it."""
    started = time.time()
    try:
        settings = parse_config(config_path)
    except ConfigFileError as exc:
        print(f"error: invalid configuration\n{exc}", file=sys.stderr)
        return EXIT_USAGE
    if settings.sweep is None:
        print(f"error: {config_path} has no [sweep] section", file=sys.stderr)
        return EXIT_USAGE
    out_dir = os.path.dirname(os.path.abspath(output_path))
    if not os.path.isdir(out_dir) or not os.access(out_dir, os.W_OK):
        print(f"error: cannot write to {output_path}", file=sys.stderr)
        return EXIT_USAGE
    workers = workers or os.cpu_count() or 1

    try:
        result = run_sweep(settings.scenario, settings.sweep, settings.configurations, workers=workers)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    n_points = len(grid_points(settings.scenario))
    manifest = {
        "artifact": "mimoauth",
        "version": __version__,
        "config_path": os.path.abspath(config_path),
        "config": settings.raw,
        "seed": seed,
        "workers": workers,
        "grid_points": n_points,
        "pairs": n_points * (n_points - 1) // 2,
        "rows": len(result.rows),
        "wall_clock_s": round(time.time() - started, 3),
    }
    try:
        _atomic_write(output_path, _csv_text(result))
        _atomic_write(manifest_path(output_path), json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"wrote {len(result.rows)} rows to {output_path}")
    return EXIT_OK


def _binomial_se(p, n):
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def cmd_validate(config_path, trials, seed=0, point_a=None, point_b=None) -> int:
    """Compare analytic and Monte-Carlo (alpha, beta) for one pair of locations."""
    if trials is None or trials < 1:
        print("error: --trials must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        settings = parse_config(config_path)
    except ConfigFileError as exc:
        print(f"error: invalid configuration\n{exc}", file=sys.stderr)
        return EXIT_USAGE
    pts = grid_points(settings.scenario)
    a = point_a or settings.point_a or tuple(pts[0])
    b = point_b or settings.point_b or tuple(pts[-1])
    cfg = settings.radio
    try:
        summary = pair_summary(a, b, settings.scenario, cfg)
        emp_alpha, emp_beta = monte_carlo_rates(a, b, settings.scenario, cfg, trials, seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    alpha = cfg.false_alarm_target
    ok = True
    print(f"point_a = {list(map(float, a))}")
    print(f"point_b = {list(map(float, b))}")
    print(f"trials = {trials}")
    for name, analytic, empirical in (("alpha", alpha, emp_alpha), ("beta", summary.beta, emp_beta)):
        se = _binomial_se(analytic, trials)
        agree = abs(empirical - analytic) <= 3.0 * se
        ok &= agree
        lo, hi = max(analytic - 3 * se, 0.0), min(analytic + 3 * se, 1.0)
        print(f"{name}: analytic={analytic:.6g} empirical={empirical:.6g} "
              f"3se_interval=[{lo:.6g}, {hi:.6g}] {'agree' if agree else 'DISAGREE'}")
    return EXIT_OK if ok else EXIT_DISAGREE


def cmd_pair(config_path, point_a, point_b) -> int:
    """Print sigma^2, S, k, mu and the analytic miss rate for two locations."""
    try:
        settings = parse_config(config_path)
        summary = pair_summary(point_a, point_b, settings.scenario, settings.radio)
    except ConfigFileError as exc:
        print(f"error: invalid configuration\n{exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for key, value in asdict(summary).items():
        print(f"{key} = {value!r}")
    print(f"alpha = {settings.radio.false_alarm_target!r}")
    return EXIT_OK


def _point(text):
    try:
        return _convert("vec3", text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser():
    p = argparse.ArgumentParser(prog="mimoauth", description="MIMO channel-based spoofing detection experiments")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="average miss rate and security gain over a parameter sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")

    v = sub.add_parser("validate", help="Monte-Carlo check of the analytic rates for one pair")
    v.add_argument("--config", required=True)
    v.add_argument("--trials", type=int, required=True)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--point-a", type=_point, default=None)
    v.add_argument("--point-b", type=_point, default=None)

    q = sub.add_parser("pair", help="analytic test quantities for two locations")
    q.add_argument("--config", required=True)
    q.add_argument("--point-a", type=_point, required=True)
    q.add_argument("--point-b", type=_point, required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "sweep":
        return cmd_sweep(args.config, args.output, args.seed, args.workers)
    if args.command == "validate":
        return cmd_validate(args.config, args.trials, args.seed, args.point_a, args.point_b)
    return cmd_pair(args.config, args.point_a, args.point_b)


if __name__ == "__main__":
    sys.exit(main())
