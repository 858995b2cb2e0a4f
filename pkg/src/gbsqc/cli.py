"""Command-line front end.

Usage examples::

    gbsqc prepare --a 0.6 --b 0.8
    gbsqc run cnot --control e --a 1 --b 0
    gbsqc rotate-u --a 0.6 --b 0.8 --theta 1.2 --varphi 0.3 --gate-matrix
    gbsqc sample --protocol prepare --shots 100000 --seed 4
    gbsqc jitter --protocol cnot --epsilon 0 0.005 0.01 --format csv
    gbsqc tomography --protocol hadamard
    gbsqc verify

Coefficients are given as ``MAG [PHASE]``. A flat JSON config file
(``--config``) may carry any option; flags given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from gbsqc.analysis import (
    CNOT,
    HADAMARD,
    RNG_NAME,
    NonLinearityError,
    extract_logical_gate,
    gate_fidelity,
    jitter_sweep,
    leaf_logical_vector,
    monte_carlo_run,
)
from gbsqc.atom_cavity import LeakageError
from gbsqc.protocols import PROTOCOLS, BranchTree, run_protocol, u_axis_matrix, z_axis_matrix

log = logging.getLogger("gbsqc")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_LEAK = 3

RENORMALIZE_TOL = 1e-6

PROTOCOL_COMMANDS = tuple(PROTOCOLS)
COMMANDS = PROTOCOL_COMMANDS + ("run", "tomography", "jitter", "sample", "verify")
DEFAULT_EPSILONS = [round(0.005 * k, 3) for k in range(11)]


class ValidationError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "run"
    protocol: Optional[str] = None
    a: list = field(default_factory=lambda: [1.0, 0.0])
    b: list = field(default_factory=lambda: [0.0, 0.0])
    c: list = field(default_factory=lambda: [1.0, 0.0])
    d: list = field(default_factory=lambda: [0.0, 0.0])
    phi: float = 0.0
    theta: float = 0.0
    varphi: float = 0.0
    mode: str = "enumerate"
    shots: int = 1000
    seed: int = 0
    epsilon: list = field(default_factory=list)
    format: str = "json"
    output: Optional[str] = None
    timestamp: bool = True
    gate_matrix: bool = False
    path: Optional[str] = None
    max_attempts: int = 1
    jitter_mode: str = "systematic"
    correct_alternate: bool = False

    def coefficient(self, name: str) -> complex:
        mag, phase = _mag_phase(getattr(self, name), name)
        return mag * complex(math.cos(phase), math.sin(phase))


def _mag_phase(value, name):
    vals = list(value) if isinstance(value, (list, tuple)) else [value]
    if not 1 <= len(vals) <= 2:
        raise ValidationError(f"--{name} takes MAG [PHASE]")
    try:
        mag = float(vals[0])
        phase = float(vals[1]) if len(vals) == 2 else 0.0
    except (TypeError, ValueError):
        raise ValidationError(f"--{name}: not a number: {vals!r}") from None
    return mag, phase


def _normalized_pair(cfg: RunConfig, first: str, second: str) -> np.ndarray:
    vec = np.array([cfg.coefficient(first), cfg.coefficient(second)])
    norm2 = float(np.vdot(vec, vec).real)
    if abs(norm2 - 1.0) > RENORMALIZE_TOL:
        raise ValidationError(
            f"|{first}|^2 + |{second}|^2 = {norm2:.9g} is not normalized"
        )
    if norm2 != 1.0:
        log.warning("renormalizing (%s, %s): norm^2 was %r", first, second, norm2)
        vec = vec / math.sqrt(norm2)
    return vec


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", default=S, help="flat JSON file of options")
    common.add_argument("--protocol", choices=PROTOCOL_COMMANDS, default=S)
    for name, what in (("a", "|0_L>"), ("b", "|1_L>"), ("c", "control |g>"), ("d", "control |e>")):
        common.add_argument(f"--{name}", nargs="+", metavar="X", default=S,
                            help=f"coefficient of {what} as MAG [PHASE]")
    common.add_argument("--control", choices=("g", "e"), default=S,
                        help="shorthand for a basis control atom")
    common.add_argument("--phi", type=float, default=S, help="basis phase (default 0)")
    common.add_argument("--theta", type=float, default=S)
    common.add_argument("--varphi", type=float, default=S)
    common.add_argument("--mode", choices=("enumerate", "sample"), default=S)
    common.add_argument("--shots", type=int, default=S)
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--epsilon", type=float, nargs="+", default=S,
                        help="relative dispersive-phase error(s)")
    common.add_argument("--format", choices=("json", "csv", "pretty"), default=S)
    common.add_argument("--output", default=S, help="write the report here")
    common.add_argument("--no-timestamp", dest="timestamp", action="store_false", default=S)
    common.add_argument("--gate-matrix", action="store_true", default=S,
                        help="include the extracted logical matrix")
    common.add_argument("--path", default=S, help="leaf label used for gate extraction")
    common.add_argument("--max-attempts", type=int, default=S,
                        help="sample mode: retry a shot until success")
    common.add_argument("--jitter-mode", choices=("systematic", "independent"), default=S)
    common.add_argument("--correct-alternate", action="store_true", default=S,
                        help="prepare: feed the g leaf through the phase gate")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gbsqc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in PROTOCOL_COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} protocol")
    run = sub.add_parser("run", parents=[common], help="run a protocol by name")
    run.add_argument("name", nargs="?", choices=PROTOCOL_COMMANDS)
    for name, text in (
        ("tomography", "extract the logical gate matrix of a protocol"),
        ("jitter", "sweep the dispersive-phase error"),
        ("sample", "Monte-Carlo sample a protocol's outcomes"),
        ("verify", "run the self-check suite"),
    ):
        sub.add_parser(name, parents=[common], help=text)
    return parser


def load_config(argv=None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    logging.basicConfig(
        level=logging.DEBUG if args.pop("verbose", False) else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    cfg = RunConfig()
    merged = {}
    if "config" in args:
        try:
            data = json.loads(Path(args.pop("config")).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config: {exc}") from None
        if not isinstance(data, dict):
            raise ValidationError("config file must hold a flat JSON object")
        merged.update({k.replace("-", "_"): v for k, v in data.items()})
    merged.update(args)
    name = merged.pop("name", None)
    if name is not None:
        merged["protocol"] = name
    if "no_timestamp" in merged:
        merged["timestamp"] = not merged.pop("no_timestamp")
    control = merged.pop("control", None)
    if control is not None:
        merged["c"], merged["d"] = ([1.0], [0.0]) if control == "g" else ([0.0], [1.0])
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(merged) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    for k, v in merged.items():
        setattr(cfg, k, v)
    if cfg.command in PROTOCOL_COMMANDS:
        cfg.protocol = cfg.command
    if isinstance(cfg.epsilon, (int, float)):
        cfg.epsilon = [cfg.epsilon]
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if cfg.command not in COMMANDS:
        raise ValidationError(f"unknown command {cfg.command!r}")
    if cfg.command != "verify":
        if cfg.protocol is None:
            raise ValidationError(f"{cfg.command}: a protocol is required (--protocol)")
        if cfg.protocol not in PROTOCOLS:
            raise ValidationError(f"unknown protocol {cfg.protocol!r}")
    if cfg.mode not in ("enumerate", "sample"):
        raise ValidationError(f"unknown mode {cfg.mode!r}")
    if (cfg.mode == "sample" or cfg.command == "sample") and int(cfg.shots) < 1:
        raise ValidationError("shots must be >= 1 in sample mode")
    if int(cfg.max_attempts) < 1:
        raise ValidationError("max_attempts must be >= 1")
    if cfg.format not in ("json", "csv", "pretty"):
        raise ValidationError(f"unknown format {cfg.format!r}")


def logical_input(cfg: RunConfig) -> np.ndarray:
    target = _normalized_pair(cfg, "a", "b")
    if cfg.protocol == "cnot":
        control = _normalized_pair(cfg, "c", "d")
        return np.kron(control, target)
    return target


def protocol_params(cfg: RunConfig) -> dict:
    if cfg.protocol == "rotate-u":
        return {"theta": float(cfg.theta), "varphi": float(cfg.varphi)}
    if cfg.protocol == "rotate-z":
        return {"theta": float(cfg.theta)}
    if cfg.protocol == "prepare" and cfg.correct_alternate:
        return {"correct_alternate": True}
    return {}


def ideal_matrix(cfg: RunConfig) -> np.ndarray:
    """Target logical matrix of the default (success) branch."""
    return {
        "prepare": lambda: np.eye(2),
        "cnot": lambda: CNOT,
        "rotate-u": lambda: u_axis_matrix(cfg.theta, cfg.varphi),
        "rotate-z": lambda: z_axis_matrix(cfg.theta),
        "hadamard": lambda: HADAMARD,
        "qpg": lambda: np.diag([1.0, -1.0]),
    }[cfg.protocol]()


def _pairs(values) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(values).reshape(-1)]


def branch_table(tree: BranchTree) -> list:
    rows = []
    for lf in tree.leaves:
        row = {
            "label": lf.label,
            "probability": float(lf.probability),
            "classification": lf.classification,
            "factor_dims": list(lf.state.factor_dims) if lf.state is not None else None,
            "amplitudes": _pairs(lf.state.amplitudes) if lf.state is not None else None,
        }
        if lf.state is not None:
            try:
                row["logical_output"] = _pairs(leaf_logical_vector(lf))
            except ValueError:
                row["logical_output"] = None
        rows.append(row)
    return rows


def _config_echo(cfg: RunConfig) -> dict:
    echo = asdict(cfg)
    echo.pop("output")
    echo.pop("timestamp")
    return echo


def _gate_section(cfg: RunConfig, report: dict):
    m = extract_logical_gate(cfg.protocol, protocol_params(cfg), phi=cfg.phi, path=cfg.path)
    report["gate_matrix"] = {
        "basis": m.basis,
        "entries": [_pairs(row) for row in m.entries],
        "phase_convention": "first nonzero entry of column 0 real positive",
    }
    if cfg.path is None:
        report["fidelity"] = {
            "metric": "|Tr(U^dagger V)|/d against the ideal gate",
            "value": gate_fidelity(m, ideal_matrix(cfg)),
        }


def execute(cfg: RunConfig) -> tuple[int, dict]:
    report = {"protocol": cfg.protocol if cfg.command != "verify" else "verify",
              "command": cfg.command, "config": _config_echo(cfg)}
    status = EXIT_OK
    if cfg.command == "verify":
        from gbsqc.verify import run_checks

        results = run_checks()
        report["checks"] = [asdict(r) for r in results]
        if not all(r.passed for r in results):
            status = EXIT_CHECK_FAILED
    elif cfg.command == "jitter":
        eps = cfg.epsilon or DEFAULT_EPSILONS
        points = jitter_sweep(
            cfg.protocol, eps, protocol_params(cfg), phi=cfg.phi,
            mode=cfg.jitter_mode, seed=int(cfg.seed),
        )
        report["jitter"] = {
            "model": cfg.jitter_mode,
            "metric": "worst-case conditional state fidelity over probe inputs",
            "points": [asdict(p) for p in points],
        }
    elif cfg.command == "tomography":
        _gate_section(cfg, report)
    else:
        params = protocol_params(cfg)
        if cfg.epsilon:
            if len(cfg.epsilon) != 1:
                raise ValidationError("a protocol run takes a single --epsilon")
            params["chi"] = math.pi * (1.0 + cfg.epsilon[0])
        tree = run_protocol(cfg.protocol, logical_input(cfg), cfg.phi, **params)
        report["steps"] = tree.steps
        report["branches"] = branch_table(tree)
        report["success_probability"] = tree.success_probability
        if cfg.mode == "sample" or cfg.command == "sample":
            params.pop("chi", None)
            stats = monte_carlo_run(
                cfg.protocol, int(cfg.shots), int(cfg.seed), params,
                vec=logical_input(cfg), phi=cfg.phi, max_attempts=int(cfg.max_attempts),
            )
            report["sample"] = {
                "shots": stats.shots,
                "counts": stats.counts,
                "frequencies": stats.frequencies,
                "attempts": stats.attempts or None,
            }
        if cfg.gate_matrix:
            _gate_section(cfg, report)
    report["seed"] = int(cfg.seed)
    report["rng"] = RNG_NAME
    if cfg.timestamp:
        report["timestamp"] = datetime.now(timezone.utc).isoformat()
    return status, report


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if "branches" in report:
            w.writerow(["label", "probability", "classification", "factor_dims", "amplitudes"])
            for b in report["branches"]:
                w.writerow([b["label"], repr(b["probability"]), b["classification"],
                            json.dumps(b["factor_dims"]), json.dumps(b["amplitudes"])])
        elif "jitter" in report:
            w.writerow(["protocol", "epsilon", "fidelity"])
            for p in report["jitter"]["points"]:
                w.writerow([p["protocol"], repr(p["epsilon"]), repr(p["fidelity"])])
        elif "checks" in report:
            w.writerow(["check", "passed", "detail"])
            for c in report["checks"]:
                w.writerow([c["name"], c["passed"], c["detail"]])
        elif "gate_matrix" in report:
            for row in report["gate_matrix"]["entries"]:
                w.writerow([complex(*z) for z in row])
        return buf.getvalue()
    return _pretty(report)


def _fmt_amp(pair) -> str:
    z = complex(*pair)
    return f"{z.real:+.6f}{z.imag:+.6f}j"


def _pretty(report: dict) -> str:
    lines = [f"{report['command']}: {report['protocol']}"]
    for b in report.get("branches", []):
        out = b.get("logical_output")
        shown = " ".join(_fmt_amp(p) for p in out) if out else "-"
        lines.append(f"  {b['label']:<48} p={b['probability']:.12f}  {b['classification']:<10} out=[{shown}]")
    if "success_probability" in report:
        lines.append(f"  success probability {report['success_probability']:.12f}")
    if "sample" in report:
        s = report["sample"]
        for k, v in s["counts"].items():
            lines.append(f"  sample {k:<48} {v:>8d}  {s['frequencies'][k]:.5f}")
    if "gate_matrix" in report:
        lines.append("  gate matrix:")
        for row in report["gate_matrix"]["entries"]:
            lines.append("    " + "  ".join(_fmt_amp(p) for p in row))
    if "fidelity" in report:
        lines.append(f"  gate fidelity {report['fidelity']['value']:.15f}")
    for p in report.get("jitter", {}).get("points", []):
        lines.append(f"  eps={p['epsilon']:+.4f}  fidelity={p['fidelity']:.12f}")
    for c in report.get("checks", []):
        lines.append(f"  [{'PASS' if c['passed'] else 'FAIL'}] {c['name']}: {c['detail']}")
    lines.append(f"  seed {report['seed']} ({report['rng']})")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    try:
        cfg = load_config(argv)
        status, report = execute(cfg)
    except SystemExit as exc:
        return int(exc.code or 0)
    except LeakageError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_LEAK
    except (ValidationError, NonLinearityError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    text = render(report, cfg.format)
    if cfg.output:
        Path(cfg.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
