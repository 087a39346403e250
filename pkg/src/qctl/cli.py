"""Command-line front end.

    qctl transfer    --lambda 5 --model commutative --epsilon -0.2 --output run.csv
    qctl sweep       --model commutative --lambdas 0,3,5,10 --output sweep.csv
    qctl cyclic      --lambda 5 --model noncommutative --epsilon -0.2 --loops 2 --output loop.csv
    qctl pulse-table --lambda 5 --output pulses.csv
    qctl audit       --lambda 5 --model commutative --epsilon 0.02 --output audit.json

Settings may also come from a ``key = value`` file given by ``--config``; flags win.
Exit status: 0 success, 1 usage error, 2 I/O failure, 3 scenario failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import error_analysis, plotting, scenarios
from .ancillary_frame import cyclic_schedule, transfer_schedule
from .errors import ConfigError, QctlError
from .field_synthesis import CSV_COLUMNS, ErrorModel, synthesize_fields_lambda
from .quantum_core import TimeGrid

COMMANDS = ("transfer", "sweep", "cyclic", "pulse-table", "audit")
MODELS = ("none", "commutative", "noncommutative")
FORMATS = ("csv", "json")
EPS_LIMIT = 0.5
DEFAULT_LAMBDAS = (0.0, 3.0, 5.0, 10.0)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_SCENARIO = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    command: str
    lambdas: tuple = ()
    epsilon: float = 0.0
    eps_min: float = -0.2
    eps_max: float = 0.2
    eps_step: float = 0.01
    model: str = "none"
    loops: int = 2
    n_steps: int | None = None
    output: str | None = None
    format: str | None = None
    figure: str | None = None
    schedule: str = "transfer"
    detuning_sign: float = -1.0
    return_sweep: str = "reverse"

    @property
    def lam(self) -> float:
        return self.lambdas[0]

    @property
    def out_format(self) -> str:
        return self.format or ("json" if self.command == "audit" else "csv")

    def error_model(self, epsilon: float | None = None) -> ErrorModel:
        eps = self.epsilon if epsilon is None else epsilon
        return ErrorModel(self.model, eps, self.detuning_sign)

    def to_text(self) -> str:
        """Serialise to the ``key = value`` format read by :func:`parse_config`."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "lambdas":
                if not v:
                    continue
                v = ",".join(repr(float(x)) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


# -- parsing -----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("arguments", message)


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError("lambdas", f"expected comma-separated numbers, got {text!r}") from None


_CONVERTERS = {
    "command": str,
    "lambda": lambda s: (float(s),),
    "lambdas": _float_list,
    "epsilon": float,
    "eps_min": float,
    "eps_max": float,
    "eps_step": float,
    "model": str,
    "loops": int,
    "n_steps": int,
    "output": str,
    "format": str,
    "figure": str,
    "schedule": str,
    "detuning_sign": float,
    "return_sweep": str,
}


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qctl", description="Error-resilient three-level population transfer.")
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="key = value settings file; flags override it")
    p.add_argument("--lambda", dest="lambda_", metavar="LAMBDA")
    p.add_argument("--lambdas", metavar="L1,L2,...")
    p.add_argument("--epsilon")
    p.add_argument("--eps-min")
    p.add_argument("--eps-max")
    p.add_argument("--eps-step")
    p.add_argument("--model", help="none | commutative | noncommutative")
    p.add_argument("--loops")
    p.add_argument("--n-steps", help="time steps per period (>= 1000, even)")
    p.add_argument("--output", help="output file")
    p.add_argument("--format", help="csv | json")
    p.add_argument("--figure", help="also render a figure to this image file")
    p.add_argument("--schedule", help="transfer | cyclic (pulse-table, audit)")
    p.add_argument("--detuning-sign", help="sign of the detuning error term, -1 or 1")
    p.add_argument("--return-sweep", help="reverse | forward orientation of the return stage")
    return p


def _read_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise ConfigError(key, f"unknown setting on line {lineno}")
        out[key] = value
    return out


def _convert(raw: dict) -> dict:
    vals = {}
    for key, value in raw.items():
        try:
            conv = _CONVERTERS[key](value)
        except ValueError:
            raise ConfigError(key, f"cannot parse {value!r}") from None
        if key in ("lambda", "lambdas"):
            vals["lambdas"] = conv
        else:
            vals[key] = conv
    return vals


def parse_config(argv=None, text: str | None = None) -> RunConfig:
    """Build a validated :class:`RunConfig` from flags and/or config text."""
    raw = {}
    if text is not None:
        raw.update(_read_config_text(text))
    flags = {}
    if argv is not None:
        ns = _build_parser().parse_args(list(argv))
        if ns.config:
            try:
                with open(ns.config, encoding="utf-8") as fh:
                    raw.update(_read_config_text(fh.read()))
            except OSError as exc:
                raise ConfigError("config", f"cannot read {ns.config}: {exc}") from None
        for key, value in vars(ns).items():
            if key == "config" or value is None:
                continue
            flags["lambda" if key == "lambda_" else key] = value
    # flags override file values; --lambda and --lambdas share one slot
    if "lambda" in flags or "lambdas" in flags:
        raw.pop("lambda", None)
        raw.pop("lambdas", None)
    raw.update(flags)
    vals = _convert(raw)
    if "command" not in vals:
        raise ConfigError("command", f"missing; choose one of {', '.join(COMMANDS)}")
    if vals["command"] == "sweep" and "lambdas" not in vals:
        vals["lambdas"] = DEFAULT_LAMBDAS
    cfg = RunConfig(**vals)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ConfigError("command", f"unknown command {cfg.command!r}")
    if cfg.model not in MODELS:
        raise ConfigError("model", f"must be one of {', '.join(MODELS)}")
    for name in ("epsilon", "eps_min", "eps_max"):
        v = getattr(cfg, name)
        if not np.isfinite(v) or abs(v) > EPS_LIMIT:
            raise ConfigError(name, f"|{name}| must be <= {EPS_LIMIT}, got {v}")
    if not cfg.eps_step > 0:
        raise ConfigError("eps_step", "must be positive")
    if cfg.eps_max < cfg.eps_min:
        raise ConfigError("eps_max", "must be >= eps_min")
    if not cfg.lambdas:
        raise ConfigError("lambda", f"required for {cfg.command}")
    if any(not np.isfinite(x) or x < 0 for x in cfg.lambdas):
        raise ConfigError("lambda", "values must be >= 0")
    if cfg.command != "sweep" and len(cfg.lambdas) != 1:
        raise ConfigError("lambda", f"{cfg.command} takes a single value")
    if cfg.n_steps is not None and (cfg.n_steps < scenarios.MIN_STEPS or cfg.n_steps % 2):
        raise ConfigError("n_steps", f"must be an even integer >= {scenarios.MIN_STEPS}")
    if cfg.loops < 1:
        raise ConfigError("loops", "must be >= 1")
    if cfg.output is None:
        raise ConfigError("output", "required")
    if cfg.format is not None and cfg.format not in FORMATS:
        raise ConfigError("format", f"must be one of {', '.join(FORMATS)}")
    if cfg.schedule not in ("transfer", "cyclic"):
        raise ConfigError("schedule", "must be transfer or cyclic")
    if cfg.detuning_sign not in (-1.0, 1.0):
        raise ConfigError("detuning_sign", "must be -1 or 1")
    if cfg.return_sweep not in ("reverse", "forward"):
        raise ConfigError("return_sweep", "must be reverse or forward")
    if cfg.command == "audit" and cfg.model == "none":
        raise ConfigError("model", "audit needs commutative or noncommutative")


# -- output ------------------------------------------------------------------

def fmt(x) -> str:
    return format(float(x), ".11e")


def _num(x):
    return float(fmt(x))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _population_csv(result) -> str:
    rows = np.column_stack([result.times, result.populations])
    return _csv_text(["t", "P0", "P1", "Pe"], rows)


def _result_summary(cfg: RunConfig, result) -> dict:
    out = {
        "command": cfg.command,
        "lambda": cfg.lam,
        "epsilon": cfg.epsilon,
        "model": cfg.model,
        "checkpoints": [{"time": c.time, "level": c.level, "value": c.value} for c in result.checkpoints],
    }
    if result.peaks:
        out["peaks"] = [{"level": p.level, "time": p.time, "value": p.value} for p in result.peaks]
    return out


def _steps(cfg: RunConfig, default: int) -> int:
    return cfg.n_steps if cfg.n_steps is not None else default


def _schedule(cfg: RunConfig):
    if cfg.schedule == "cyclic":
        return cyclic_schedule(cfg.lam, cfg.loops, sweep=cfg.return_sweep)
    return transfer_schedule(cfg.lam)


def _execute(cfg: RunConfig):
    """Return (text, figure callback or None) for the configured command."""
    kind = cfg.out_format
    if cfg.command == "transfer":
        spec = scenarios.TransferSpec(cfg.lam, cfg.error_model(), _steps(cfg, scenarios.default_steps(cfg.lam)))
        res = scenarios.single_transfer(spec)
        summary = _result_summary(cfg, res)
        summary["fidelity"] = res.checkpoints[-1].value
        text = _population_csv(res) if kind == "csv" else _json_text(summary)
        return text, lambda p: plotting.plot_populations(res, p, f"transfer, lambda={cfg.lam:g}")

    if cfg.command == "cyclic":
        spec = scenarios.CyclicSpec(cfg.lam, cfg.error_model(), _steps(cfg, 4800), cfg.loops, cfg.return_sweep)
        res = scenarios.cyclic_transfer(spec)
        text = _population_csv(res) if kind == "csv" else _json_text(_result_summary(cfg, res))
        return text, lambda p: plotting.plot_populations(res, p, f"cyclic, lambda={cfg.lam:g}")

    if cfg.command == "sweep":
        eps = scenarios.epsilon_grid(cfg.eps_min, cfg.eps_max, cfg.eps_step)
        rows = scenarios.epsilon_sweep(cfg.lambdas, eps, cfg.model, cfg.n_steps, cfg.detuning_sign)
        good = [r for r in rows if r.fidelity is not None]
        bad = [r for r in rows if r.fidelity is None]
        if kind == "csv":
            text = _csv_text(["lambda", "epsilon", "fidelity"], [(r.lam, r.epsilon, r.fidelity) for r in good])
        else:
            text = _json_text({
                "model": cfg.model,
                "rows": [{"lambda": r.lam, "epsilon": r.epsilon, "fidelity": r.fidelity} for r in good],
                "failures": [{"lambda": r.lam, "epsilon": r.epsilon, "reason": r.reason} for r in bad],
            })
        if bad:
            for r in bad:
                print(f"sweep point lambda={r.lam:g} epsilon={r.epsilon:g} failed: {r.reason}", file=sys.stderr)
        return text, lambda p: plotting.plot_sweep(rows, p, f"{cfg.model} error"), bad

    if cfg.command == "pulse-table":
        sched = _schedule(cfg)
        n = _steps(cfg, scenarios.default_steps(cfg.lam))
        grid = TimeGrid(sched.t_start, sched.t_end, int(round(n * (sched.t_end - sched.t_start))))
        fs = synthesize_fields_lambda(sched, grid.samples)
        if kind == "csv":
            text = _csv_text(CSV_COLUMNS, fs.rows())
        else:
            text = _json_text({"columns": list(CSV_COLUMNS), "rows": fs.rows().tolist()})
        return text, lambda p: plotting.plot_pulses(fs, p, f"fields, lambda={cfg.lam:g}")

    # audit
    sched = _schedule(cfg)
    model = cfg.error_model()
    report = error_analysis.diagnostics(sched, model, 2, _steps(cfg, scenarios.default_steps(cfg.lam)))
    if kind == "csv":
        flat = _flatten(report)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in flat:
            w.writerow([k, fmt(v) if isinstance(v, (float, int)) and not isinstance(v, bool) else v])
        text = buf.getvalue()
    else:
        text = _json_text(report)

    def fig(p):
        ts, ms = error_analysis.error_rotation_series(sched, model)
        plotting.plot_error_rotation(ts, ms, p, f"{cfg.model}, lambda={cfg.lam:g}")

    return text, fig


def _flatten(d, prefix=""):
    out = []
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out += _flatten(v, key + ".")
        elif isinstance(v, list):
            out += [(f"{key}.{i}", x) for i, x in enumerate(v)]
        else:
            out.append((key, v))
    return out


def run(cfg: RunConfig) -> int:
    try:
        produced = _execute(cfg)
    except (QctlError, ValueError, ArithmeticError) as exc:
        print(f"qctl: {cfg.command} failed: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    text, figure = produced[0], produced[1]
    failed = produced[2] if len(produced) > 2 else []
    try:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        if cfg.figure:
            figure(cfg.figure)
    except OSError as exc:
        print(f"qctl: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_SCENARIO if failed else EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"qctl: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


__all__ = ["RunConfig", "parse_config", "validate", "run", "main"]
