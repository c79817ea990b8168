"""JSON run configuration: schema validation, rule resolution, manifests.

A config document has sections ``problem``, ``macro``, ``micro`` and
optionally ``oracle``, ``sweep``, ``output``.  The cell geometry accepts
either literal numbers or the rule strings ``eps^(p/q)`` used throughout the
experiments (delta = eps^(1/3), sigma = eps^(2/3)).  ``load_config`` reports
every schema violation at once, and the resolved form it returns serializes
back to a valid config (the run manifest), so a manifest can be re-run
verbatim.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import expressions
from .expressions import ExpressionError, MultiscaleCoefficient
from .fine import FineConfig
from .macro import CoefficientMode, MacroConfig, MicroParams, OracleParams


class ConfigError(ValueError):
    """All schema violations found in a config, newline-separated."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))
        self.problems = problems


_RULE_RE = re.compile(r"^eps\^\((\d+)/(\d+)\)$")

SWEEP_PARAMETERS = ("H", "tau", "h", "theta", "h_f", "epsilon")

_SECTION_KEYS = {
    "problem": {
        "omega",
        "T",
        "epsilon",
        "coefficient",
        "lambda_min",
        "lambda_max",
        "rhs",
        "initial",
        "exact_solution",
    },
    "macro": {"n_elems", "H", "n_steps", "tau", "coefficient_mode"},
    "micro": {"delta_rule", "sigma_rule", "h", "theta", "n_cell", "degree"},
    "oracle": {"n_y", "n_s", "period_tol", "max_periods"},
    "sweep": {"parameter", "values", "reference_n_elems"},
    "output": {"dir", "run_id"},
}


def resolve_rule(rule: Any, epsilon: float) -> float:
    """A rule is either a number or the string form eps^(p/q)."""
    if isinstance(rule, (int, float)) and not isinstance(rule, bool):
        return float(rule)
    if isinstance(rule, str):
        m = _RULE_RE.match(rule.strip())
        if m:
            p, q = int(m.group(1)), int(m.group(2))
            if q == 0:
                raise ValueError(f"rule {rule!r} divides by zero")
            return float(epsilon ** (p / q))
    raise ValueError(f"rule {rule!r} is neither a number nor of the form 'eps^(p/q)'")


def _expr_callable_tx(expr: expressions.Expr) -> Callable[[float, np.ndarray], np.ndarray]:
    def fn(t: float, x: np.ndarray):
        return expressions.evaluate(expr, t=t, x=x)

    return fn


def _expr_callable_x(expr: expressions.Expr) -> Callable[[np.ndarray], np.ndarray]:
    def fn(x: np.ndarray):
        return expressions.evaluate(expr, x=x)

    return fn


@dataclass
class RunConfig:
    """Validated configuration with every rule resolved to a number."""

    raw: dict
    omega: tuple[float, float]
    final_time: float
    epsilon: float
    coefficient: MultiscaleCoefficient
    rhs_expr: expressions.Expr
    initial_expr: expressions.Expr
    exact_expr: expressions.Expr | None
    n_elems: int
    n_steps: int
    mode: CoefficientMode
    micro: MicroParams
    oracle: OracleParams
    sweep_parameter: str | None
    sweep_values: list[float]
    sweep_reference_n_elems: int | None
    output_dir: str
    run_id: str

    @property
    def rhs(self) -> Callable[[float, np.ndarray], np.ndarray]:
        return _expr_callable_tx(self.rhs_expr)

    @property
    def initial(self) -> Callable[[np.ndarray], np.ndarray]:
        return _expr_callable_x(self.initial_expr)

    @property
    def exact(self) -> Callable[[float, np.ndarray], np.ndarray] | None:
        return _expr_callable_tx(self.exact_expr) if self.exact_expr else None

    def macro_config(self, **overrides) -> MacroConfig:
        params = dict(
            omega=self.omega,
            final_time=self.final_time,
            n_elems=self.n_elems,
            n_steps=self.n_steps,
            epsilon=self.epsilon,
            coefficient=self.coefficient,
            rhs=self.rhs,
            initial=self.initial,
            micro=self.micro,
            mode=self.mode,
            oracle=self.oracle,
        )
        params.update(overrides)
        return MacroConfig(**params)

    def fine_config(self, **overrides) -> FineConfig:
        params = dict(
            omega=self.omega,
            final_time=self.final_time,
            epsilon=self.epsilon,
            coefficient=self.coefficient,
            rhs=self.rhs,
            initial=self.initial,
            n_elems=self.n_elems,
            n_steps=self.n_steps,
        )
        params.update(overrides)
        return FineConfig(**params)

    def resolved_document(self) -> dict:
        """Round-trippable config with rules expanded; doubles as the manifest."""
        doc: dict[str, Any] = {
            "problem": {
                "omega": [self.omega[0], self.omega[1]],
                "T": self.final_time,
                "epsilon": self.epsilon,
                "coefficient": str(self.coefficient.expr),
                "lambda_min": self.coefficient.lambda_min,
                "lambda_max": self.coefficient.lambda_max,
                "rhs": str(self.rhs_expr),
                "initial": str(self.initial_expr),
            },
            "macro": {
                "n_elems": self.n_elems,
                "n_steps": self.n_steps,
                "coefficient_mode": (
                    {"fixed_a0": self.mode.value} if self.mode.kind == "fixed_a0" else self.mode.kind
                ),
            },
            "micro": {
                "delta_rule": self.micro.delta,
                "sigma_rule": self.micro.sigma,
                "h": self.micro.h,
                "theta": self.micro.theta,
                "degree": self.micro.degree,
            },
            "oracle": {
                "n_y": self.oracle.n_y,
                "n_s": self.oracle.n_s,
                "period_tol": self.oracle.period_tol,
                "max_periods": self.oracle.max_periods,
            },
            "output": {"dir": self.output_dir, "run_id": self.run_id},
        }
        if self.exact_expr is not None:
            doc["problem"]["exact_solution"] = str(self.exact_expr)
        if self.sweep_parameter is not None:
            doc["sweep"] = {"parameter": self.sweep_parameter, "values": self.sweep_values}
            if self.sweep_reference_n_elems is not None:
                doc["sweep"]["reference_n_elems"] = self.sweep_reference_n_elems
        return doc

    def manifest_json(self) -> str:
        return json.dumps(self.resolved_document(), indent=2, sort_keys=True) + "\n"


def _content_hash(doc: dict) -> str:
    trimmed = {k: v for k, v in doc.items() if k != "output"}
    payload = json.dumps(trimmed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


class _Validator:
    def __init__(self, doc: dict):
        self.doc = doc
        self.problems: list[str] = []

    def fail(self, message: str) -> None:
        self.problems.append(message)

    def section(self, name: str, required: bool = True) -> dict:
        sec = self.doc.get(name)
        if sec is None:
            if required:
                self.fail(f"missing section {name!r}")
            return {}
        if not isinstance(sec, dict):
            self.fail(f"section {name!r} must be an object")
            return {}
        for key in sec:
            if key not in _SECTION_KEYS[name]:
                self.fail(f"{name}.{key}: unknown key")
        return sec

    def number(self, sec: dict, section: str, key: str, default=None, positive=False):
        if key not in sec:
            if default is None:
                self.fail(f"{section}.{key}: required")
                return None
            return default
        v = sec[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(f"{section}.{key}: must be a finite number, got {v!r}")
            return None
        if positive and v <= 0:
            self.fail(f"{section}.{key}: must be positive, got {v!r}")
            return None
        return float(v)

    def integer(self, sec: dict, section: str, key: str, default=None, minimum=1):
        if key not in sec:
            if default is None:
                self.fail(f"{section}.{key}: required")
                return None
            return default
        v = sec[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(f"{section}.{key}: must be an integer, got {v!r}")
            return None
        if v < minimum:
            self.fail(f"{section}.{key}: must be >= {minimum}, got {v}")
            return None
        return v

    def expression(self, sec: dict, section: str, key: str, allowed: set[str], required=True):
        if key not in sec:
            if required:
                self.fail(f"{section}.{key}: required")
            return None
        src = sec[key]
        if not isinstance(src, str):
            self.fail(f"{section}.{key}: must be an expression string")
            return None
        try:
            expr = expressions.parse(src)
        except ExpressionError as err:
            self.fail(f"{section}.{key}: {err}")
            return None
        extra = expr.variables() - allowed
        if extra:
            self.fail(
                f"{section}.{key}: uses variables {sorted(extra)}, allowed are {sorted(allowed)}"
            )
            return None
        return expr


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError(["top-level document must be a JSON object"])
    v = _Validator(doc)
    for key in doc:
        if key not in _SECTION_KEYS:
            v.fail(f"unknown section {key!r}")

    prob = v.section("problem")
    omega_raw = prob.get("omega")
    omega = (0.0, 1.0)
    if omega_raw is None:
        v.fail("problem.omega: required")
    elif (
        not isinstance(omega_raw, (list, tuple))
        or len(omega_raw) != 2
        or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in omega_raw)
        or not omega_raw[0] < omega_raw[1]
    ):
        v.fail(f"problem.omega: must be [a, b] with a < b, got {omega_raw!r}")
    else:
        omega = (float(omega_raw[0]), float(omega_raw[1]))
    final_time = v.number(prob, "problem", "T", positive=True)
    epsilon = v.number(prob, "problem", "epsilon", positive=True)
    lam = v.number(prob, "problem", "lambda_min", positive=True)
    Lam = v.number(prob, "problem", "lambda_max", positive=True)
    coeff_expr = v.expression(prob, "problem", "coefficient", {"t", "x", "s", "y"})
    rhs_expr = v.expression(prob, "problem", "rhs", {"t", "x"})
    initial_expr = v.expression(prob, "problem", "initial", {"x"})
    exact_expr = v.expression(prob, "problem", "exact_solution", {"t", "x"}, required=False)

    mac = v.section("macro")
    n_elems = None
    if "n_elems" in mac and "H" in mac:
        v.fail("macro: give n_elems or H, not both")
    elif "H" in mac:
        H = v.number(mac, "macro", "H", positive=True)
        if H is not None:
            n_elems = max(1, round((omega[1] - omega[0]) / H))
    else:
        n_elems = v.integer(mac, "macro", "n_elems")
    n_steps = None
    if "n_steps" in mac and "tau" in mac:
        v.fail("macro: give n_steps or tau, not both")
    elif "tau" in mac:
        tau = v.number(mac, "macro", "tau", positive=True)
        if tau is not None and final_time is not None:
            n_steps = max(1, round(final_time / tau))
    else:
        n_steps = v.integer(mac, "macro", "n_steps")
    mode = CoefficientMode.hmm()
    mode_raw = mac.get("coefficient_mode", "hmm")
    if isinstance(mode_raw, str) and mode_raw in ("hmm", "oracle_a0"):
        mode = CoefficientMode(mode_raw)
    elif isinstance(mode_raw, dict) and set(mode_raw) == {"fixed_a0"}:
        val = mode_raw["fixed_a0"]
        if isinstance(val, (int, float)) and not isinstance(val, bool) and math.isfinite(val):
            mode = CoefficientMode.fixed(float(val))
        else:
            v.fail(f"macro.coefficient_mode.fixed_a0: must be a finite number, got {val!r}")
    else:
        v.fail(
            f"macro.coefficient_mode: expected 'hmm', 'oracle_a0' or {{'fixed_a0': value}}, "
            f"got {mode_raw!r}"
        )

    mic = v.section("micro")
    delta = sigma = None
    for attr, key in (("delta", "delta_rule"), ("sigma", "sigma_rule")):
        if key not in mic:
            v.fail(f"micro.{key}: required")
            continue
        try:
            value = resolve_rule(mic[key], epsilon if epsilon else 1.0)
            if value <= 0:
                v.fail(f"micro.{key}: resolves to non-positive value {value!r}")
            elif attr == "delta":
                delta = value
            else:
                sigma = value
        except ValueError as err:
            v.fail(f"micro.{key}: {err}")
    h = v.number(mic, "micro", "h", positive=True)
    theta = None
    if "theta" in mic and "n_cell" in mic:
        v.fail("micro: give theta or n_cell, not both")
    elif "n_cell" in mic:
        n_cell = v.integer(mic, "micro", "n_cell")
        if n_cell is not None and sigma is not None:
            theta = sigma / n_cell
    else:
        theta = v.number(mic, "micro", "theta", positive=True)
    degree = v.integer(mic, "micro", "degree", default=2, minimum=2)

    orc = v.section("oracle", required=False)
    oracle = OracleParams(
        n_y=v.integer(orc, "oracle", "n_y", default=256, minimum=4) or 256,
        n_s=v.integer(orc, "oracle", "n_s", default=256, minimum=4) or 256,
        period_tol=v.number(orc, "oracle", "period_tol", default=1e-8, positive=True) or 1e-8,
        max_periods=v.integer(orc, "oracle", "max_periods", default=64) or 64,
    )

    swp = v.section("sweep", required=False)
    sweep_parameter = None
    sweep_values: list[float] = []
    sweep_ref = None
    if swp:
        sweep_parameter = swp.get("parameter")
        if sweep_parameter not in SWEEP_PARAMETERS:
            v.fail(f"sweep.parameter: expected one of {SWEEP_PARAMETERS}, got {sweep_parameter!r}")
            sweep_parameter = None
        values_raw = swp.get("values")
        if (
            not isinstance(values_raw, list)
            or not values_raw
            or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) and x > 0
                for x in values_raw
            )
        ):
            v.fail(f"sweep.values: must be a non-empty list of positive numbers")
        else:
            sweep_values = [float(x) for x in values_raw]
        if "reference_n_elems" in swp:
            sweep_ref = v.integer(swp, "sweep", "reference_n_elems", minimum=2)

    out = v.section("output", required=False)
    output_dir = out.get("dir", "runs")
    if not isinstance(output_dir, str):
        v.fail(f"output.dir: must be a string, got {output_dir!r}")
        output_dir = "runs"
    run_id = out.get("run_id")
    if run_id is not None and not isinstance(run_id, str):
        v.fail(f"output.run_id: must be a string, got {run_id!r}")
        run_id = None

    coefficient = None
    if coeff_expr is not None and lam is not None and Lam is not None:
        try:
            coefficient = MultiscaleCoefficient(coeff_expr, lambda_min=lam, lambda_max=Lam)
        except ValueError as err:
            v.fail(f"problem: {err}")

    if v.problems:
        raise ConfigError(v.problems)

    cfg = RunConfig(
        raw=doc,
        omega=omega,
        final_time=final_time,
        epsilon=epsilon,
        coefficient=coefficient,
        rhs_expr=rhs_expr,
        initial_expr=initial_expr,
        exact_expr=exact_expr,
        n_elems=n_elems,
        n_steps=n_steps,
        mode=mode,
        micro=MicroParams(delta=delta, sigma=sigma, h=h, theta=theta, degree=degree),
        oracle=oracle,
        sweep_parameter=sweep_parameter,
        sweep_values=sweep_values,
        sweep_reference_n_elems=sweep_ref,
        output_dir=output_dir,
        run_id=run_id or "",
    )
    if not cfg.run_id:
        cfg.run_id = _content_hash(cfg.resolved_document())
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError([f"{path}: invalid JSON ({err})"])
    return parse_config(doc)
