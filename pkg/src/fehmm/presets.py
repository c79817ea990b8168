"""Canned experiment configurations for the reference studies.

``paper-example-1`` and ``paper-example-2`` run the macro mesh sweep at fixed
tau = 1/15 and theta = sigma/15 with cells of 512 quadratic elements;
``paper-motivation`` sweeps the single-scale solver through the stagnation
regime at two desk-scale values of eps.
"""

from __future__ import annotations

A0_EXAMPLE_1 = 3.352429824667637
H_SWEEP = [0.25, 0.125, 0.0625, 0.03125, 0.015625]

# delta(eps=1e-3) = eps^(1/3) = 0.1; 512 cell elements
_H_CELL = 0.1 / 512


def _convergence_preset(coefficient: str, lam: float, big: float, a0: float) -> dict:
    return {
        "problem": {
            "omega": [0.0, 1.0],
            "T": 1.0,
            "epsilon": 1e-3,
            "coefficient": coefficient,
            "lambda_min": lam,
            "lambda_max": big,
            "rhs": f"2*t*(x - x^2) + 2*{a0!r}*t^2",
            "initial": "0",
            "exact_solution": "t^2*(x - x^2)",
        },
        "macro": {"n_elems": 64, "n_steps": 15, "coefficient_mode": "hmm"},
        "micro": {
            "delta_rule": "eps^(1/3)",
            "sigma_rule": "eps^(2/3)",
            "h": _H_CELL,
            "n_cell": 15,
            "degree": 2,
        },
        "oracle": {"n_y": 256, "n_s": 256, "period_tol": 1e-8, "max_periods": 64},
        "sweep": {"parameter": "H", "values": H_SWEEP},
        "output": {"dir": "runs"},
    }


def _motivation_preset(epsilon: float) -> dict:
    # tau_f = eps^2 / 4 resolves the temporal oscillation
    n_steps = round(4.0 / epsilon**2)
    return {
        "problem": {
            "omega": [0.0, 1.0],
            "T": 1.0,
            "epsilon": epsilon,
            "coefficient": "3 + cos(2*pi*y) + cos(2*pi*s)^2",
            "lambda_min": 2.0,
            "lambda_max": 5.0,
            "rhs": f"2*t*(x - x^2) + 2*{A0_EXAMPLE_1!r}*t^2",
            "initial": "0",
        },
        "macro": {"n_elems": 2560, "n_steps": n_steps, "coefficient_mode": "hmm"},
        "micro": {
            "delta_rule": "eps^(1/3)",
            "sigma_rule": "eps^(2/3)",
            "h": _H_CELL,
            "n_cell": 15,
            "degree": 2,
        },
        "sweep": {
            "parameter": "h_f",
            "values": [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125],
            "reference_n_elems": 2560,
        },
        "output": {"dir": "runs"},
    }


def preset_documents(name: str) -> list[dict]:
    """Config documents for a preset; multi-eps presets return one per series."""
    if name == "paper-example-1":
        return [
            _convergence_preset("3 + cos(2*pi*y) + cos(2*pi*s)^2", 2.0, 5.0, A0_EXAMPLE_1)
        ]
    if name == "paper-example-2":
        return [_convergence_preset("1/(2 - cos(2*pi*y))", 1.0 / 3.0, 1.0, 0.5)]
    if name == "paper-motivation":
        return [_motivation_preset(0.1), _motivation_preset(0.05)]
    raise KeyError(
        f"unknown preset {name!r}; available: paper-example-1, paper-example-2, paper-motivation"
    )


PRESET_NAMES = ("paper-example-1", "paper-example-2", "paper-motivation")
