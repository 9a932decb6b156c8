"""The two reference games used throughout the tests and docs."""
from __future__ import annotations

from .model import CongestionGame, PiecewiseCostCurve, singleton_game

LOW, HIGH = "low", "high"


def example_one() -> CongestionGame:
    """Two equiprobable states; a costs 1 only in the high state, b costs 2 y_b + 1/3."""
    cb = PiecewiseCostCurve.polynomial([1 / 3, 2.0])
    curves = {
        ("a", LOW): PiecewiseCostCurve.constant(0.0),
        ("a", HIGH): PiecewiseCostCurve.constant(1.0),
        ("b", LOW): cb,
        ("b", HIGH): cb,
    }
    return singleton_game([LOW, HIGH], [0.5, 0.5], curves)


def example_two() -> CongestionGame:
    """One state; a costs 1, b costs |4 y_b - 2| (a V-shaped curve)."""
    vee = PiecewiseCostCurve([0.0, 0.5, 1.0], [[2.0, -4.0], [-2.0, 4.0]])
    curves = {("a", "theta"): PiecewiseCostCurve.constant(1.0), ("b", "theta"): vee}
    return singleton_game(["theta"], [1.0], curves)
