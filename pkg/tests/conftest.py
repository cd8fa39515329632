import os
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from fracstab import MultiOrderSystem

SYSTEMS = Path(__file__).resolve().parent.parent / "systems"
SEED = int(os.environ.get("FRACSTAB_SEED", "20240611"))

EX1_A = [[1, 0, 1.5], [1, -2, 0.5], [1, 1, -3]]
EX1_ORDERS = ("0.93", "1.55", "1.24")
EX2_A = [[-8.6647, -7.0323], [4.1489, -0.0760]]
EX2_ORDERS = ("0.78", "1.17")
EX3_A = [[3, 1], [-1, -2]]
EX3_B = [[3], [2]]
EX3_C = [[-2, 0]]
EX3_ORDERS = ("0.6", "1.5")


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def systems_dir():
    return SYSTEMS


@pytest.fixture
def ex1():
    return MultiOrderSystem(EX1_A, EX1_ORDERS)


@pytest.fixture
def ex2():
    return MultiOrderSystem(EX2_A, EX2_ORDERS, [[1], [0]], [[0, 4591.8]])


@pytest.fixture
def ex3():
    return MultiOrderSystem(EX3_A, EX3_ORDERS, EX3_B, EX3_C, x0=[1, 1])


def random_orders(rng, n, max_n_lift=8):
    """Distinct-ish rational orders in (0, 2) with a small lifted dimension."""
    while True:
        base = Fraction(int(rng.integers(1, 20)), 20)
        p = [int(v) for v in rng.integers(1, 4, size=n)]
        orders = [base * q for q in p]
        if all(0 < o < 2 for o in orders) and sum(p) <= max_n_lift:
            return orders


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
