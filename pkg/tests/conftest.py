import pytest

from lgdim.schemes import SchemeFamily, bedford_mcmullen, validate_scheme
from lgdim.sequences import SymbolSequence

# log_2(2**(log_3 2) + 1), evaluated with 30-digit mpmath.
BM32_DIM = 1.3496838201955776


@pytest.fixture
def full_square():
    return bedford_mcmullen(2, 2, {(0, 0), (0, 1), (1, 0), (1, 1)})


@pytest.fixture
def single_map():
    return validate_scheme({"rows": [{"b": 0.5, "d": 0.2, "cells": [{"a": 0.25, "c": 0.1}]}]})


@pytest.fixture
def bm32():
    return bedford_mcmullen(3, 2, {(0, 0), (0, 2), (1, 1)})


@pytest.fixture
def bm32_alt():
    return bedford_mcmullen(3, 2, {(0, 0), (0, 1), (1, 2)})


@pytest.fixture
def bm43():
    return bedford_mcmullen(4, 3, {(0, 1), (1, 0), (1, 3), (2, 2)})


@pytest.fixture
def pair_family(bm32, bm43):
    return SchemeFamily((bm32, bm43))


@pytest.fixture
def one():
    return SymbolSequence.periodic([1])


def pytest_terminal_summary(terminalreporter):
    from _report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
