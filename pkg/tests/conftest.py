from collections import Counter

import pytest

from cgsmarket.genome import Genome
from cgsmarket.kernel import make_kernel
from cgsmarket.network import AgentState
from cgsmarket.valuation import encode_value


def hash_for(*values: int) -> str:
    """Hash genes that admit exactly the listed values' encodings (plus their substrings)."""
    return "".join(encode_value(v) for v in values) or "a"


def make_agent(id, lo=(0.0, 0.0), hi=(1.0, 1.0), anchors=((0.5, 0.5),), *, hash_genes="a",
               flexibility=0.2, balance=1000.0, position=(0.0, 0.0), holdings=()):
    anchors = tuple(tuple(a) for a in anchors)
    extents = tuple(h - l for l, h in zip(lo, hi))
    genome = Genome.from_parts([min(e, 1.0) for e in extents], anchors, hash_genes, flexibility)
    return AgentState(id, genome, make_kernel(lo, hi, anchors), tuple(position), balance,
                      Counter(holdings))


@pytest.fixture
def agent_factory():
    return make_agent


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
