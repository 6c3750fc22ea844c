"""Named test potentials used by the demos and the acceptance suite."""

from __future__ import annotations

from fractions import Fraction

from .metricize import Potential, tile_words
from .subdivision import SubdivisionRule


def bump_potential(rule: SubdivisionRule, tile: str = "tf_1_1", bump=2) -> Potential:
    """1 + bump on one tile: depth 1, positive, not cohomologous to a constant.

    The default tile on the Lattes pillow is a corner square at the centre
    of the front face, so curve points (which read the least tile id) rarely
    see the bump and the curve pressure stays well below the full pressure.
    """
    return Potential.constant(rule, 1).add(rule, Potential.indicator(rule, tile, bump))


def return_potential(rule: SubdivisionRule) -> Potential:
    """1 + [first tile == third tile]: depth 3 with nonzero temporal distances."""
    cells = rule.cells
    table = {tuple(cells.names[t] for t in w): Fraction(1 + (w[0] == w[2])) for w in tile_words(cells, 3)}
    return Potential.from_table(rule, 3, table, label="return")
