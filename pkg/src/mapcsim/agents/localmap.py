"""Client-side memory of the grid, anchored at the agent's spawn cell."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..perception import Percept
from ..world import Position, add, diamond


class MergeConflict(ValueError):
    """Two maps disagree about static terrain at the same cell and step."""


@dataclass(frozen=True)
class Cell:
    terrain: str  # "empty" | "obstacle" | "goal"
    step: int
    thing: str | None = None  # "agent:<team>" | "block:<type>"
    dispenser: str | None = None

    def static_key(self) -> tuple:
        return (self.terrain, self.dispenser)


@dataclass
class LocalMap:
    cells: dict[Position, Cell] = field(default_factory=dict)
    position: Position = (0, 0)

    def observe(self, percept: Percept, vision: int) -> list[Position]:
        """Record every cell of the vision diamond; returns the updated positions.

        Cells the percept does not mention are recorded as empty.
        """
        step = percept.step
        terrain = {(x, y): kind for x, y, kind in percept.terrain}
        things = {(x, y): f"{kind}:{detail}" for x, y, kind, detail in percept.things}
        dispensers = {(x, y): t for x, y, t in percept.dispensers}
        updated = []
        for rel in diamond(vision):
            pos = add(self.position, rel)
            self.cells[pos] = Cell(terrain.get(rel, "empty"), step, things.get(rel),
                                   dispensers.get(rel))
            updated.append(pos)
        return updated

    def put(self, pos: Position, cell: Cell) -> None:
        """Store ``cell`` unless a newer observation is already known."""
        old = self.cells.get(pos)
        if old is None or cell.step > old.step:
            self.cells[pos] = cell
        elif cell.step == old.step and cell.static_key() != old.static_key():
            raise MergeConflict(f"cell {pos} at step {cell.step}: {old} vs {cell}")

    def get(self, pos: Position) -> Cell | None:
        return self.cells.get(pos)

    def dispensers(self) -> dict[Position, str]:
        return {p: c.dispenser for p, c in self.cells.items() if c.dispenser}

    def goals(self) -> set[Position]:
        return {p for p, c in self.cells.items() if c.terrain == "goal"}

    def __len__(self) -> int:
        return len(self.cells)


def merge_maps(a: LocalMap, b: LocalMap, offset: Position) -> LocalMap:
    """Union of ``a`` and ``b`` in ``a``'s frame; ``offset`` is ``b``'s anchor in that frame.

    The newer observation wins per cell. Equal steps with different static
    terrain raise :class:`MergeConflict`; the inputs are left untouched.
    """
    merged = LocalMap(dict(a.cells), a.position)
    for pos, cell in b.cells.items():
        merged.put(add(pos, offset), cell)
    return merged
