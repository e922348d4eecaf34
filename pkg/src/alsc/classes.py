"""Two-level land-cover class taxonomy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator


@dataclass(frozen=True)
class ClassEntry:
    code: int
    name: str
    level: int
    parent_code: int | None = None


class ClassTable:
    """Lookup of class codes with level-2 to level-1 rollup.

    Level-1 entries are their own parents.  Level-2 entries must point at
    exactly one level-1 entry.
    """

    def __init__(self, entries: Iterable[ClassEntry]):
        self._entries: dict[int, ClassEntry] = {}
        for e in entries:
            if e.code in self._entries:
                raise ValueError(f"duplicate class code {e.code}")
            if e.level not in (1, 2):
                raise ValueError(f"class {e.code}: level must be 1 or 2")
            self._entries[e.code] = e
        for e in self._entries.values():
            if e.level == 2:
                parent = self._entries.get(e.parent_code)
                if parent is None or parent.level != 1:
                    raise ValueError(
                        f"class {e.code} ({e.name}) has no level-1 parent")

    def __contains__(self, code: int) -> bool:
        return int(code) in self._entries

    def __iter__(self) -> Iterator[ClassEntry]:
        return iter(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, code: int) -> ClassEntry:
        return self._entries[int(code)]

    @property
    def codes(self) -> list[int]:
        return sorted(self._entries)

    def name(self, code: int) -> str:
        return self._entries[int(code)].name

    def parent(self, code: int) -> int:
        """Level-1 code for ``code`` (identity for level-1 codes)."""
        e = self._entries[int(code)]
        return e.code if e.level == 1 else e.parent_code

    def level_codes(self, level: int) -> list[int]:
        """Codes usable as labels at ``level``.

        Every code is a valid level-2 label: level-1 codes with children
        double as the first subclass (ground 2 is also "ground" at level 2).
        """
        if level == 1:
            return sorted(e.code for e in self if e.level == 1)
        return self.codes

    def children(self, code: int) -> list[int]:
        return sorted(e.code for e in self
                      if e.level == 2 and e.parent_code == code)


# (level-1 name, level-1 code, [(level-2 name, level-2 code), ...])
_DEFAULT_LAYOUT = [
    ("unclassified", 0, []),
    ("undefined", 1, []),
    ("ground", 2, [("sand", 18), ("gravel", 3), ("stone, rock", 4),
                   ("asphalt", 22), ("cement", 21),
                   ("river dam, groyne", 28)]),
    ("vegetation", 5, [("coniferous forest", 6), ("mixed forest", 7)]),
    ("building", 8, [("wall, building wall", 24)]),
    ("water", 9, []),
    ("artificial objects", 10, [
        ("temporary object (under construction)", 11), ("bridge", 12),
        ("power line", 13), ("tower, power pole", 14), ("bridge cable", 15),
        ("road protection fence", 16), ("bridge construction", 17)]),
    ("technical", 23, []),
    ("ground, vegetation", 20, []),
    ("error", 99, []),
]

# Level-1 codes that double as their own level-2 refinement under a
# different name.
_LEVEL2_ALIASES = {5: "deciduous forest", 8: "building roof",
                   10: "car, other moving object"}


def default_class_table() -> ClassTable:
    """The 26-class airborne survey taxonomy.

    Several level-1 codes (ground 2, vegetation 5, building 8, artificial
    objects 10) are reused as level-2 codes for their first subclass, so the
    table carries them once, as level-1 entries; ``level2_name`` gives the
    refined label.
    """
    entries = []
    for name, code, children in _DEFAULT_LAYOUT:
        entries.append(ClassEntry(code, name, 1, None))
        for child_name, child_code in children:
            entries.append(ClassEntry(child_code, child_name, 2, code))
    return ClassTable(entries)


def level2_name(table: ClassTable, code: int) -> str:
    """Display name of ``code`` at the finer level."""
    if table is DEFAULT_CLASSES or table.codes == DEFAULT_CLASSES.codes:
        if code in _LEVEL2_ALIASES:
            return _LEVEL2_ALIASES[code]
    return table.name(code)


DEFAULT_CLASSES = default_class_table()
