"""Marker panel: stable global integer indices for marker names.

The sinusoidal marker encoding keys off these indices, so assignments must
never change once made; new markers always get the smallest unused index.
"""

from __future__ import annotations


class PanelError(ValueError):
    pass


class MarkerPanel:
    def __init__(self, entries=None, nuclear_index: int = 0):
        self._names: list[str] = []
        self._indices: list[int] = []
        self.nuclear_index = nuclear_index
        for name, idx in entries or []:
            self._add(name, idx)
        if self._names:
            self._check_nuclear()

    def _add(self, name: str, idx: int) -> None:
        if any(name.lower() == n.lower() for n in self._names):
            raise PanelError(f"duplicate marker name {name!r}")
        if idx in self._indices:
            raise PanelError(f"duplicate global index {idx} for {name!r}")
        if idx < 0:
            raise PanelError(f"negative global index {idx}")
        self._names.append(name)
        self._indices.append(int(idx))

    def _check_nuclear(self) -> None:
        if not 0 <= self.nuclear_index < len(self._names):
            raise PanelError(f"nuclear_index {self.nuclear_index} out of range")

    def register(self, name: str) -> int:
        """Return the marker's global index, assigning the smallest unused one if new."""
        for n, i in zip(self._names, self._indices):
            if n.lower() == name.lower():
                return i
        used = set(self._indices)
        idx = 0
        while idx in used:
            idx += 1
        self._add(name, idx)
        return idx

    @property
    def entries(self) -> list[tuple[str, int]]:
        return list(zip(self._names, self._indices))

    @property
    def nuclear_global_index(self) -> int:
        self._check_nuclear()
        return self._indices[self.nuclear_index]

    @property
    def nuclear_name(self) -> str:
        self._check_nuclear()
        return self._names[self.nuclear_index]

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return any(name.lower() == n.lower() for n in self._names)

    def index_of(self, name: str) -> int:
        for n, i in zip(self._names, self._indices):
            if n.lower() == name.lower():
                return i
        raise PanelError(f"unknown marker {name!r}; panel has {self._names}")

    def name_of(self, index: int) -> str:
        for n, i in zip(self._names, self._indices):
            if i == index:
                return n
        raise PanelError(f"no marker with global index {index}")

    def to_dict(self) -> dict:
        return {"entries": [[n, i] for n, i in self.entries], "nuclear_index": self.nuclear_index}

    @classmethod
    def from_dict(cls, d: dict) -> "MarkerPanel":
        return cls(entries=[(n, i) for n, i in d["entries"]], nuclear_index=d["nuclear_index"])
