"""Symbol registry shared by every expression of one analysis.

All expressions of a single problem hold indices into one ``SymbolTable``;
registration order fixes the canonical monomial order, so it must be
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

KINDS = (
    "position",
    "velocity",
    "acceleration",
    "momentum",
    "multiplier",
    "parameter",
    "time",
)


class SymbolError(Exception):
    pass


@dataclass(frozen=True)
class Symbol:
    name: str
    index: int
    kind: str
    base: str | None = None  # position this is a derivative of, if any
    order: int = 0  # 0 position/other, 1 velocity, 2 acceleration

    def __repr__(self):
        return self.name


@dataclass
class SymbolTable:
    _by_name: dict = field(default_factory=dict)
    _by_index: list = field(default_factory=list)

    def register(self, name: str, kind: str, base: str | None = None, order: int = 0) -> Symbol:
        if kind not in KINDS:
            raise SymbolError(f"unknown symbol kind {kind!r}")
        if name in self._by_name:
            existing = self._by_name[name]
            if existing.kind != kind:
                raise SymbolError(f"symbol {name!r} already registered with kind {existing.kind!r}")
            return existing
        sym = Symbol(name, len(self._by_index), kind, base, order)
        self._by_name[name] = sym
        self._by_index.append(sym)
        return sym

    def register_fresh(self, name: str, kind: str) -> Symbol:
        """Register under `name`, appending underscores until the name is free."""
        while name in self._by_name:
            name = name + "_"
        return self.register(name, kind)

    def position(self, name: str) -> Symbol:
        """Register a position coordinate together with its d()/dd() symbols."""
        sym = self.register(name, "position", base=name, order=0)
        self.register(f"d({name})", "velocity", base=name, order=1)
        self.register(f"dd({name})", "acceleration", base=name, order=2)
        return sym

    def velocity(self, pos: Symbol) -> Symbol:
        return self._by_name[f"d({pos.base or pos.name})"]

    def acceleration(self, pos: Symbol) -> Symbol:
        return self._by_name[f"dd({pos.base or pos.name})"]

    def get(self, name: str) -> Symbol | None:
        return self._by_name.get(name)

    def __getitem__(self, key) -> Symbol:
        if isinstance(key, int):
            return self._by_index[key]
        sym = self._by_name.get(key)
        if sym is None:
            raise SymbolError(f"unknown symbol {key!r}")
        return sym

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __len__(self) -> int:
        return len(self._by_index)

    def symbols(self):
        return tuple(self._by_index)
