"""A small finite relation algebra over event ids.

Relations are sets of (int, int) pairs.  The operations mirror the usual
herd-style combinators: union, intersection, difference, composition (`;`),
inverse, identity over a set, optional / transitive closures, and the
acyclicity and emptiness tests used by the axioms.
"""

from __future__ import annotations

from typing import Dict, FrozenSet, Iterable, Set, Tuple

Pair = Tuple[int, int]


class Rel:
    __slots__ = ("pairs",)

    def __init__(self, pairs: Iterable[Pair] = ()):
        self.pairs: FrozenSet[Pair] = frozenset(pairs)

    # -- set-like operations
    def __or__(self, other: "Rel") -> "Rel":
        return Rel(self.pairs | other.pairs)

    def __and__(self, other: "Rel") -> "Rel":
        return Rel(self.pairs & other.pairs)

    def __sub__(self, other: "Rel") -> "Rel":
        return Rel(self.pairs - other.pairs)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Rel) and self.pairs == other.pairs

    def __hash__(self) -> int:
        return hash(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __contains__(self, pair: Pair) -> bool:
        return pair in self.pairs

    def __bool__(self) -> bool:
        return bool(self.pairs)

    def __repr__(self) -> str:
        return f"Rel({sorted(self.pairs)})"

    # -- relational operations
    def inv(self) -> "Rel":
        return Rel((b, a) for a, b in self.pairs)

    def seq(self, other: "Rel") -> "Rel":
        by_src: Dict[int, Set[int]] = {}
        for a, b in other.pairs:
            by_src.setdefault(a, set()).add(b)
        out = set()
        for a, b in self.pairs:
            for c in by_src.get(b, ()):
                out.add((a, c))
        return Rel(out)

    def maybe(self) -> "Rel":
        """Reflexive closure over the elements mentioned in the relation."""
        elems = {e for p in self.pairs for e in p}
        return Rel(self.pairs | {(e, e) for e in elems})

    def plus(self) -> "Rel":
        """Transitive closure."""
        succ: Dict[int, Set[int]] = {}
        for a, b in self.pairs:
            succ.setdefault(a, set()).add(b)
        closed: Dict[int, Set[int]] = {}

        def reach(a: int) -> Set[int]:
            if a in closed:
                return closed[a]
            closed[a] = set()           # cycle guard; filled below
            out: Set[int] = set()
            stack = [a]
            seen = set()
            while stack:
                n = stack.pop()
                for m in succ.get(n, ()):
                    if m not in out:
                        out.add(m)
                        if m not in seen:
                            seen.add(m)
                            stack.append(m)
            closed[a] = out
            return out

        pairs = set()
        for a in succ:
            for b in reach(a):
                pairs.add((a, b))
        return Rel(pairs)

    def domain(self) -> FrozenSet[int]:
        return frozenset(a for a, _ in self.pairs)

    def range(self) -> FrozenSet[int]:
        return frozenset(b for _, b in self.pairs)

    def restrict(self, dom: Iterable[int] = None,
                 rng: Iterable[int] = None) -> "Rel":
        """[dom] ; self ; [rng] with either side optional."""
        dset = set(dom) if dom is not None else None
        rset = set(rng) if rng is not None else None
        return Rel((a, b) for a, b in self.pairs
                   if (dset is None or a in dset)
                   and (rset is None or b in rset))

    def is_empty(self) -> bool:
        return not self.pairs

    def acyclic(self) -> bool:
        return find_cycle(self) is None


def idrel(elems: Iterable[int]) -> Rel:
    return Rel((e, e) for e in elems)


def cross(xs: Iterable[int], ys: Iterable[int]) -> Rel:
    ys = list(ys)
    return Rel((x, y) for x in xs for y in ys)


def find_cycle(rel: Rel):
    """Return a list of event ids forming a cycle, or None."""
    succ: Dict[int, list] = {}
    for a, b in rel.pairs:
        succ.setdefault(a, []).append(b)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in succ}
    parent: Dict[int, int] = {}
    for start in succ:
        if color.get(start, WHITE) != WHITE:
            continue
        stack = [(start, iter(succ.get(start, ())))]
        color[start] = GREY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                c = color.get(nxt, WHITE)
                if c == GREY:
                    # unwind the cycle
                    cycle = [nxt, node]
                    cur = node
                    while cur != nxt:
                        cur = parent[cur]
                        cycle.append(cur)
                    cycle.reverse()
                    return cycle[:-1]
                if c == WHITE:
                    color[nxt] = GREY
                    parent[nxt] = node
                    stack.append((nxt, iter(succ.get(nxt, ()))))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return None


class RelationEnv:
    """Named relations and named event sets of one candidate execution."""

    def __init__(self):
        self.rels: Dict[str, Rel] = {}
        self.sets: Dict[str, FrozenSet[int]] = {}

    def rel(self, name: str) -> Rel:
        return self.rels.get(name, Rel())

    def set_(self, name: str) -> FrozenSet[int]:
        return self.sets.get(name, frozenset())

    def __getitem__(self, name: str) -> Rel:
        return self.rel(name)

    def __setitem__(self, name: str, value: Rel) -> None:
        self.rels[name] = value
