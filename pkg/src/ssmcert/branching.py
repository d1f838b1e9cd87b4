"""Branching matrices dominating the SAW tree of Z^2.

A walk is typed by its longest suffix that is a proper sub-path of some
self-avoiding polygon of length <= max_cycle. That suffix decides which
next steps close a short cycle (and how the leaf rule fixes them), and the
suffix of the extended walk is again determined by it, so these suffixes
are the states of a finite automaton generating the cycle-avoiding tree.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .lattice import DIRECTIONS, OPPOSITE, STEP, build_box
from .sawtree import build_saw_tree

# D4 acting on direction letters, written as the images of "NESW".
DIHEDRAL = ("NESW", "ESWN", "SWNE", "WNES", "SENW", "NWSE", "ENWS", "WSEN")


class DominationFailure(Exception):
    pass


@dataclass(frozen=True)
class BranchingMatrix:
    entries: tuple
    root: int = 0
    labels: Optional[tuple] = None
    # symmetries used to merge walk types, as images of "NESW"
    symmetries: tuple = ("NESW",)

    def __post_init__(self):
        rows = tuple(tuple(int(x) for x in row) for row in self.entries)
        t = len(rows)
        if any(len(r) != t for r in rows):
            raise ValueError("branching matrix must be square")
        if any(x < 0 for r in rows for x in r):
            raise ValueError("branching matrix entries must be nonnegative")
        if t and not 0 <= self.root < t:
            raise ValueError("root type out of range")
        if self.labels is not None and len(self.labels) != t:
            raise ValueError("one label per type")
        object.__setattr__(self, "entries", rows)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "symmetries", tuple(self.symmetries))

    @property
    def t(self) -> int:
        return len(self.entries)

    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=float).reshape(self.t, self.t)

    def row_sums(self) -> list[int]:
        return [sum(r) for r in self.entries]

    def permuted(self, perm: Sequence[int]) -> "BranchingMatrix":
        """Relabel so that new index k is old index perm[k]."""
        inv = {old: new for new, old in enumerate(perm)}
        rows = [[self.entries[perm[a]][perm[b]] for b in range(self.t)] for a in range(self.t)]
        labels = None if self.labels is None else [self.labels[p] for p in perm]
        return BranchingMatrix(rows, inv[self.root], labels, self.symmetries)


def row_sums(M: BranchingMatrix) -> tuple[list[int], int]:
    """Per-type out-degrees and their maximum."""
    d = M.row_sums()
    return d, max(d, default=0)


# ------------------------------------------------------------ walk geometry


def _positions(walk: str) -> list[tuple[int, int]]:
    x = y = 0
    out = [(0, 0)]
    for d in walk:
        dx, dy = STEP[d]
        x, y = x + dx, y + dy
        out.append((x, y))
    return out


@lru_cache(maxsize=None)
def polygons(max_cycle: int) -> frozenset:
    """Direction strings of self-avoiding polygons of length <= max_cycle, every start and orientation."""
    out = set()
    walk: list[str] = []
    pos = [(0, 0)]
    seen = {(0, 0)}

    def rec():
        for d in DIRECTIONS:
            if walk and d == OPPOSITE[walk[-1]]:
                continue
            dx, dy = STEP[d]
            p = (pos[-1][0] + dx, pos[-1][1] + dy)
            if p == (0, 0):
                if len(walk) + 1 >= 4:
                    out.add("".join(walk) + d)
                continue
            if p in seen or len(walk) + 1 >= max_cycle:
                continue
            # prune walks that cannot get home in time
            if abs(p[0]) + abs(p[1]) > max_cycle - len(walk) - 1:
                continue
            walk.append(d)
            pos.append(p)
            seen.add(p)
            rec()
            seen.discard(p)
            pos.pop()
            walk.pop()

    rec()
    return frozenset(out)


@lru_cache(maxsize=None)
def polygon_subpaths(max_cycle: int) -> dict:
    """Proper sub-paths of short polygons, mapped to the fewest extra edges needed to close one."""
    best: dict[str, int] = {"": 4}
    for poly in polygons(max_cycle):
        n = len(poly)
        doubled = poly + poly
        for i in range(n):
            for k in range(1, n):
                s = doubled[i : i + k]
                if best.get(s, n) >= n - k:
                    best[s] = n - k
    return best


def closing_step(state: str, d: str, max_cycle: int, ranking: str = DIRECTIONS):
    """Return None if state+d closes no cycle of length <= max_cycle, else the leaf pin.

    The result is True when the closing leaf is fixed occupied.
    """
    walk = state + d
    pos = _positions(walk)
    end = pos[-1]
    for k in range(len(pos) - 2, -1, -1):
        if pos[k] == end:
            if len(pos) - 1 - k > max_cycle:
                return None
            first, back = walk[k], OPPOSITE[d]
            # occupied unless the first step outranks the step back to the closing vertex
            return ranking.index(first) > ranking.index(back)
    return None


class WalkAutomaton:
    """States and transitions of the cycle-avoiding walk tree."""

    def __init__(self, max_cycle: int, prune: bool, ranking: str = DIRECTIONS, directions: str = DIRECTIONS):
        if max_cycle < 4 or max_cycle % 2:
            raise ValueError(f"unsupported max_cycle {max_cycle}: need an even integer >= 4")
        self.max_cycle = max_cycle
        self.prune = prune
        self.ranking = ranking
        self.subpaths = polygon_subpaths(max_cycle)
        self.maxlen = max_cycle - 1
        self.children: dict[str, list[str]] = {}
        self.killed: set[str] = set()
        order = [""]
        seen = {""}
        i = 0
        while i < len(order):
            s = order[i]
            i += 1
            kids, forced = self._step(s, directions)
            self.children[s] = kids
            if forced and prune and s:
                self.killed.add(s)
                continue
            for c in kids:
                if c not in seen:
                    seen.add(c)
                    order.append(c)
        # only states reachable through surviving states remain
        alive = [s for s in order if s not in self.killed]
        reach = {""}
        queue = deque([""])
        while queue:
            s = queue.popleft()
            for c in self.children[s]:
                if c not in self.killed and c not in reach:
                    reach.add(c)
                    queue.append(c)
        self.states = [s for s in alive if s in reach]
        self.kids = {s: [c for c in self.children[s] if c not in self.killed] for s in self.states}

    def reduce(self, walk: str) -> str:
        for k in range(min(len(walk), self.maxlen), 0, -1):
            if walk[-k:] in self.subpaths:
                return walk[-k:]
        return ""

    def _step(self, s: str, directions: str):
        kids, forced = [], False
        for d in directions:
            if s and d == OPPOSITE[s[-1]]:
                continue
            verdict = closing_step(s, d, self.max_cycle, self.ranking)
            if verdict is not None:
                forced = forced or verdict
                continue
            kids.append(self.reduce(s + d))
        return kids, forced

    def admissible_symmetries(self) -> list[str]:
        """Dihedral maps that commute with the automaton, leaf outcomes included."""
        if not self.prune:
            return list(DIHEDRAL)
        out = []
        for g in DIHEDRAL:
            tr = str.maketrans(DIRECTIONS, g)
            ok = True
            for s in self.states:
                gs = s.translate(tr)
                for d in DIRECTIONS:
                    if s and d == OPPOSITE[s[-1]]:
                        continue
                    a = closing_step(s, d, self.max_cycle, self.ranking)
                    b = closing_step(gs, d.translate(tr), self.max_cycle, self.ranking)
                    if a != b:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                out.append(g)
        return out


def _label_key(s: str):
    return tuple(DIRECTIONS.index(c) for c in s)


def canonical_label(s: str, symmetries: Sequence[str]) -> str:
    return min((s.translate(str.maketrans(DIRECTIONS, g)) for g in symmetries), key=lambda w: (len(w), _label_key(w)))


def generate_matrix(max_cycle: int, prune: bool, ranking: str = DIRECTIONS, directions: str = DIRECTIONS) -> BranchingMatrix:
    """Branching matrix of walks avoiding cycles of length <= max_cycle.

    ``directions`` only changes the internal enumeration order; the result is
    canonically ordered so it does not depend on it.
    """
    auto = WalkAutomaton(max_cycle, prune, ranking, directions)
    syms = auto.admissible_symmetries()
    canon = {s: canonical_label(s, syms) for s in auto.states}
    reps = sorted(set(canon.values()), key=lambda s: (s != "", -auto.subpaths[s], len(s), _label_key(s)))
    index = {s: k for k, s in enumerate(reps)}
    rows = []
    for r in reps:
        row = [0] * len(reps)
        for c in auto.kids[r]:
            row[index[canon[c]]] += 1
        rows.append(row)
    return BranchingMatrix(rows, index[""], reps, tuple(syms))


def perron_root(M: BranchingMatrix) -> float:
    if M.t == 0:
        return 0.0
    return float(max(abs(np.linalg.eigvals(M.array()))))


# ------------------------------------------------------------ domination


def _walk_of(path_vertices, labels) -> str:
    out = []
    for a, b in zip(path_vertices, path_vertices[1:]):
        (x0, y0), (x1, y1) = labels[a], labels[b]
        for d, (dx, dy) in STEP.items():
            if (x1 - x0, y1 - y0) == (dx, dy):
                out.append(d)
    return "".join(out)


def _labelled_typer(M: BranchingMatrix):
    index = {lab: k for k, lab in enumerate(M.labels)}
    maxlen = max((len(s) for s in M.labels), default=0)

    def typer(walk: str):
        for k in range(min(len(walk), maxlen), -1, -1):
            c = canonical_label(walk[len(walk) - k :], M.symmetries)
            if c in index:
                return index[c]
        return None

    return typer


def _assignable(child_sets: list[set], caps: Sequence[int]) -> bool:
    """Can each child take a type from its set with per-type capacities caps?"""
    match: dict[int, list[int]] = {}

    def augment(ch, seen):
        for j in child_sets[ch]:
            if j in seen:
                continue
            seen.add(j)
            holders = match.setdefault(j, [])
            if len(holders) < caps[j]:
                holders.append(ch)
                return True
            for other in list(holders):
                if augment(other, seen):
                    holders.remove(other)
                    holders.append(ch)
                    return True
        return False

    return all(augment(ch, set()) for ch in range(len(child_sets)))


def verify_domination(M: BranchingMatrix, L: int) -> tuple[bool, Optional[str]]:
    """Check that the depth-L SAW tree of build_box(L) at the origin lies in F_{<=M}.

    Returns (True, None) or (False, walk) naming a node whose children cannot
    be typed within M.
    """
    box = build_box(L)
    tree = build_saw_tree(box, (0, 0), max(L, 1))
    labels = tree.graph.labels
    # walk strings for every node
    walks = {id(tree.root): ""}
    stack = [(tree.root, [tree.root.vertex])]
    order = []
    while stack:
        node, path = stack.pop()
        order.append(node)
        for ch in node.children:
            walks[id(ch)] = _walk_of(path + [ch.vertex], labels)
            stack.append((ch, path + [ch.vertex]))

    if M.labels is not None:
        typer = _labelled_typer(M)
        for node in order:
            w = walks[id(node)]
            i = M.root if node is tree.root else typer(w)
            if i is None:
                return False, w
            counts = [0] * M.t
            for ch in node.children:
                j = typer(walks[id(ch)])
                if j is None:
                    return False, walks[id(ch)]
                counts[j] += 1
            if any(c > m for c, m in zip(counts, M.entries[i])):
                return False, w
        return True, None

    # unlabelled matrices: degree screen from the top, then bottom-up sets of feasible types
    top = max(M.row_sums(), default=0)
    for node in order:
        if len(node.children) > top:
            return False, walks[id(node)]
    feasible: dict[int, set] = {}
    for node in reversed(order):
        sets = [feasible[id(ch)] for ch in node.children]
        ok = {i for i in range(M.t) if _assignable(sets, M.entries[i])}
        if not ok or (node is tree.root and M.root not in ok):
            return False, walks[id(node)]
        feasible[id(node)] = ok
    return True, None


# ------------------------------------------------------------ file format


def write_matrix(M: BranchingMatrix, path) -> None:
    out = [f"branching {M.t} {M.root}\n"]
    out += [" ".join(map(str, row)) + "\n" for row in M.entries]
    if tuple(M.symmetries) != ("NESW",):
        out.append("symmetry " + " ".join(M.symmetries) + "\n")
    if M.labels is not None:
        out += [f"label {j}: {lab}\n" for j, lab in enumerate(M.labels)]
    Path(path).write_text("".join(out))


def read_matrix(path) -> BranchingMatrix:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != "branching" or len(head) != 3:
        raise ValueError("matrix file must start with 'branching t root'")
    t, root = int(head[1]), int(head[2])
    rows = [[int(x) for x in ln.split()] for ln in lines[1 : 1 + t]]
    labels: Optional[list] = None
    syms: tuple = ("NESW",)
    for ln in lines[1 + t :]:
        if ln.startswith("symmetry"):
            syms = tuple(ln.split()[1:])
        elif ln.startswith("label"):
            key, val = ln[len("label") :].split(":", 1)
            if labels is None:
                labels = [""] * t
            labels[int(key)] = val.strip()
        else:
            raise ValueError(f"unexpected line {ln!r}")
    return BranchingMatrix(rows, root, labels, syms)
