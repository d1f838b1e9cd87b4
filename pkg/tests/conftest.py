from hypothesis import strategies as st

from ssmcert.lattice import GenericGraph, Pin, PinSet


@st.composite
def graphs(draw, max_n: int = 9, max_p: float = 0.35):
    n = draw(st.integers(1, max_n))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    p = draw(st.floats(0.1, max_p))
    flags = draw(st.lists(st.floats(0, 1), min_size=len(pairs), max_size=len(pairs)))
    edges = [e for e, f in zip(pairs, flags) if f < p]
    shuffle = draw(st.randoms(use_true_random=False))
    order = [[] for _ in range(n)]
    for a, b in edges:
        order[a].append(b)
        order[b].append(a)
    for o in order:
        shuffle.shuffle(o)
    return GenericGraph.from_edges(n, edges, order)


@st.composite
def valid_pins(draw, g: GenericGraph, skip=()):
    """Random pins with no two adjacent occupied vertices."""
    pins = {}
    for v in range(g.n):
        if v in skip:
            continue
        choice = draw(st.sampled_from([None, None, Pin.OCCUPIED, Pin.UNOCCUPIED]))
        if choice is Pin.OCCUPIED and any(pins.get(w) is Pin.OCCUPIED for w in g.neighbors(v)):
            choice = Pin.UNOCCUPIED
        if choice is not None:
            pins[v] = choice
    return PinSet(pins)
