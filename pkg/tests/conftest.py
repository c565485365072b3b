import random

import pytest
from hypothesis import strategies as st

from genus0 import trees as T


@st.composite
def stable_trees(draw, min_n=4, max_n=7, min_degree=0, max_degree=None):
    n = draw(st.integers(min_n, max_n))
    top = n - 3 if max_degree is None else min(max_degree, n - 3)
    r = draw(st.integers(min_degree, top))
    pool = T.enumerate_stable_trees(n, r)
    return pool[draw(st.integers(0, len(pool) - 1))]


@st.composite
def permutations_of(draw, n):
    perm = list(range(1, n + 1))
    rnd = random.Random(draw(st.integers(0, 2**32)))
    rnd.shuffle(perm)
    return tuple(perm)


@st.composite
def trees_with_perm(draw, **kw):
    t = draw(stable_trees(**kw))
    return t, draw(permutations_of(t.n))


@pytest.fixture
def rng():
    return random.Random(20260815)
