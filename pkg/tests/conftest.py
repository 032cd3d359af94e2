import os
import random

import pytest

from coolcheck.lts import Lts
from coolcheck.spec import load_language_file
from coolcheck.terms import parse_term


CORPORA = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                       'corpora')


@pytest.fixture
def corpus_path():
    """Return function mapping a corpus file name to its path
    """
    def path(name):
        return os.path.join(CORPORA, name)
    return path


@pytest.fixture
def ccs_guarded(corpus_path):
    """CCS with guarded sums (simply WB cool)
    """
    return load_language_file(corpus_path('ccs_guarded.gsos'))


@pytest.fixture
def ccs_full(corpus_path):
    """CCS with unguarded choice
    """
    return load_language_file(corpus_path('ccs_full.gsos'))


@pytest.fixture
def ccs_repl(corpus_path):
    """CCS with unguarded choice and replication
    """
    return load_language_file(corpus_path('ccs_repl.gsos'))


@pytest.fixture
def term():
    """Return closed-term parser for a language
    """
    def parse(lang, text):
        return parse_term(text, lang.signature, allow_variables=False)
    return parse


@pytest.fixture
def tau_lts():
    """Four states: 0 -tau-> 1 -a-> 2 and 3 -a-> 2
    """
    return Lts.from_aldebaran('des (0, 3, 4)\n'
                              '(0, "tau", 1)\n'
                              '(1, "a", 2)\n'
                              '(3, "a", 2)\n')


@pytest.fixture
def make_lts():
    """Return function building an LTS from (source, label, target) triples
    """
    def build(n, transitions, frontier=()):
        labels = {l for _, l, _ in transitions}
        return Lts([str(i) for i in range(n)], labels, transitions, frontier)
    return build


@pytest.fixture
def make_rng():
    """Return seeded random generator factory
    """
    def rng(seed=0):
        return random.Random(seed)
    return rng
