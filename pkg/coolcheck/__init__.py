from coolcheck.equiv import FunctionalKind, Relation, gfp, step
from coolcheck.errors import (CertificateError, CoolcheckError, FrontierError,
                              SpecError, TechniqueError, TermSyntaxError,
                              UsageError)
from coolcheck.laws import Law, LawSet, verify_law
from coolcheck.lts import Lts, TermArena, explore
from coolcheck.spec import GsosLanguage, classify_format, load_language, load_language_file
from coolcheck.terms import parse_term, print_term
from coolcheck.upto import (check_up_to, load_certificate, parse_technique,
                            run_certificate, soundness_advice)


__all__ = [
    'GsosLanguage',
    'load_language',
    'load_language_file',
    'classify_format',
    'parse_term',
    'print_term',
    'Lts',
    'TermArena',
    'explore',
    'FunctionalKind',
    'Relation',
    'step',
    'gfp',
    'Law',
    'LawSet',
    'verify_law',
    'parse_technique',
    'check_up_to',
    'soundness_advice',
    'load_certificate',
    'run_certificate',
    'CoolcheckError',
    'TermSyntaxError',
    'SpecError',
    'FrontierError',
    'TechniqueError',
    'CertificateError',
    'UsageError',
    ]
