"""Workbench for label-based information-flow calculi.

Modules: labels (finite join-semilattices), effects (effect sets, policies,
the label/effect Galois connection), syntax (shared AST and surface syntax),
protection (the protects relations), typecheck (the pure, pc, and
type-and-effect checkers), elaborate (indexed monads and capture), interp
(small-step evaluation), generate (typed program/context generation),
harness (equivalence, simulation, and lemma suites), suites (named
verification suites), cli (command-line front end).
"""

import sys

# Captured terms inline the monadic plumbing, and beta steps duplicate it;
# structural recursion over such terms needs more headroom than the default.
# The evaluator's depth guard keeps terms well below this.
if sys.getrecursionlimit() < 15_000:
    sys.setrecursionlimit(15_000)

__version__ = "0.1.0"
