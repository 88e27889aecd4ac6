"""Workbench for probabilistic true-concurrency process algebra with guards."""
from .config import Limits, RunConfig
from .terms import AlgebraDecl, RecSpec, canonicalize, free_recvars, substitute
from .parser import parse_guard, parse_spec_file, parse_term, pretty_print
from .semantics import Semantics, action_steps, build_plts, mu, resolve
from .rewriter import is_basic_term, normalize, project_rewrite
from .equivalence import check, prob_step_bisim, prob_rooted_branching_step_bisim

__version__ = "0.1.0"
