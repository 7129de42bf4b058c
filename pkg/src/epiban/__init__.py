"""Explicit-state model checking for an epistemic, probabilistic, temporal
security logic, with a translation of BAN logic into it."""
from .dolevyao import cancompute, extract_holds
from .evaluator import HorizonExceeded, Verdict, eval, eval_cgood, eval_prob, valid
from .scenario import ScenarioError, load_scenario, parse_scenario
from .soundness import auto_instances, check_instance, check_soundness
from .syntax import parse_ban, parse_core, print_ban, print_core
from .system import InterpretedSystem, Point, ZeroConditioning, build_system
from .translate import TranslationParams, translate_formula, translate_rule_instance
from .validation import validate_scenario

__version__ = "0.1.0"
