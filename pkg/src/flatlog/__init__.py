"""flatlog: a recursive Datalog engine over flat sorted columns.

Multiway joins run attribute at a time over lexicographically sorted
column arrays, partitioned at the root by prefix-summed per-key fan-outs
and materialized in a deterministic two-phase count/write pipeline.
"""

from .errors import FlatlogError, InputError, InternalError, ProgramError
from .interning import Interner
from .oracle import bruteforce_join, naive_fixpoint
from .parser import Atom, Program, Rule, Term, parse
from .planner import CompiledProgram, JoinPlan, compile_program
from .runtime import Engine, Stats, Summary, run_program
from .stratify import Stratum, stratify

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "CompiledProgram",
    "Engine",
    "FlatlogError",
    "InputError",
    "Interner",
    "InternalError",
    "JoinPlan",
    "Program",
    "ProgramError",
    "Rule",
    "Stats",
    "Stratum",
    "Summary",
    "Term",
    "bruteforce_join",
    "compile_program",
    "naive_fixpoint",
    "parse",
    "run_program",
    "stratify",
]
