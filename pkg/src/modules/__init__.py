from .errors import (
    BufferTooSmall,
    CapExhausted,
    GluingMismatch,
    InputError,
    NonHomogeneous,
    ParseError,
    QcohError,
    RelationNotKilled,
    UnknownName,
)
from .scenario_parser import build_context, builtin_names, load_builtin, parse_scenario
from .scenario_runner import run_check, run_scenario
from .report_emitter import emit_report
from .QcohVerifier import QcohVerifierClass
