from .field_models import FieldSpec
from .scenario_models import CHECK_KINDS, CapPolicy, CheckSpec, MapSpec, ModuleSpec, Scenario, SheafSpec
from .report_models import (
    VERDICTS,
    BidualReport,
    CheckResult,
    DefectReport,
    ExactnessReport,
    NonaffineWitness,
    ObstructionCertificate,
    Report,
)
from .settings import VERSION, VerifierSettings, load_settings, parse_window
