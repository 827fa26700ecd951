import json
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

# closed verdict set
COMPUTED = "computed"
EXACT = "exact"
LEFT_EXACT_NOT_RIGHT_EXACT = "left-exact-not-right-exact"
NOT_EXACT = "not-exact"
OBSTRUCTED = "obstructed"
NO_OBSTRUCTION = "no-obstruction-in-window"
NONZERO_H1 = "nonzero-h1"
ZERO_H1 = "zero-h1-in-window"
WITNESS_FOUND = "witness-found"
NO_WITNESS = "no-witness-in-window"
DEFECT_FREE = "defect-free"
DEFECT = "defect"
INCONCLUSIVE = "inconclusive"
GLUING_MISMATCH = "gluing-mismatch"

VERDICTS = (
    COMPUTED, EXACT, LEFT_EXACT_NOT_RIGHT_EXACT, NOT_EXACT, OBSTRUCTED, NO_OBSTRUCTION, NONZERO_H1,
    ZERO_H1, WITNESS_FOUND, NO_WITNESS, DEFECT_FREE, DEFECT, INCONCLUSIVE, GLUING_MISMATCH,
)

DegreeTable = Dict[int, int]


def degree_ranges(degrees: List[int]) -> List[str]:
    """[-6,-5,-4,0,2,3] -> ['-6..-4', '0', '2..3']"""
    out = []
    run: List[int] = []
    for d in sorted(degrees):
        if run and d == run[-1] + 1:
            run.append(d)
            continue
        if run:
            out.append(f"{run[0]}..{run[-1]}" if len(run) > 1 else str(run[0]))
        run = [d]
    if run:
        out.append(f"{run[0]}..{run[-1]}" if len(run) > 1 else str(run[0]))
    return out


class ExactnessReport(BaseModel):
    open: str
    window: Tuple[int, int]
    kernel: DegreeTable
    homology: DegreeTable
    cokernel: DegreeTable
    verdict: str
    flags: List[str] = []

    def tables(self) -> Dict[str, DegreeTable]:
        return {"kernel": self.kernel, "homology": self.homology, "cokernel": self.cokernel}


class ObstructionCertificate(BaseModel):
    window: Tuple[int, int]
    sections: DegreeTable
    codim: DegreeTable
    codim_V: DegreeTable
    verdict: str
    flags: List[str] = []

    @property
    def obstructed_degrees(self) -> List[int]:
        return [d for d in self.codim if self.codim[d] or self.codim_V[d]]


class DefectReport(BaseModel):
    module: str
    window: Tuple[int, int]
    kernel: DegreeTable
    cokernel: DegreeTable
    defect: DegreeTable
    flags: List[str] = []

    @property
    def is_zero(self) -> bool:
        return not any(self.defect.values())


class NonaffineWitness(BaseModel):
    degree: int
    representative: str
    verified: bool
    h1: DegreeTable
    flags: List[str] = []


class BidualReport(BaseModel):
    plus_over_U: ExactnessReport
    plusplus_over_V: ExactnessReport
    verdict: str
    flags: List[str] = []


class CheckResult(BaseModel):
    name: str
    kind: str
    tables: Dict[str, DegreeTable] = {}
    flags: List[str] = []
    verdict: str
    expected: Optional[str] = Field(default=None, exclude=True)

    @property
    def as_expected(self) -> bool:
        return self.expected is None or self.expected == self.verdict


class Report(BaseModel):
    scenario: str
    window: Tuple[int, int]
    checks: List[CheckResult] = []
    version: str

    def to_json_schema(self) -> str:
        """Deterministic JSON: degree keys as strings in ascending degree, fixed key order."""
        return json.dumps({
            "scenario": self.scenario,
            "window": list(self.window),
            "checks": [
                {
                    "name": check.name,
                    "tables": {
                        obj: {str(d): table[d] for d in sorted(table)}
                        for obj, table in check.tables.items()
                    },
                    "flags": list(check.flags),
                    "verdict": check.verdict,
                }
                for check in self.checks
            ],
            "version": self.version,
        }, indent=4)
