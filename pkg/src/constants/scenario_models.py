from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from .field_models import FieldSpec

CHECK_KINDS = ("sections", "h1", "obstruction", "star-sequence", "bidual", "lemma21", "nonaffine-witness", "overlap")


class CapPolicy(BaseModel):
    """Denominator cap escalation: start (default: window width + 2), step, number of escalations."""

    start: Optional[int] = Field(default=None, ge=0)
    step: int = Field(default=2, ge=1)
    escalations: int = Field(default=5, ge=0)

    class Config:
        frozen = True
        extra = 'forbid'

    def initial(self, lo: int, hi: int) -> int:
        return self.start if self.start is not None else (hi - lo) + 2


class ModuleSpec(BaseModel):
    name: str
    generators: List[int]
    # relation columns, each with one polynomial text per generator
    relations: List[List[str]] = []
    line: int = 0

    class Config:
        extra = 'forbid'


class MapSpec(BaseModel):
    name: str
    source: str
    target: str
    # one column over the target's generators per source generator
    images: List[List[str]]
    line: int = 0

    class Config:
        extra = 'forbid'


class SheafSpec(BaseModel):
    name: str
    module: str
    kind: Literal["direct_image", "glued"] = "glued"
    line: int = 0

    class Config:
        extra = 'forbid'


class CheckSpec(BaseModel):
    kind: Literal["sections", "h1", "obstruction", "star-sequence", "bidual", "lemma21", "nonaffine-witness",
                  "overlap"]
    label: str
    options: Dict[str, str] = {}
    line: int = 0

    class Config:
        extra = 'forbid'


class Scenario(BaseModel):
    name: str
    description: str = ""
    field: FieldSpec = FieldSpec()
    variables: List[str] = ["x", "y"]
    cover: List[str]
    cover_line: int = 0
    modules: List[ModuleSpec] = []
    maps: List[MapSpec] = []
    sheaves: List[SheafSpec] = []
    checks: List[CheckSpec] = []
    window: Tuple[int, int] = (-6, 6)
    caps: CapPolicy = CapPolicy()
    expect: Dict[str, str] = {}

    class Config:
        extra = 'forbid'

    @model_validator(mode="after")
    def check_window(self):
        lo, hi = self.window
        if lo > hi:
            raise ValueError(f"window lo {lo} exceeds hi {hi}")
        return self

    def check_labels(self) -> List[str]:
        return [c.label for c in self.checks]
