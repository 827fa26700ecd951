"""
Scenario files: a line-oriented, hand-writable description of a ring, an
overlap cover, module presentations, maps, sheaves and the checks to run.
One `key = value` per line; `#` starts a comment.

    [ring]
    field = Q
    variables = x, y

    [scheme]
    cover = x; y

    [module I]
    generators = 1, 1
    relations = y, -x          # columns separated by ';'

    [map y: A -> O]
    images = y

    [sheaf Isheaf]
    module = I
    kind = direct_image

    [check obstruction L]
    sheaf = Isheaf

    [window]
    lo = -6
    hi = 6

    [expect]
    L = obstructed

The module O (free of rank one in degree 0) and the sheaf O (its identity
gluing) are always defined.
"""
import logging
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from src.constants.field_models import FieldSpec
from src.constants.report_models import VERDICTS
from src.constants.scenario_models import (
    CHECK_KINDS,
    CapPolicy,
    CheckSpec,
    MapSpec,
    ModuleSpec,
    Scenario,
    SheafSpec,
)
from src.constants.settings import VerifierSettings, load_settings, parse_window
from .errors import InputError, NonHomogeneous, ParseError, RelationNotKilled, UnknownName
from .glued_scheme import DoubleGluedScheme, QcohSheafOnX, direct_images, glue_identity
from .graded_modules import FPGradedModule, GradedModuleMap, PolyRing, free_rank_one, map_from_poly_images
from .localization_cech import OpenSubset

logger = logging.getLogger(__name__)

BUILTIN_DIR = Path(__file__).resolve().parent.parent / "constants" / "scenarios"

STRUCTURE = "O"
_HEADER = re.compile(r"^\[(.+)\]$")
_MAP_HEADER = re.compile(r"^map\s+(\w+)\s*:\s*(\w+)\s*->\s*(\w+)$")

# which option of each check kind names what
_CHECK_REFERENCES = {
    "sections": ("module", "sheaf"),
    "h1": ("module",),
    "obstruction": ("sheaf",),
    "star-sequence": ("sheaves", "maps"),
    "bidual": ("sheaves", "maps"),
    "lemma21": ("modules",),
    "nonaffine-witness": ("module",),
    "overlap": (),
}


def builtin_names() -> list[str]:
    return sorted(p.stem for p in BUILTIN_DIR.glob("*.scenario"))


def load_builtin(name: str) -> str:
    path = BUILTIN_DIR / f"{name}.scenario"
    if not path.is_file():
        raise UnknownName(name)
    return path.read_text(encoding="utf-8")


def _split_list(value: str, sep: str = ",") -> list[str]:
    return [part.strip() for part in value.split(sep) if part.strip()]


def _int(value: str, line: int, what: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(line, f"{what} must be an integer, got '{value}'") from None


class _Section:
    def __init__(self, header: str, line: int):
        self.header = header
        self.line = line
        self.entries: list[tuple[str, str, int]] = []

    def values(self, key: str) -> list[tuple[str, int]]:
        return [(v, n) for k, v, n in self.entries if k == key]

    def value(self, key: str, default: Optional[str] = None) -> Optional[str]:
        found = self.values(key)
        if len(found) > 1:
            raise ParseError(found[1][1], f"'{key}' given twice")
        return found[0][0] if found else default

    def check_keys(self, allowed: tuple[str, ...]):
        for k, _, n in self.entries:
            if k not in allowed:
                raise ParseError(n, f"unknown key '{k}' in [{self.header}]")


def _sections(text: str) -> list[_Section]:
    sections: list[_Section] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        header = _HEADER.match(line)
        if header:
            sections.append(_Section(" ".join(header.group(1).split()), number))
            continue
        if not sections:
            raise ParseError(number, "content before the first [section]")
        if "=" not in line:
            raise ParseError(number, f"expected 'key = value', got '{line}'")
        key, value = line.split("=", 1)
        sections[-1].entries.append((key.strip(), value.strip(), number))
    return sections


def parse_scenario(text: str, settings: Optional[VerifierSettings] = None) -> Scenario:
    """
    Parses and validates a scenario.

    Args:
        text (str): Scenario text.
        settings (VerifierSettings): Defaults for field, window and caps; read from the environment when omitted.

    Returns:
        Scenario: A scenario whose names, degrees and sequence maps have all been checked.

    Raises:
        ParseError, NonHomogeneous, UnknownName, RelationNotKilled.
    """
    settings = settings or load_settings()
    sections = _sections(text)
    if not sections:
        raise ParseError(1, "empty scenario")
    data: dict = {"modules": [], "maps": [], "sheaves": [], "checks": [], "expect": {}}
    names: set[str] = set()
    seen_singletons: set[str] = set()
    window = None
    for sec in sections:
        kind, _, rest = sec.header.partition(" ")
        rest = rest.strip()
        if kind in ("scenario", "ring", "scheme", "window", "caps", "expect"):
            if kind in seen_singletons:
                raise ParseError(sec.line, f"[{kind}] given twice")
            seen_singletons.add(kind)
        if kind == "scenario":
            sec.check_keys(("name", "description"))
            data["name"] = sec.value("name", "")
            data["description"] = sec.value("description", "")
        elif kind == "ring":
            sec.check_keys(("field", "variables"))
            try:
                data["field"] = FieldSpec.parse(sec.value("field", settings.field))
            except ValueError as e:
                raise ParseError(sec.line, str(e)) from None
            data["variables"] = _split_list(sec.value("variables", "x, y"))
        elif kind == "scheme":
            sec.check_keys(("cover",))
            cover = sec.value("cover")
            if not cover:
                raise ParseError(sec.line, "[scheme] needs a cover")
            data["cover"] = _split_list(cover, ";")
            data["cover_line"] = sec.values("cover")[0][1]
        elif kind == "module":
            sec.check_keys(("generators", "relations"))
            if not rest or rest in names:
                raise ParseError(sec.line, f"module name '{rest}' missing or already used")
            if rest == STRUCTURE:
                raise ParseError(sec.line, f"'{STRUCTURE}' is reserved for the structure module")
            names.add(rest)
            gens = sec.value("generators", "")
            relations = []
            for value, n in sec.values("relations"):
                relations += [_split_list(column) for column in value.split(";") if column.strip()]
            data["modules"].append(ModuleSpec(
                name=rest, generators=[_int(g, sec.line, "generator degree") for g in _split_list(gens)],
                relations=relations, line=sec.line))
        elif kind == "map":
            sec.check_keys(("images",))
            match = _MAP_HEADER.match(sec.header)
            if not match:
                raise ParseError(sec.line, "map header must read [map NAME: SRC -> TGT]")
            name, source, target = match.groups()
            if name in names:
                raise ParseError(sec.line, f"name '{name}' already used")
            names.add(name)
            images = [_split_list(column) for column in (sec.value("images", "") or "").split(";")
                      if column.strip()]
            data["maps"].append(MapSpec(name=name, source=source, target=target, images=images, line=sec.line))
        elif kind == "sheaf":
            sec.check_keys(("module", "kind"))
            if not rest or rest in names:
                raise ParseError(sec.line, f"sheaf name '{rest}' missing or already used")
            if rest == STRUCTURE:
                raise ParseError(sec.line, f"'{STRUCTURE}' is reserved for the structure sheaf")
            names.add(rest)
            gluing = sec.value("kind", "glued")
            if gluing not in ("glued", "direct_image"):
                raise ParseError(sec.line, f"sheaf kind must be glued or direct_image, got '{gluing}'")
            data["sheaves"].append(SheafSpec(name=rest, module=sec.value("module", ""), kind=gluing, line=sec.line))
        elif kind == "check":
            parts = rest.split()
            if not parts or parts[0] not in CHECK_KINDS:
                raise ParseError(sec.line, f"check kind must be one of {', '.join(CHECK_KINDS)}")
            label = parts[1] if len(parts) > 1 else parts[0]
            if label in [c.label for c in data["checks"]]:
                raise ParseError(sec.line, f"check label '{label}' used twice")
            sec.check_keys(_CHECK_REFERENCES[parts[0]] + ("open", "buffer", "free_family"))
            options = {k: v for k, v, _ in sec.entries}
            data["checks"].append(CheckSpec(kind=parts[0], label=label, options=options, line=sec.line))
        elif kind == "window":
            sec.check_keys(("lo", "hi"))
            lo = _int(sec.value("lo", "-6"), sec.line, "lo")
            hi = _int(sec.value("hi", "6"), sec.line, "hi")
            if lo > hi:
                raise ParseError(sec.line, f"window lo {lo} exceeds hi {hi}")
            window = (lo, hi)
        elif kind == "caps":
            sec.check_keys(("start", "step", "escalations"))
            start = sec.value("start")
            try:
                data["caps"] = CapPolicy(
                    start=_int(start, sec.line, "start") if start is not None else None,
                    step=_int(sec.value("step", str(settings.cap_step)), sec.line, "step"),
                    escalations=_int(sec.value("escalations", str(settings.cap_escalations)), sec.line,
                                     "escalations"))
            except ValueError as e:
                if isinstance(e, ParseError):
                    raise
                raise ParseError(sec.line, str(e)) from None
        elif kind == "expect":
            for label, verdict, n in sec.entries:
                if verdict not in VERDICTS:
                    raise ParseError(n, f"unknown verdict '{verdict}'")
                data["expect"][label] = verdict
        else:
            raise ParseError(sec.line, f"unknown section [{sec.header}]")
    if "cover" not in data:
        raise ParseError(sections[-1].line, "missing [scheme] with a cover")
    if not data.get("name"):
        data["name"] = "unnamed"
    data.setdefault("field", FieldSpec.parse(settings.field))
    data.setdefault("caps", CapPolicy(step=settings.cap_step, escalations=settings.cap_escalations))
    if window is None:
        try:
            window = parse_window(settings.window)
        except ValueError as e:
            raise InputError(f"QCV_WINDOW: {e}") from None
    data["window"] = window
    for label in data["expect"]:
        if label not in [c.label for c in data["checks"]]:
            raise UnknownName(label)
    scenario = Scenario(**data)
    build_context(scenario)
    logger.info(f"parsed scenario {scenario.name}: {len(scenario.checks)} checks")
    return scenario


@dataclass
class ScenarioContext:
    """The algebraic objects a scenario describes."""

    scenario: Scenario
    ring: PolyRing
    open: OpenSubset
    scheme: DoubleGluedScheme
    modules: dict[str, FPGradedModule]
    maps: dict[str, GradedModuleMap]
    _sheaves: Optional[dict[str, QcohSheafOnX]] = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def window(self) -> tuple[int, int]:
        return tuple(self.scenario.window)

    @property
    def caps(self) -> CapPolicy:
        return self.scenario.caps

    def module(self, name: str) -> FPGradedModule:
        if name not in self.modules:
            raise UnknownName(name)
        return self.modules[name]

    def map(self, name: str) -> GradedModuleMap:
        if name not in self.maps:
            raise UnknownName(name)
        return self.maps[name]

    def sheaves(self) -> dict[str, QcohSheafOnX]:
        """Built on first use: direct images need sections over W, realized jointly."""
        with self._lock:
            if self._sheaves is None:
                self._sheaves = self._build_sheaves()
        return self._sheaves

    def _build_sheaves(self) -> dict[str, QcohSheafOnX]:
        out = {STRUCTURE: glue_identity(self.scheme, self.modules[STRUCTURE], name=STRUCTURE)}
        direct = []
        for spec in self.scenario.sheaves:
            if spec.kind == "glued":
                out[spec.name] = glue_identity(self.scheme, self.modules[spec.module], name=spec.name)
            else:
                direct.append(spec)
        if direct:
            built = direct_images(self.scheme, [self.modules[s.module] for s in direct], self.window,
                                  self.caps, [s.name for s in direct])
            out.update({s.name: sheaf for s, sheaf in zip(direct, built)})
        return out

    def sheaf(self, name: str) -> QcohSheafOnX:
        sheaves = self.sheaves()
        if name not in sheaves:
            raise UnknownName(name)
        return sheaves[name]


def _with_line(error: InputError, line: int) -> InputError:
    if isinstance(error, NonHomogeneous) and error.line is None:
        return NonHomogeneous(line, error.message)
    if isinstance(error, (ParseError, UnknownName, RelationNotKilled)):
        return error
    return ParseError(line, str(error))


def _sheaf_kinds(scenario: Scenario) -> dict[str, str]:
    kinds = {STRUCTURE: "glued"}
    kinds.update({s.name: s.kind for s in scenario.sheaves})
    return kinds


def _validate_checks(scenario: Scenario, modules: dict, maps: dict):
    kinds = _sheaf_kinds(scenario)
    sheaf_modules = {STRUCTURE: STRUCTURE}
    sheaf_modules.update({s.name: s.module for s in scenario.sheaves})
    for check in scenario.checks:
        opts = check.options
        for key in ("module",):
            if key in opts and opts[key] not in modules:
                raise UnknownName(opts[key])
        if "modules" in opts:
            for name in _split_list(opts["modules"]):
                if name not in modules:
                    raise UnknownName(name)
        if "sheaf" in opts and opts["sheaf"] not in kinds:
            raise UnknownName(opts["sheaf"])
        if check.kind == "obstruction" and "sheaf" not in opts:
            raise ParseError(check.line, "an obstruction check needs a sheaf")
        if "open" in opts and opts["open"] not in ("X", "U", "V", "W"):
            raise ParseError(check.line, f"open must be X, U, V or W, got '{opts['open']}'")
        if "buffer" in opts:
            _int(opts["buffer"], check.line, "buffer")
        if "free_family" in opts:
            parts = opts["free_family"].split(":")
            if len(parts) != 2:
                raise ParseError(check.line, "free_family must read MAXRANK:MAXSHIFT")
            for p in parts:
                _int(p, check.line, "free_family bound")
        if check.kind in ("star-sequence", "bidual"):
            sheaves = _split_list(opts.get("sheaves", ""))
            chain = _split_list(opts.get("maps", ""))
            if len(sheaves) != 3 or len(chain) != 2:
                raise ParseError(check.line, f"a {check.kind} check needs sheaves = A, B, C and maps = f, g")
            for name in sheaves:
                if name not in kinds:
                    raise UnknownName(name)
            for name in chain:
                if name not in maps:
                    raise UnknownName(name)
            if len({kinds[name] for name in sheaves}) != 1:
                raise ParseError(check.line, "the sheaves of a sequence must share one gluing kind")
            for (a, b), name in zip(zip(sheaves, sheaves[1:]), chain):
                f = maps[name]
                if f.source is not modules[sheaf_modules[a]] or f.target is not modules[sheaf_modules[b]]:
                    raise ParseError(check.line, f"map {name} does not connect sheaves {a} and {b}")
            _check_complex(maps[chain[0]], maps[chain[1]], check.line)


def _check_complex(f: GradedModuleMap, g: GradedModuleMap, line: int):
    """g after f must kill every generator of the source, hence the whole module."""
    composite = g.compose(f)
    source = f.source
    for k, e in enumerate(source.generator_degrees):
        if not (composite.matrix(e) @ source.generator(k)).is_zero():
            raise ParseError(line, f"{g.name} after {f.name} is nonzero on generator {k + 1} of {source.name}")


def build_context(scenario: Scenario) -> ScenarioContext:
    """Materializes ring, cover, modules and maps; every input error surfaces here."""
    ring = PolyRing(scenario.field, scenario.variables)
    denominators = []
    for text in scenario.cover:
        try:
            f = ring.parse_entry(text)
        except InputError as e:
            raise _with_line(e, scenario.cover_line) from None
        if f is None:
            raise ParseError(scenario.cover_line, f"cover element '{text}' is zero")
        denominators.append(f)
    w = OpenSubset(ring, tuple(denominators))
    modules: dict[str, FPGradedModule] = {STRUCTURE: free_rank_one(ring)}
    for spec in scenario.modules:
        s = len(spec.generators)
        columns = []
        try:
            for column in spec.relations:
                if len(column) != s:
                    raise ParseError(spec.line, f"relation {column} has {len(column)} entries for {s} generators")
                columns.append([ring.parse_entry(entry) for entry in column])
            modules[spec.name] = FPGradedModule(ring, spec.generators, columns, spec.name)
        except InputError as e:
            raise _with_line(e, spec.line) from None
    maps: dict[str, GradedModuleMap] = {}
    for spec in scenario.maps:
        if spec.source not in modules:
            raise UnknownName(spec.source)
        if spec.target not in modules:
            raise UnknownName(spec.target)
        src, tgt = modules[spec.source], modules[spec.target]
        if len(spec.images) != src.ngens:
            raise ParseError(spec.line, f"{len(spec.images)} images for {src.ngens} generators of {src.name}")
        try:
            columns = []
            for column in spec.images:
                if len(column) != tgt.ngens:
                    raise ParseError(spec.line, f"image {column} has {len(column)} entries for "
                                                f"{tgt.ngens} generators of {tgt.name}")
                columns.append([ring.parse_entry(entry) for entry in column])
            maps[spec.name] = map_from_poly_images(src, tgt, columns, spec.name)
        except InputError as e:
            raise _with_line(e, spec.line) from None
    for spec in scenario.sheaves:
        if spec.module not in modules:
            raise UnknownName(spec.module)
    _validate_checks(scenario, modules, maps)
    return ScenarioContext(scenario, ring, w, DoubleGluedScheme(ring, w), modules, maps)
