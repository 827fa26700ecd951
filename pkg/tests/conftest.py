import pytest

from src.constants import CapPolicy, FieldSpec
from src.modules.glued_scheme import DoubleGluedScheme
from src.modules.graded_modules import FPGradedModule, PolyRing
from src.modules.localization_cech import OpenSubset

QQ_FIELD = FieldSpec()


@pytest.fixture
def field():
    return QQ_FIELD


@pytest.fixture
def ring():
    return PolyRing(QQ_FIELD, ["x", "y"])


@pytest.fixture
def x(ring):
    return ring.var("x")


@pytest.fixture
def y(ring):
    return ring.var("y")


@pytest.fixture
def punctured(ring, x, y):
    """D(x) u D(y): the plane without the origin."""
    return OpenSubset(ring, (x, y))


@pytest.fixture
def affine(ring, x):
    return OpenSubset(ring, (x,))


@pytest.fixture
def double_origin(ring, punctured):
    return DoubleGluedScheme(ring, punctured)


@pytest.fixture
def small_caps():
    return CapPolicy(start=6, step=1, escalations=4)


@pytest.fixture
def R(ring):
    return FPGradedModule.free(ring, (0,), "R")


@pytest.fixture
def A(ring):
    """R(-1), generated in degree 1."""
    return FPGradedModule.free(ring, (1,), "A")


@pytest.fixture
def C(ring, y):
    """R/(y) = k[x]."""
    return FPGradedModule(ring, (0,), [[y]], "C")


@pytest.fixture
def K(ring, x, y):
    """The residue field R/(x, y)."""
    return FPGradedModule(ring, (0,), [[x], [y]], "K")


@pytest.fixture
def I(ring, x, y):
    """The maximal ideal (x, y) with its Koszul relation."""
    return FPGradedModule(ring, (1, 1), [[y, -x]], "I")
