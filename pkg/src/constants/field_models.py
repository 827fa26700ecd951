from fractions import Fraction
from typing import Literal, Optional

from pydantic import BaseModel, model_validator
from sympy import Rational, isprime
from sympy.polys.domains import GF, QQ


class FieldSpec(BaseModel):
    """The ground field k: the rationals or a prime field."""

    kind: Literal["rationals", "prime"] = "rationals"
    p: Optional[int] = None

    class Config:
        frozen = True
        extra = 'forbid'

    @model_validator(mode="after")
    def check_characteristic(self):
        if self.kind == "prime":
            if self.p is None or not isprime(self.p):
                raise ValueError(f"Fp needs a prime characteristic, got {self.p}")
        elif self.p is not None:
            raise ValueError("the rationals take no characteristic")
        return self

    @classmethod
    def parse(cls, text: str) -> "FieldSpec":
        """Reads `Q` or `Fp:P`."""
        token = text.strip()
        if token in ("Q", "QQ"):
            return cls(kind="rationals")
        if token.startswith("Fp:"):
            try:
                p = int(token[3:])
            except ValueError as e:
                raise ValueError(f"bad characteristic in '{text}'") from e
            return cls(kind="prime", p=p)
        raise ValueError(f"unknown field '{text}', expected Q or Fp:P")

    @property
    def domain(self):
        # prime-field elements print as canonical representatives 0..p-1
        if self.kind == "prime":
            return GF(self.p, symmetric=False)
        return QQ

    def convert(self, value):
        """Maps ints, Fractions and sympy rationals into the domain."""
        K = self.domain
        if isinstance(value, int):
            return K(value)
        if isinstance(value, Rational):
            value = Fraction(int(value.p), int(value.q))
        if isinstance(value, Fraction) or hasattr(value, "denominator"):
            num, den = int(value.numerator), int(value.denominator)
            if self.kind == "prime":
                if den % self.p == 0:
                    raise ValueError(f"denominator {den} vanishes in Fp:{self.p}")
                return K(num) / K(den)
            return QQ(num, den)
        return K.convert(value)

    def label(self) -> str:
        return "Q" if self.kind == "rationals" else f"Fp:{self.p}"
