import os

from dotenv import load_dotenv
from pydantic import BaseModel

load_dotenv()

VERSION = "1.0.0"


class VerifierSettings(BaseModel):
    field: str = "Q"
    window: str = "-6:6"
    cap_step: int = 2
    cap_escalations: int = 5
    log_level: str = "INFO"


def load_settings() -> VerifierSettings:
    return VerifierSettings(
        field=os.getenv("QCV_FIELD", "Q"),
        window=os.getenv("QCV_WINDOW", "-6:6"),
        cap_step=int(os.getenv("QCV_CAP_STEP", "2")),
        cap_escalations=int(os.getenv("QCV_CAP_ESCALATIONS", "5")),
        log_level=os.getenv("QCV_LOG_LEVEL", "INFO"),
    )


def parse_window(text: str) -> tuple[int, int]:
    """Reads `LO:HI`."""
    try:
        lo, hi = (int(part) for part in text.split(":"))
    except ValueError as e:
        raise ValueError(f"window must look like LO:HI, got '{text}'") from e
    if lo > hi:
        raise ValueError(f"window lo {lo} exceeds hi {hi}")
    return lo, hi
