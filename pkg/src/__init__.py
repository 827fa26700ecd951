from .constants import *
from .modules import *
