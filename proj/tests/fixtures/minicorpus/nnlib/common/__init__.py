from .utils import make_divisible, to_2tuple
from .constants import EPS
