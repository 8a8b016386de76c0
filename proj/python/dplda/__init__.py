from ._dplda import *  # noqa: F401,F403
from ._dplda import __version__  # noqa: F401
