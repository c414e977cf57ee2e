"""Figure regeneration for sidelink experiment campaigns.

Reads the run ledger (JSON Lines) and optional training-series CSV that
the simulator writes, and redraws the report figures from them.  Only
those serialized formats are consumed; the simulator package itself is
never imported, so figures can be regenerated anywhere the files are.
"""

__version__ = "0.1.0"

from .data import FIGURE_IDS, FigureSpec, figure_data  # noqa: F401
from .inputs import FigureError, read_ledger, read_series  # noqa: F401
from .render import render  # noqa: F401
