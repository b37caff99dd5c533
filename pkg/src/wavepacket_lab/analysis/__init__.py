"""Space-time norms, estimate scans and reports."""

from .estimates import *  # noqa: F401,F403
from .estimates import __all__ as _estimates
from .morawetz import *  # noqa: F401,F403
from .morawetz import __all__ as _morawetz
from .norms import *  # noqa: F401,F403
from .norms import __all__ as _norms
from .reports import *  # noqa: F401,F403
from .reports import __all__ as _reports

__all__ = [*_norms, *_estimates, *_morawetz, *_reports]
