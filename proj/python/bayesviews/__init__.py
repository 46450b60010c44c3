"""Bayesian market views: Black-Litterman allocation with learned views.

The heavy lifting lives in the compiled extension; this package re-exports
its surface. When running from a build tree (tests, development) the
extension may sit outside the package, hence the fallback import.
"""

try:
    from ._core import *  # noqa: F401,F403
    from ._core import __doc__ as _core_doc
except ImportError:  # build-tree layout: _core.so on sys.path, not in-package
    from _core import *  # type: ignore # noqa: F401,F403
    from _core import __doc__ as _core_doc  # type: ignore

__version__ = "0.1.0"
__doc__ = _core_doc
