"""Conformity-scaled learning rates (CProp) for first-order optimizers.

The heavy lifting lives in the _cprop extension module; this package
re-exports its surface. When built in-tree the extension sits next to
the build directory rather than inside the package, hence the fallback.
"""

try:
    from ._cprop import *  # noqa: F401,F403
except ImportError:
    from _cprop import *  # noqa: F401,F403

__version__ = "0.1.0"
