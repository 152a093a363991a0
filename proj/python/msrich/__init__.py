"""Multiscale Richards solvers with a learned online basis."""

try:
    from ._msrich import *  # noqa: F401,F403  (wheel layout)
    from ._msrich import __doc__  # noqa: F401
except ImportError:
    from _msrich import *  # noqa: F401,F403  (in-tree build on sys.path)
    from _msrich import __doc__  # noqa: F401
