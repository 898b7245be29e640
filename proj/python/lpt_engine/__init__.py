"""Learning-by-passing-tests search engine (python bindings)."""

try:
    from ._core import *  # noqa: F401,F403  (packaged wheel layout)
except ImportError:
    # in-tree test runs put the built extension directly on sys.path
    from _core import *  # noqa: F401,F403

__version__ = "0.1.0"
