"""
Bundled dependency loading for isingnet.
"""

import os
import sys


def load_deps(dirname="deps"):
    """
    Make the bundled libraries (rasmus) importable as top-level packages.
    """
    path = os.path.realpath(os.path.join(os.path.dirname(__file__), dirname))
    if path not in sys.path:
        sys.path.append(path)
    return path
