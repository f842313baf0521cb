import os
import sys

# Prefer the extension built alongside the C++ tests when ctest provides it.
_pypath = os.environ.get("VALSTUDY_PYPATH")
if _pypath:
    sys.path.insert(0, _pypath)
