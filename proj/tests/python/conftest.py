import os
import sys

# Build-tree layout: the compiled _core sits in the bindings build dir and
# the pure-python package under python/. Both are injected by ctest.
for var in ("BAYESVIEWS_EXT_DIR", "BAYESVIEWS_PKG_DIR"):
    path = os.environ.get(var)
    if path and path not in sys.path:
        sys.path.insert(0, path)
