import os
import sys
from pathlib import Path

# When ctest points us at a build tree, make sure that tree is what gets imported even if an
# editable install of the package is also present.
_build_dir = os.environ.get("LORASIM_PYTHON_DIR")
if _build_dir:
    sys.meta_path[:] = [f for f in sys.meta_path if "ScikitBuild" not in type(f).__name__]
    sys.path.insert(0, _build_dir)
    import lorasim._core

    assert Path(lorasim._core.__file__).resolve().parent.parent == Path(_build_dir).resolve(), lorasim._core.__file__
