import os as _os
import pathlib as _pathlib

# Installed wheels carry the fixture data next to the module; builds from a
# checkout fall back to the compiled-in source path or $WEBAGENTS_DATA_DIR.
_packaged_data = _pathlib.Path(__file__).parent / "data"
if "WEBAGENTS_DATA_DIR" not in _os.environ and _packaged_data.is_dir():
    _os.environ["WEBAGENTS_DATA_DIR"] = str(_packaged_data)

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
