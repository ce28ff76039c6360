from .cacher import Cacher, generate_key
from .path_manager import configs_dir, rfshake_dir
from .run_manager import (
    RunInfo,
    RunManager,
    RunStatus,
)
