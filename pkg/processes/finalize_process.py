"""Module to handle run finalization"""

import logging
import platform
import sys
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd

from helpers.run_functions import write_json

logger = logging.getLogger(__name__)

RUN_INFO_FILE = "run_info.json"


def finalize_process(out_dir: Path, command: str, started: datetime, exit_code: int) -> Path:
    """
    Write run_info.json next to the reports.

    Timestamps and environment details are written here and in no other report.
    """
    info = {
        "command": command,
        "argv": sys.argv[1:],
        "exit_code": int(exit_code),
        "started": started.isoformat(timespec="seconds"),
        "finished": datetime.now().isoformat(timespec="seconds"),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
    }
    path = write_json(Path(out_dir) / RUN_INFO_FILE, info)
    logger.info("Finished %s with exit code %d", command, exit_code)
    return path
