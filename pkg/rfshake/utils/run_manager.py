"""Create and maintain experiment run directories."""
import json
import uuid
import shutil
import hashlib
from pathlib import Path
from loguru import logger
from datetime import datetime
from typing_extensions import Any, Dict, List, Literal, Optional, TypedDict, Union

import pandas as pd

RunStatus = Literal['running', 'finished', 'failed']


class RunInfo(TypedDict):
    run_id: str
    arch: str
    rf: int
    status: RunStatus
    created_timestamp: float
    last_accessed_timestamp: float


class RunManager:
    _root_dir: Path = Path("runs")
    _runs_dir: str = "runs"     # container of: config snapshot + csv files + checkpoints
    _run_id: str = ""

    _config_filename: str = "config.yaml"
    _metrics_filename: str = "metrics.csv"
    _epochs_filename: str = "epochs.csv"
    _report_filename: str = "report.json"
    _checkpoints_dir: str = "checkpoints"
    _runlist_filename: str = "runlist.json"
    _runlist_filepath: Path = None

    def __init__(self,
        root_dir: Optional[Union[Path, str]] = None,
        run_id: Optional[str] = None,
        runlist: Optional[Dict[str, RunInfo]] = None,
    ) -> None:
        self._run_list: Dict[str, RunInfo] = {}
        self._info: Optional[RunInfo] = None
        self.root_dir = root_dir or self._root_dir

        if run_id: self._run_id = run_id
        if runlist: self._run_list = runlist

    @property
    def root_dir(self) -> Path:
        return self._root_dir

    @root_dir.setter
    def root_dir(self, path: Union[Path, str]) -> None:
        path = Path(path)
        (path / self._runs_dir).mkdir(parents=True, exist_ok=True)

        self._root_dir = path
        self._runlist_filepath = path / self._runlist_filename
        if not self._runlist_filepath.exists():
            self._runlist_filepath.write_text(json.dumps({}, indent=4))

    @property
    def run_id(self) -> str:
        return self._run_id

    @property
    def runlist_filepath(self) -> Path:
        return self._runlist_filepath

    @property
    def run_dirpath(self) -> Path:
        return self.get_run_dirpath(self.run_id)

    @property
    def checkpoints_dirpath(self) -> Path:
        return self.run_dirpath / self._checkpoints_dir

    @property
    def config_filepath(self) -> Path:
        return self.run_dirpath / self._config_filename

    @property
    def metrics_filepath(self) -> Path:
        return self.run_dirpath / self._metrics_filename

    @property
    def epochs_filepath(self) -> Path:
        return self.run_dirpath / self._epochs_filename

    @property
    def report_filepath(self) -> Path:
        return self.run_dirpath / self._report_filename

    @property
    def runlist(self) -> Dict[str, RunInfo]:
        if not self._run_list:
            self._run_list = self.load_runlist()
        return self._run_list

    @staticmethod
    def make_run_id(config_text: str) -> str:
        """Git-style hex id from the resolved config plus a random salt."""
        digest = hashlib.sha1()
        digest.update(config_text.encode('utf-8'))
        digest.update(uuid.uuid4().bytes)
        return digest.hexdigest()[:12]

    @staticmethod
    def new_run(
        config_text: str,
        arch: str,
        rf: int,
        root_dir: Optional[Union[Path, str]] = None,
        run_id: Optional[str] = None,
        register: bool = True,
    ) -> 'RunManager':
        """Create `<root>/runs/<run_id>/` holding the config snapshot.

        With `register=False` the run list is left alone, so a worker process
        can create its run directory while the parent owns `runlist.json`.
        """
        _manager = RunManager(root_dir, run_id=run_id or RunManager.make_run_id(config_text))

        if _manager.runlist.get(_manager.run_id, None):
            raise ValueError(f"Given run_id={_manager.run_id} already exists. Please provide an unique run id.")

        _manager.checkpoints_dirpath.mkdir(parents=True, exist_ok=True)
        _manager.config_filepath.write_text(config_text)

        _dt_now_ts = datetime.timestamp(datetime.now())
        _manager._info = RunInfo(
            run_id=_manager.run_id,
            arch=arch,
            rf=int(rf),
            status='running',
            created_timestamp=_dt_now_ts,
            last_accessed_timestamp=_dt_now_ts,
        )
        if register:
            _manager.register(_manager._info)
        logger.info(f"Created run {_manager.run_id} in {_manager.run_dirpath}")
        return _manager

    @staticmethod
    def from_run(run_id: str, root_dir: Optional[Union[Path, str]] = None) -> 'RunManager':
        _manager = RunManager(root_dir, run_id=run_id)
        if not _manager.runlist.get(run_id, None):
            raise KeyError(f"Invalid run_id: {run_id}")
        return _manager

    @property
    def info(self) -> RunInfo:
        return self._info or self.runlist[self.run_id]

    def load_runlist(self) -> Dict[str, RunInfo]:
        with open(self._runlist_filepath, 'r') as run_list_file:
            return json.load(run_list_file)

    def refresh_runlist(self) -> Dict[str, RunInfo]:
        self._run_list = self.load_runlist()
        return self._run_list

    def _save_runlist(self) -> None:
        with open(self._runlist_filepath, 'w') as run_list_file:
            json.dump(self._run_list, run_list_file, indent=4)

    def register(self, info: RunInfo) -> None:
        self.refresh_runlist()
        self._run_list[info['run_id']] = info
        self._save_runlist()

    def set_status(self, status: RunStatus) -> RunInfo:
        info = dict(self.info)
        info['status'] = status
        info['last_accessed_timestamp'] = datetime.timestamp(datetime.now())
        self._info = RunInfo(**info)
        if self.run_id in self.refresh_runlist():
            self.register(self._info)
        return self._info

    def get_run_dirpath(self, run_id: str) -> Path:
        return self.root_dir / self._runs_dir / run_id

    def write_table(self, filepath: Path, rows: List[Dict[str, Any]], columns: List[str]) -> Path:
        pd.DataFrame(rows, columns=columns).to_csv(filepath, index=False, float_format='%.10g')
        return filepath

    def write_report(self, report: Dict[str, Any], indent: int = 4) -> Path:
        with open(self.report_filepath, 'w') as report_file:
            json.dump(report, report_file, indent=indent)
        return self.report_filepath

    def delete_run(self, run_id: str) -> None:
        """Raises `FileNotFoundError` if the run folder does not exist."""
        shutil.rmtree(self.get_run_dirpath(run_id))
        if self.refresh_runlist().pop(run_id, None) is not None:
            self._save_runlist()

    def remove_unlisted_runs(self, excluded_ids: Optional[List[str]] = None) -> None:
        """Remove run folders that are not in `runlist.json`.

        Args:
            excluded_ids (Optional[List[str]], optional): ids to keep even though they are unlisted. Defaults to None.
        """
        runs_dirpath = self.root_dir / self._runs_dir
        listed = set((excluded_ids or []) + list(self.refresh_runlist().keys()))

        for path in runs_dirpath.iterdir():
            if path.name in listed:
                continue
            try:
                logger.warning(f"Removing Unlisted Run: {path.name}")
                shutil.rmtree(path)
            except OSError as e:
                logger.error(str(e))
