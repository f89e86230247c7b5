"""Report persistence and run history."""

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional
from uuid import uuid4

from ..api.models import Report

logger = logging.getLogger(__name__)

HISTORY_LIMIT = 500


class ReportStorage:
    """Saves command reports and keeps a run log.

    Attributes:
        data_dir: Base data directory
        reports_dir: Date-partitioned report directory
        history_file: Path to the run history log
    """

    def __init__(self, data_dir: Path = Path("./data")):
        logger.info(f"Initializing report storage in {data_dir}")

        self.data_dir = Path(data_dir)
        self.reports_dir = self.data_dir / "reports"
        self.history_dir = self.data_dir / "history"
        self.history_file = self.history_dir / "run_log.json"

        for directory in (self.reports_dir, self.history_dir):
            directory.mkdir(parents=True, exist_ok=True)

    def report_path(self, command: str, timestamp: Optional[datetime] = None) -> Path:
        """Path for a new report, e.g. reports/2026/10/18/20261018_141501_explore_1a2b3c4d.json"""
        timestamp = timestamp or datetime.now()
        date_dir = self.reports_dir / timestamp.strftime("%Y/%m/%d")
        date_dir.mkdir(parents=True, exist_ok=True)
        slug = command.replace("-", "_")
        filename = timestamp.strftime(f"%Y%m%d_%H%M%S_{slug}_{uuid4().hex[:8]}.json")
        return date_dir / filename

    def save(self, report: Report) -> Path:
        """Write the report and append a summary line to the history."""
        path = self.report_path(report.command)
        data = report.to_dict()
        with open(path, "w") as f:
            json.dump(data, f, indent=2, sort_keys=True)
        logger.info(f"Saved report to {path}")

        inputs = report.config.to_dict()
        self._append_to_history({
            "timestamp": datetime.now().isoformat(timespec="seconds"),
            "command": report.command,
            "verdict": report.status.value,
            "program": inputs["program"],
            "ats": inputs["ats"],
            "report": str(path),
        })
        return path

    def _append_to_history(self, entry: Dict[str, Any]) -> None:
        history = self.history()
        history.append(entry)
        history = history[-HISTORY_LIMIT:]
        with open(self.history_file, "w") as f:
            json.dump(history, f, indent=2)

    def history(self) -> List[Dict[str, Any]]:
        if not self.history_file.exists():
            return []
        try:
            with open(self.history_file, "r") as f:
                data = json.load(f)
        except json.JSONDecodeError:
            logger.warning(f"Run history {self.history_file} is corrupt; starting a new one")
            return []
        return data if isinstance(data, list) else []
