"""
Run audit logger for the MASSIVE command line.

When an audit directory is configured, every CLI command appends one JSON
line describing the run: command, seed, scenario digest, exit code, failed
gates and elapsed time. Files rotate daily.
"""

import json
import logging
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import List, Optional

logger = logging.getLogger(__name__)


@dataclass
class RunAuditRecord:
    """One CLI invocation."""

    run_id: str
    timestamp: str
    command: str
    seed: int
    scenario_digest: str
    exit_code: int = 0
    failed_gates: List[str] = field(default_factory=list)
    elapsed_ms: Optional[float] = None
    output_path: Optional[str] = None
    error_message: Optional[str] = None
    environment: Optional[str] = None
    version: str = "1.0"


class RunAuditLogger:
    """
    Appends RunAuditRecord entries to ``<log_dir>/run_audit_<date>.jsonl``.
    """

    def __init__(self, log_dir: str, environment: Optional[str] = None):
        """
        Initialize the audit logger.

        Args:
            log_dir: Directory for the JSONL files (created if missing)
            environment: Deployment label stored with each record
        """
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.environment = environment

    def _get_current_log_file(self) -> Path:
        """Get the current log file path based on date."""
        date_str = datetime.now().strftime("%Y-%m-%d")
        return self.log_dir / f"run_audit_{date_str}.jsonl"

    def start_run(self, command: str, seed: int, scenario_digest: str, run_id: Optional[str] = None) -> RunAuditRecord:
        return RunAuditRecord(
            run_id=run_id or str(uuid.uuid4()),
            timestamp=datetime.now().isoformat(),
            command=command,
            seed=seed,
            scenario_digest=scenario_digest,
            environment=self.environment,
        )

    def complete_run(self, record: RunAuditRecord) -> Optional[Path]:
        """
        Write a finished record. Failures to write are logged, never raised.

        Returns:
            The file written to, or None on failure
        """
        path = self._get_current_log_file()
        try:
            with open(path, "a", encoding="utf-8") as f:
                f.write(json.dumps(asdict(record), ensure_ascii=False) + "\n")
            logger.debug(f"Audit record written for run {record.run_id}")
            return path
        except OSError as e:
            logger.error(f"Failed to write audit record {record.run_id}: {e}")
            return None


def get_run_audit_logger(log_dir: Optional[str], environment: Optional[str] = None) -> Optional[RunAuditLogger]:
    """A logger for ``log_dir``, or None when auditing is disabled."""
    if not log_dir:
        return None
    return RunAuditLogger(log_dir, environment)
