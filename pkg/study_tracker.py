"""
Study Step Tracker
Records the named steps of a harness run (meshing, solves, fits, exports)
and logs every transition.
"""

import logging
import time
from contextlib import contextmanager
from datetime import datetime
from typing import Any, Dict, Iterator, List, Optional

logger = logging.getLogger(__name__)


class StudyStepTracker:
    """Tracks the steps of one run; the summary is embedded in report JSON."""

    def __init__(self, run_id: str):
        self.run_id = run_id
        self.steps: List[Dict[str, Any]] = []
        self.current_step: Optional[str] = None
        self.total_steps = 0
        self._started: Dict[str, float] = {}

    def start_step(self, step_name: str, message: str, data: Dict = None):
        """Start a new step"""
        step = {
            "step": step_name,
            "status": "running",
            "message": message,
            "start_time": datetime.now().isoformat(),
            "data": data or {},
        }
        self.steps.append(step)
        self.current_step = step_name
        self._started[step_name] = time.perf_counter()
        logger.info(f"Starting step: {step_name} - {message}")

    def complete_step(self, step_name: str, message: str, data: Dict = None):
        """Complete the running step"""
        self._close(step_name, "completed", message, data)
        logger.info(f"Completed step: {step_name} - {message}")

    def fail_step(self, step_name: str, error_message: str, data: Dict = None):
        """Mark the running step as failed"""
        self._close(step_name, "failed", error_message, data)
        logger.error(f"Failed step: {step_name} - {error_message}")

    def _close(self, step_name: str, status: str, message: str, data: Optional[Dict]):
        elapsed = time.perf_counter() - self._started.pop(step_name, time.perf_counter())
        update = {
            "status": status,
            "message": message,
            "end_time": datetime.now().isoformat(),
            "seconds": round(elapsed, 3),
        }
        if data:
            update["data"] = data
        for step in reversed(self.steps):
            if step["step"] == step_name and step["status"] == "running":
                step.update(update)
                break
        self.current_step = None

    @contextmanager
    def step(self, step_name: str, message: str, data: Dict = None) -> Iterator[Dict[str, Any]]:
        """Run a block as a step; failures are recorded and re-raised."""
        self.start_step(step_name, message, data)
        result: Dict[str, Any] = {}
        try:
            yield result
        except Exception as e:
            self.fail_step(step_name, f"{type(e).__name__}: {e}")
            raise
        self.complete_step(step_name, result.pop("message", "done"), result or None)

    def set_total_steps(self, total: int):
        """Set the total number of expected steps"""
        self.total_steps = total

    def get_summary(self) -> Dict[str, Any]:
        """Get a summary of all steps"""
        return {
            "run_id": self.run_id,
            "total_steps": len(self.steps),
            "expected_steps": self.total_steps,
            "completed_steps": len([s for s in self.steps if s["status"] == "completed"]),
            "failed_steps": len([s for s in self.steps if s["status"] == "failed"]),
            "steps": self.steps,
        }
