"""Run profiling utilities."""

import psutil
import time
from typing import Any, Dict, Optional

from .logger import get_logger


class RunProfiler:
    """Measure wall time and resident memory around one solve."""

    def __init__(self, label: str, config: Optional[Dict[str, Any]] = None):
        """
        Initialize run profiler.

        Args:
            label: Name reported in the log line
            config: The ``performance`` section of the application config
        """
        self.label = label
        self.config = config or {}
        self.logger = get_logger("performance")
        self.enabled = self.config.get("monitor_enabled", True)

        self._start_ns = 0
        self.elapsed_ns = 0
        self.rss_start_mb = 0.0
        self.rss_end_mb = 0.0

    def __enter__(self) -> "RunProfiler":
        self._start_ns = time.perf_counter_ns()
        if self.enabled:
            self.rss_start_mb = self._rss_mb()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.elapsed_ns = time.perf_counter_ns() - self._start_ns
        if not self.enabled:
            return
        self.rss_end_mb = self._rss_mb()

        threshold = self.config.get("alert_memory_mb", 2048)
        if self.rss_end_mb > threshold:
            self.logger.warning(
                f"{self.label}: high memory usage {self.rss_end_mb:.1f} MB"
            )
        self.logger.info(
            f"{self.label}: {self.elapsed_ns / 1e9:.3f}s, "
            f"rss {self.rss_start_mb:.1f} -> {self.rss_end_mb:.1f} MB"
        )

    def _rss_mb(self) -> float:
        try:
            return psutil.Process().memory_info().rss / 1024 / 1024
        except Exception as e:
            self.logger.error(f"Error checking memory: {e}")
            return 0.0

    def stats(self) -> Dict[str, Any]:
        """
        Get profiling figures for the run summary.

        Returns:
            Statistics dictionary
        """
        return {
            "elapsed_seconds": self.elapsed_ns / 1e9,
            "rss_start_mb": self.rss_start_mb,
            "rss_end_mb": self.rss_end_mb,
        }
