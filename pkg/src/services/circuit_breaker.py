import logging
import threading
import time
from typing import Callable, Literal, Optional

from src.config import settings

logger = logging.getLogger(__name__)

# Type alias for circuit states
CircuitState = Literal["closed", "open", "half_open"]


class CircuitBreaker:
    """
    Circuit breaker guarding the remote embedding endpoint.

    State transitions:
    1. CLOSED → OPEN: after threshold consecutive failed batches
    2. OPEN → HALF_OPEN: after the cooldown period
    3. HALF_OPEN → CLOSED: after a successful batch
    4. HALF_OPEN → OPEN: if the trial batch fails

    Worker threads share one breaker, so state changes hold a lock.
    """

    def __init__(
        self,
        name: str,
        failure_threshold: Optional[int] = None,
        timeout_seconds: Optional[float] = None,
        clock: Callable[[], float] = time.monotonic
    ):
        self.name = name
        self.failure_threshold = failure_threshold or settings.CIRCUIT_BREAKER_FAILURE_THRESHOLD
        self.timeout_seconds = (
            settings.CIRCUIT_BREAKER_TIMEOUT_SECONDS if timeout_seconds is None else timeout_seconds
        )
        self._clock = clock
        self._lock = threading.Lock()
        self.state: CircuitState = "closed"
        self.failure_count = 0
        self.total_calls = 0
        self.total_failures = 0
        self.last_failure_time: Optional[float] = None

        logger.info(f"Circuit breaker initialized for {name}")

    def can_execute(self) -> bool:
        """True when a request may be sent now."""
        with self._lock:
            self.total_calls += 1
            if self.state == "closed":
                return True
            if self.state == "open":
                if self._cooldown_expired():
                    logger.info(f"Circuit breaker for {self.name} transitioning to half_open")
                    self.state = "half_open"
                    return True
                logger.debug(f"Circuit breaker for {self.name} is OPEN, blocking request")
                return False
            return True

    def record_success(self) -> None:
        with self._lock:
            if self.state == "half_open":
                logger.info(f"Circuit breaker for {self.name} CLOSING (trial batch succeeded)")
            self.state = "closed"
            self.failure_count = 0

    def record_failure(self) -> None:
        with self._lock:
            self.failure_count += 1
            self.total_failures += 1
            self.last_failure_time = self._clock()

            if self.state == "half_open":
                logger.warning(f"Circuit breaker for {self.name} REOPENING (trial batch failed)")
                self.state = "open"
            elif self.failure_count >= self.failure_threshold:
                if self.state != "open":
                    logger.warning(
                        f"Circuit breaker for {self.name} OPENING "
                        f"(failures: {self.failure_count}/{self.failure_threshold})"
                    )
                self.state = "open"

    def _cooldown_expired(self) -> bool:
        if self.last_failure_time is None:
            return True
        return self._clock() - self.last_failure_time >= self.timeout_seconds

    def get_state(self) -> CircuitState:
        return self.state

    def get_metrics(self) -> dict:
        """Breaker state and counters for the run summary."""
        return {
            "endpoint": self.name,
            "state": self.state,
            "failure_count": self.failure_count,
            "total_calls": self.total_calls,
            "total_failures": self.total_failures,
        }

    def __repr__(self) -> str:
        return (
            f"CircuitBreaker(name={self.name}, state={self.state}, "
            f"failures={self.failure_count})"
        )
