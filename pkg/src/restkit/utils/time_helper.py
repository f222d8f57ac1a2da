import time
from datetime import datetime, timezone


class RunClock:
    """
    A helper class that records when a run started and when it finished.

    The clock starts when it is created. Calling stop() freezes the end time, so
    the manifest written afterwards reports the same timestamps every time it
    is rendered.
    """
    def __init__(self) -> None:
        self.start_time = time.time()
        self.end_time: float | None = None

    def stop(self) -> None:
        if self.end_time is None:
            self.end_time = time.time()

    @property
    def elapsed(self) -> float:
        end = self.end_time if self.end_time is not None else time.time()
        # The wall clock can step backwards, elapsed never does
        return max(0.0, end - self.start_time)

    @staticmethod
    def stamp(seconds: float) -> str:
        return datetime.fromtimestamp(seconds, tz=timezone.utc).isoformat(timespec="seconds")

    @property
    def started(self) -> str:
        return self.stamp(self.start_time)

    @property
    def finished(self) -> str:
        self.stop()
        assert self.end_time is not None
        return self.stamp(self.end_time)
