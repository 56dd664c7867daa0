"""Load generator: N simulated users issuing a weighted request mix with
think-time delays, reporting latency statistics.
"""

from __future__ import annotations

import csv
import random
import statistics
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field


@dataclass(frozen=True)
class LoadProfile:
    concurrent_users: int = 20
    think_ms: float = 300.0
    mix: tuple[tuple[float, str], ...] = ()  # (weight, request path)
    requests: int | None = 200               # total across all users
    duration_s: float | None = None
    timeout: float = 30.0

    def __post_init__(self):
        if self.concurrent_users < 1:
            raise ValueError("need at least one user")
        if self.think_ms < 0:
            raise ValueError("think_time must be >= 0")
        if not self.mix:
            raise ValueError("request mix is empty")
        if any(weight <= 0 for weight, _ in self.mix):
            raise ValueError("mix weights must be positive")
        if self.requests is None and self.duration_s is None:
            raise ValueError("bound the run by requests or duration")


@dataclass(frozen=True)
class Sample:
    started: float
    path: str
    status: int
    latency_ms: float

    @property
    def ok(self) -> bool:
        return self.status == 200


@dataclass
class LoadReport:
    requests: int
    errors: int
    mean_ms: float
    p50_ms: float
    p95_ms: float
    duration_s: float
    throughput_rps: float
    samples: list[Sample] = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["started", "path", "status", "latency_ms"])
            for sample in self.samples:
                writer.writerow([f"{sample.started:.6f}", sample.path,
                                 sample.status, f"{sample.latency_ms:.3f}"])

    def summary(self) -> str:
        return (f"requests={self.requests} errors={self.errors} "
                f"mean={self.mean_ms:.1f}ms p50={self.p50_ms:.1f}ms "
                f"p95={self.p95_ms:.1f}ms "
                f"throughput={self.throughput_rps:.1f}/s")


def _percentile(sorted_values: list[float], fraction: float) -> float:
    if not sorted_values:
        return 0.0
    index = min(len(sorted_values) - 1,
                int(fraction * (len(sorted_values) - 1) + 0.5))
    return sorted_values[index]


def run_load(base_url: str, profile: LoadProfile, seed: int = 1) -> LoadReport:
    """Drive the server with the profile; errors are counted, never raised."""
    base = base_url.rstrip("/")
    weights = [weight for weight, _ in profile.mix]
    paths = [path for _, path in profile.mix]
    samples: list[Sample] = []
    samples_lock = threading.Lock()
    counter = {"issued": 0}
    started = time.perf_counter()
    deadline = (started + profile.duration_s
                if profile.duration_s is not None else None)

    def take_slot() -> bool:
        if deadline is not None and time.perf_counter() >= deadline:
            return False
        if profile.requests is None:
            return True
        with samples_lock:
            if counter["issued"] >= profile.requests:
                return False
            counter["issued"] += 1
            return True

    def user_loop(user_id: int):
        rng = random.Random(seed * 7919 + user_id)
        while take_slot():
            path = rng.choices(paths, weights=weights)[0]
            t0 = time.perf_counter()
            status = 0
            try:
                with urllib.request.urlopen(base + path,
                                            timeout=profile.timeout) as resp:
                    resp.read()
                    status = resp.status
            except urllib.error.HTTPError as exc:
                status = exc.code
                exc.close()
            except Exception:
                status = 0
            latency_ms = (time.perf_counter() - t0) * 1000.0
            with samples_lock:
                samples.append(Sample(started=t0 - started, path=path,
                                      status=status, latency_ms=latency_ms))
            if profile.think_ms:
                time.sleep(profile.think_ms / 1000.0)

    threads = [threading.Thread(target=user_loop, args=(i,), daemon=True)
               for i in range(profile.concurrent_users)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()

    duration = time.perf_counter() - started
    latencies = sorted(s.latency_ms for s in samples)
    return LoadReport(
        requests=len(samples),
        errors=sum(1 for s in samples if not s.ok),
        mean_ms=statistics.mean(latencies) if latencies else 0.0,
        p50_ms=_percentile(latencies, 0.50),
        p95_ms=_percentile(latencies, 0.95),
        duration_s=duration,
        throughput_rps=len(samples) / duration if duration else 0.0,
        samples=samples,
    )
