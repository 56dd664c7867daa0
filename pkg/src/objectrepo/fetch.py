"""HTTP retrieval of external content: timeout, size cap, streamed bodies.

The fetcher interface is pluggable so other protocol gateways can slot in
later; only http(s) ships.
"""

from __future__ import annotations

import socket
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Iterator

from .errors import ExternalFetchError

DEFAULT_TIMEOUT = 10.0
DEFAULT_SIZE_CAP = 256 * 1024 * 1024
CHUNK_SIZE = 64 * 1024


@dataclass
class FetchResult:
    status: int
    mime_type: str
    chunks: Iterator[bytes]


class HttpFetcher:
    def __init__(self, timeout: float = DEFAULT_TIMEOUT,
                 size_cap: int = DEFAULT_SIZE_CAP):
        self.timeout = timeout
        self.size_cap = size_cap

    def fetch(self, url: str, verb: str = "GET") -> FetchResult:
        """GET/POST the URL; non-2xx and timeouts raise ExternalFetchError."""
        if not url.startswith(("http://", "https://")):
            raise ExternalFetchError(detail="unsupported location scheme")
        request = urllib.request.Request(url, method=verb)
        try:
            response = urllib.request.urlopen(request, timeout=self.timeout)
        except urllib.error.HTTPError as exc:
            exc.close()
            raise ExternalFetchError(status=exc.code) from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                raise ExternalFetchError(timeout=True) from exc
            raise ExternalFetchError(detail="upstream unreachable") from exc
        except (socket.timeout, TimeoutError) as exc:
            raise ExternalFetchError(timeout=True) from exc
        content_type = response.headers.get("Content-Type",
                                            "application/octet-stream")
        mime = content_type.split(";")[0].strip()
        return FetchResult(status=response.status, mime_type=mime,
                           chunks=self._stream(response))

    def _stream(self, response) -> Iterator[bytes]:
        total = 0
        try:
            with response:
                while True:
                    chunk = response.read(CHUNK_SIZE)
                    if not chunk:
                        return
                    total += len(chunk)
                    if total > self.size_cap:
                        raise ExternalFetchError(
                            detail="response exceeds the size cap")
                    yield chunk
        except (socket.timeout, TimeoutError) as exc:
            raise ExternalFetchError(timeout=True) from exc
        except OSError as exc:
            raise ExternalFetchError(detail="upstream read failed") from exc
