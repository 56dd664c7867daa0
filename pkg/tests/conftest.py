import json
import sys
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from objectrepo.harness import StaticContentServer, StubService
from objectrepo.server import RepositoryServer, ServerConfig

TOKEN = "test-token"


def http(verb, url, body=None, headers=None, timeout=30):
    """(status, headers, body bytes); HTTP errors become status codes."""
    request = urllib.request.Request(url, data=body, method=verb,
                                     headers=dict(headers or {}))
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            return response.status, dict(response.headers), response.read()
    except urllib.error.HTTPError as exc:
        with exc:
            return exc.code, dict(exc.headers), exc.read()


@dataclass
class Rig:
    server: RepositoryServer
    echo: StubService
    resizer: StubService
    watermarker: StubService
    content_host: StaticContentServer
    token: str = TOKEN

    @property
    def repo(self):
        return self.server.repo

    @property
    def access(self):
        return self.server.access

    @property
    def management(self):
        return self.server.management

    @property
    def base_url(self):
        return self.server.base_url

    def auth(self):
        return {"Authorization": f"Bearer {self.token}"}

    def get(self, path, authorized=False):
        return http("GET", self.base_url + path,
                    headers=self.auth() if authorized else {})

    def get_json(self, path, authorized=False):
        status, headers, body = self.get(path, authorized)
        return status, json.loads(body)

    def request(self, verb, path, body=None, headers=None, authorized=True):
        merged = dict(headers or {})
        if authorized:
            merged.update(self.auth())
        return http(verb, self.base_url + path, body=body, headers=merged)

    def stub_bases(self):
        return {
            "echo_base": self.echo.base_url,
            "resizer_base": self.resizer.base_url,
            "watermarker_base": self.watermarker.base_url,
        }


@pytest.fixture
def rig(tmp_path):
    echo = StubService("echo").start()
    resizer = StubService("resizer").start()
    watermarker = StubService("watermarker").start()
    content_host = StaticContentServer().start()
    server = RepositoryServer(ServerConfig(
        data_root=tmp_path / "data", port=0, management_token=TOKEN,
        fsync=False)).start()
    rig = Rig(server=server, echo=echo, resizer=resizer,
              watermarker=watermarker, content_host=content_host)
    yield rig
    server.stop()
    for stub in (echo, resizer, watermarker, content_host):
        stub.stop()
