"""Translation backends: the pluggable contract, a caching/rate-limited/
retrying front end, an HTTP adapter for remote services, and a deterministic
mock for offline runs.

Mock algorithm (tests recompute it independently, so it is frozen here):

* forward (source -> pivot): prepend the marker token ``⟦<pivot>⟧`` plus one
  space, and reverse the word order. Words are produced by splitting on
  single spaces, so arbitrary whitespace round-trips exactly.
* backward (pivot -> source): strip the leading ``⟦...⟧ `` marker, reverse
  the word order back, then independently for each word draw
  ``u = int(sha256("<seed>:<digest>:<index>")[:8]) / 2**64`` where
  ``<digest>`` is the SHA-256 hex digest of the full input text as received
  and ``<index>`` is the word's position in the restored (original) order.
  If ``u < substitution_rate`` and the word is a key of the synonym lexicon
  (case-sensitive lookup), it is replaced by its lexicon entry; otherwise it
  passes through unchanged.

With ``substitution_rate=0`` the backward(forward(t)) round trip returns t
byte-for-byte.
"""

import hashlib
import json
import os
import threading
import time
from collections.abc import Callable
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import BackendError, CapabilityError, ValidationError

MOCK_MARKER_OPEN = "⟦"  # ⟦
MOCK_MARKER_CLOSE = "⟧"  # ⟧

API_KEY_ENV = "BET_TRANSLATE_API_KEY"


@dataclass(frozen=True)
class TranslationRequest:
    text: str
    source_lang: str
    target_lang: str

    def __post_init__(self):
        if not self.text:
            raise ValidationError("translation request text is empty")
        if not self.source_lang or not self.target_lang:
            raise ValidationError("translation request needs source and target language codes")
        if self.source_lang == self.target_lang:
            raise ValidationError(
                f"source and target language are both {self.source_lang!r}"
            )


@dataclass
class BackendPolicy:
    max_concurrent_requests: int = 4
    max_requests_per_second: float = 10.0
    max_retries: int = 3
    initial_backoff_ms: float = 100.0
    backoff_multiplier: float = 2.0
    request_timeout_ms: float = 30_000.0
    allow_partial: bool = False

    def validate(self) -> "BackendPolicy":
        if self.max_concurrent_requests < 1:
            raise ValidationError("max_concurrent_requests must be positive")
        if self.max_requests_per_second <= 0:
            raise ValidationError("max_requests_per_second must be positive")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be non-negative")
        if self.initial_backoff_ms < 0 or self.backoff_multiplier <= 0:
            raise ValidationError("backoff schedule must be positive")
        if self.request_timeout_ms <= 0:
            raise ValidationError("request_timeout_ms must be positive")
        return self


@dataclass(frozen=True)
class TranslationCacheEntry:
    key: str
    src: str
    tgt: str
    text_digest: str
    value: str
    created_at: float


@dataclass
class TranslationResult:
    """One item of a batch result; exactly one of text/error is set."""

    text: str | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def cache_key(backend_id: str, source_lang: str, target_lang: str, text: str) -> str:
    # Unit separator keeps fields from bleeding into each other.
    return _sha256("\x1f".join((backend_id, source_lang, target_lang, text)))


class TranslationBackend:
    """Contract for translation providers. Subclasses set `backend_id`
    (including a version tag so provider updates invalidate caches
    deliberately) and implement `translate`."""

    backend_id: str = "unset"

    def translate(self, text: str, source_lang: str, target_lang: str) -> str:
        raise NotImplementedError

    def supports(self, source_lang: str, target_lang: str) -> bool:
        return True


class TranslationCache:
    """Append-only persistent cache, one JSON entry per line, loaded into
    memory at startup. Concurrent readers are fine; appends are serialized."""

    FILE_KEYS = ("key", "src", "tgt", "text_digest", "value")

    def __init__(self, backend_id: str, cache_dir=None):
        self.backend_id = backend_id
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()
        self.path: Path | None = None
        if cache_dir is not None:
            self.path = Path(cache_dir) / f"{_safe_filename(backend_id)}.jsonl"
            if self.path.exists():
                with open(self.path, encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if not line:
                            continue
                        obj = json.loads(line)
                        self._entries[obj["key"]] = obj["value"]

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> str | None:
        return self._entries.get(key)

    def put(self, key: str, src: str, tgt: str, text: str, value: str) -> TranslationCacheEntry:
        entry = TranslationCacheEntry(
            key=key,
            src=src,
            tgt=tgt,
            text_digest=_sha256(text),
            value=value,
            created_at=time.time(),
        )
        with self._lock:
            if key in self._entries:
                return entry
            self._entries[key] = value
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                    fh.write(
                        json.dumps(
                            {
                                "key": entry.key,
                                "src": entry.src,
                                "tgt": entry.tgt,
                                "text_digest": entry.text_digest,
                                "value": entry.value,
                            },
                            ensure_ascii=False,
                        )
                        + "\n"
                    )
        return entry


def _safe_filename(name: str) -> str:
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in name)


class RateLimiter:
    """Spaces grants 1/rate seconds apart on a monotonic clock."""

    def __init__(self, rate_per_second: float, sleep: Callable[[float], None] = time.sleep):
        self._interval = 1.0 / rate_per_second
        self._next_slot = 0.0
        self._lock = threading.Lock()
        self._sleep = sleep

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            slot = max(now, self._next_slot)
            self._next_slot = slot + self._interval
            wait = slot - now
        if wait > 0:
            self._sleep(wait)


class _InflightCall:
    __slots__ = ("done", "error")

    def __init__(self):
        self.done = threading.Event()
        self.error: Exception | None = None


class CachingTranslator:
    """Front end that owns the cache, rate limiter, retry schedule, and
    in-flight deduplication for a backend. For any cache key, at most one
    backend invocation happens per process lifetime."""

    def __init__(self, backend: TranslationBackend, policy: BackendPolicy | None = None,
                 cache_dir=None, sleep: Callable[[float], None] = time.sleep):
        self.backend = backend
        self.policy = (policy or BackendPolicy()).validate()
        self.cache = TranslationCache(backend.backend_id, cache_dir=cache_dir)
        self._limiter = RateLimiter(self.policy.max_requests_per_second, sleep=sleep)
        self._sleep = sleep
        self._inflight: dict[str, _InflightCall] = {}
        self._lock = threading.Lock()

    def translate(self, request: TranslationRequest) -> str:
        key = cache_key(
            self.backend.backend_id, request.source_lang, request.target_lang, request.text
        )
        while True:
            cached = self.cache.get(key)
            if cached is not None:
                return cached
            with self._lock:
                cached = self.cache.get(key)
                if cached is not None:
                    return cached
                call = self._inflight.get(key)
                if call is None:
                    call = _InflightCall()
                    self._inflight[key] = call
                    owner = True
                else:
                    owner = False
            if not owner:
                call.done.wait()
                if call.error is not None:
                    raise call.error
                continue  # owner succeeded; pick the value up from the cache
            try:
                value = self._invoke_with_retry(request)
                self.cache.put(
                    key, request.source_lang, request.target_lang, request.text, value
                )
                return value
            except Exception as exc:
                call.error = exc
                raise
            finally:
                with self._lock:
                    self._inflight.pop(key, None)
                call.done.set()

    def _invoke_with_retry(self, request: TranslationRequest) -> str:
        if not self.backend.supports(request.source_lang, request.target_lang):
            raise CapabilityError(
                f"backend {self.backend.backend_id!r} does not support "
                f"{request.source_lang}->{request.target_lang}"
            )
        backoff = self.policy.initial_backoff_ms / 1000.0
        attempts = self.policy.max_retries + 1
        last: Exception | None = None
        for attempt in range(attempts):
            self._limiter.acquire()
            try:
                value = self.backend.translate(
                    request.text, request.source_lang, request.target_lang
                )
                if not isinstance(value, str) or not value:
                    raise BackendError(
                        f"backend {self.backend.backend_id!r} returned an empty translation"
                    )
                return value
            except CapabilityError:
                raise
            except Exception as exc:
                last = exc
                if attempt + 1 < attempts:
                    self._sleep(backoff)
                    backoff *= self.policy.backoff_multiplier
        raise BackendError(
            f"{request.source_lang}->{request.target_lang} failed after "
            f"{attempts} attempt(s): {last}"
        ) from last

    def translate_batch(
        self, requests: list[TranslationRequest], policy: BackendPolicy | None = None
    ) -> list[TranslationResult]:
        """Translate a batch concurrently. Results align index-for-index with
        the inputs; duplicates within the batch share one backend call;
        per-item failures are carried in the result, not raised."""
        from concurrent.futures import ThreadPoolExecutor

        effective = (policy or self.policy).validate()
        if not requests:
            return []
        unique: dict[tuple[str, str, str], list[int]] = {}
        for i, req in enumerate(requests):
            unique.setdefault((req.source_lang, req.target_lang, req.text), []).append(i)
        results: list[TranslationResult | None] = [None] * len(requests)

        def run_one(item):
            (src, tgt, text), positions = item
            try:
                value = self.translate(TranslationRequest(text, src, tgt))
                out = TranslationResult(text=value)
            except Exception as exc:
                out = TranslationResult(error=str(exc))
            for pos in positions:
                results[pos] = out
            return out

        with ThreadPoolExecutor(max_workers=effective.max_concurrent_requests) as pool:
            list(pool.map(run_one, unique.items()))
        return [r for r in results if r is not None]


# ---------------------------------------------------------------------------
# Remote HTTP adapter


class HttpTranslationBackend(TranslationBackend):
    """Adapter for an HTTP translation service: POST JSON ``{q, source,
    target}``, response JSON ``{translatedText}``. The credential is read
    from the BET_TRANSLATE_API_KEY environment variable and sent as a bearer
    token. Responses are trimmed of leading/trailing whitespace only; request
    text is sent verbatim."""

    def __init__(self, base_url: str, backend_id: str | None = None,
                 timeout_ms: float = 30_000.0, api_key: str | None = None, session=None):
        if session is None:
            import requests

            session = requests.Session()
        self._session = session
        self.base_url = base_url
        self.timeout_s = timeout_ms / 1000.0
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.backend_id = backend_id or f"http-{_host_of(base_url)}-v1"

    def translate(self, text: str, source_lang: str, target_lang: str) -> str:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        response = self._session.post(
            self.base_url,
            json={"q": text, "source": source_lang, "target": target_lang},
            headers=headers,
            timeout=self.timeout_s,
        )
        status = getattr(response, "status_code", 200)
        if status != 200:
            raise BackendError(f"translation service returned HTTP {status}")
        payload = response.json()
        value = payload.get("translatedText")
        if not isinstance(value, str) or not value.strip():
            raise BackendError("translation service response had no translatedText")
        return value.strip()


def _host_of(url: str) -> str:
    from urllib.parse import urlparse

    return urlparse(url).netloc or "local"


# ---------------------------------------------------------------------------
# Deterministic mock


def load_bundled_lexicon() -> dict[str, str]:
    lexicon = {}
    text = resources.files("betkit").joinpath("data/synonyms.tsv").read_text(encoding="utf-8")
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, synonym = line.split("\t")
        lexicon[word] = synonym
    return lexicon


@dataclass
class MockConfig:
    substitution_rate: float = 0.5
    seed: int = 42
    lexicon: dict[str, str] | None = None
    source_lang: str = "en"

    def __post_init__(self):
        if not 0.0 <= self.substitution_rate <= 1.0:
            raise ValidationError(
                f"substitution_rate must be in [0, 1], got {self.substitution_rate}"
            )

    def resolved_lexicon(self) -> dict[str, str]:
        if self.lexicon is None:
            return load_bundled_lexicon()
        return self.lexicon


def _marker(lang: str) -> str:
    return f"{MOCK_MARKER_OPEN}{lang}{MOCK_MARKER_CLOSE}"


def _strip_marker(text: str) -> str:
    if text.startswith(MOCK_MARKER_OPEN):
        close = text.find(MOCK_MARKER_CLOSE)
        if close != -1 and text[close + 1 : close + 2] == " ":
            return text[close + 2 :]
    return text


def mock_forward(text: str, pivot: str) -> str:
    words = text.split(" ")
    return _marker(pivot) + " " + " ".join(reversed(words))


def mock_backward(text: str, config: MockConfig) -> str:
    text_digest = _sha256(text)
    payload = _strip_marker(text)
    words = list(reversed(payload.split(" ")))
    lexicon = config.resolved_lexicon()
    out = []
    for index, word in enumerate(words):
        if word in lexicon:
            h = hashlib.sha256(f"{config.seed}:{text_digest}:{index}".encode("utf-8")).digest()
            u = int.from_bytes(h[:8], "big") / 2**64
            if u < config.substitution_rate:
                out.append(lexicon[word])
                continue
        out.append(word)
    return " ".join(out)


def mock_translate(text: str, source_lang: str, target_lang: str, config: MockConfig) -> str:
    """Apply the mock pivot translation documented in the module docstring:
    forward when leaving `config.source_lang`, backward when returning."""
    if target_lang == config.source_lang:
        return mock_backward(text, config)
    return mock_forward(text, target_lang)


class MockTranslationBackend(TranslationBackend):
    def __init__(self, config: MockConfig | None = None):
        self.config = config or MockConfig()
        rate = format(self.config.substitution_rate, "g")
        self.backend_id = f"mock-v1-seed{self.config.seed}-rate{rate}"

    def translate(self, text: str, source_lang: str, target_lang: str) -> str:
        return mock_translate(text, source_lang, target_lang, self.config)
