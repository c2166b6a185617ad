import hashlib
import json
import logging
import os
import threading

from .console import debug_enabled

logger = logging.getLogger(__name__)

CACHE_DIR = "__uavcache__"
CACHE_VERSION = 1


class ResultCache:
    """
    Persistent file-based cache of sweep results.

    One JSON file per scenario under __uavcache__/, keyed by a hash of the
    canonical scenario document, the budget and the solver options. The
    file is human-readable and can be committed next to the config.
    """

    def __init__(self, cache_dir=None):
        self._cache_dir = cache_dir
        self._cache_file = None
        self._scenario_name = None
        self._index = {}
        self._index_dirty = False
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0

    def _debug_log(self, message):
        if debug_enabled():
            logger.debug("[cache] %s", message)

    def set_cache_file(self, scenario_name, base_dir=None):
        """Point the cache at __uavcache__/<scenario_name>.json under base_dir (default: cwd)."""
        if self._cache_dir is None:
            self._cache_dir = os.path.join(base_dir or os.getcwd(), CACHE_DIR)
        self._cache_file = os.path.join(self._cache_dir, f"{scenario_name}.json")
        self._scenario_name = scenario_name
        self._load_index()

    @property
    def cache_file(self):
        return self._cache_file

    def _load_index(self):
        self._index = {}
        self._index_dirty = False
        if not self._cache_file or not os.path.exists(self._cache_file):
            return
        try:
            with open(self._cache_file, "r") as f:
                data = json.load(f)
            if isinstance(data, dict) and data.get("version") == CACHE_VERSION:
                self._index = data.get("entries", {})
            else:
                self._debug_log(f"{self._cache_file}: version mismatch, discarded")
                try:
                    os.remove(self._cache_file)
                except OSError:
                    pass
        except (json.JSONDecodeError, IOError):
            self._debug_log(f"{self._cache_file}: unreadable, discarded")
            self._index = {}

    def _serialized_cache(self):
        return json.dumps(
            {
                "entries": self._index,
                "scenario": self._scenario_name,
                "version": CACHE_VERSION,
            },
            indent=2,
            sort_keys=True,
        ) + "\n"

    def save(self):
        """Write the cache to disk if anything changed."""
        if not self._cache_file or not self._index_dirty:
            return
        with self._lock:
            try:
                os.makedirs(self._cache_dir, exist_ok=True)
                with open(self._cache_file, "w") as f:
                    f.write(self._serialized_cache())
                self._index_dirty = False
            except IOError as e:
                logger.warning("could not write result cache %s: %s", self._cache_file, e)

    @staticmethod
    def make_key(scenario_json, budget_w, options):
        payload = json.dumps(
            {"scenario": json.loads(scenario_json), "budget_w": float(budget_w), "options": options},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def get(self, key):
        """Return (True, entry) on a hit, (False, None) otherwise."""
        if not self._cache_file:
            return False, None
        with self._lock:
            entry = self._index.get(key)
        if entry is None or not isinstance(entry, dict) or "row" not in entry:
            self._misses += 1
            self._debug_log(f"{key[:12]}: MISS")
            return False, None
        self._hits += 1
        self._debug_log(f"{key[:12]}: HIT")
        return True, entry

    def set(self, key, entry):
        if not self._cache_file:
            return
        with self._lock:
            if self._index.get(key) != entry:
                self._index[key] = entry
                self._index_dirty = True

    def clear(self):
        with self._lock:
            self._index.clear()
            self._index_dirty = False
            if self._cache_file and os.path.exists(self._cache_file):
                try:
                    os.remove(self._cache_file)
                except OSError:
                    pass

    def stats(self):
        cache_size = 0
        if self._cache_file and os.path.exists(self._cache_file):
            try:
                cache_size = os.path.getsize(self._cache_file)
            except OSError:
                cache_size = 0
        return {
            "entries": len(self._index),
            "hits": self._hits,
            "misses": self._misses,
            "cache_size_bytes": cache_size,
            "cache_file": self._cache_file,
        }
