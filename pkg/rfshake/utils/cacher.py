import os
import json
import hashlib
from typing import Any, Dict, Union, Literal, Optional

import numpy as np
from loguru import logger

from rfshake.settings import default_cache_dir


def generate_key(payload: Union[str, Dict[str, Any]]) -> str:
    """Stable short hash of a string or a JSON-serialisable config dict."""
    if not isinstance(payload, str):
        payload = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha1(payload.encode('utf-8')).hexdigest()[:16]


class Cacher:
    cache_dir = None
    replace_chars = ['://', '/', '-', ' ']

    def __init__(self,
        key: str,
        data_format: Literal['npz', 'json', 'text'] = 'npz',
        cache_dir: Optional[Union[str, os.PathLike]] = None
    ) -> None:
        self._key: str = key
        self._cache_file = None
        self._cache_format: str = data_format
        self.cache_dir = str(cache_dir or self.cache_dir or default_cache_dir())

        if not os.path.exists(self.cache_dir):
            os.makedirs(self.cache_dir)

    @property
    def cache_file(self) -> str:
        if not self._cache_file:
            name = self._key
            for char in self.replace_chars:
                name = name.replace(char, '_')
            self._cache_file = os.path.join(self.cache_dir, name + self.file_extension())
        return self._cache_file

    @property
    def cache_format(self) -> str:
        return self._cache_format

    def file_extension(self) -> str:
        return '.' + self._cache_format

    def save_cache(self, content: Any) -> None:
        """`npz` expects a dict of arrays, `json` any JSON value, `text` a string."""
        if self.cache_format == 'npz':
            # np.savez appends `.npz` to names without it; ours always has it
            with open(self.cache_file, 'wb') as cfile:
                np.savez(cfile, **content)
        else:
            with open(self.cache_file, 'w') as cfile:
                if self.cache_format == 'json':
                    json.dump(content, cfile, indent=4)
                else:
                    cfile.write(content)
        logger.debug(f"Cached {self._key} -> {self.cache_file}")

    def load_cache(self) -> Union[str, Dict[str, np.ndarray], Any]:
        if self.cache_format == 'npz':
            with np.load(self.cache_file, allow_pickle=False) as archive:
                return {name: archive[name] for name in archive.files}

        with open(self.cache_file, 'r') as cfile:
            if self.cache_format == 'json':
                return json.load(cfile)
            return cfile.read()

    def cache_file_exists(self) -> bool:
        return os.path.exists(self.cache_file)
