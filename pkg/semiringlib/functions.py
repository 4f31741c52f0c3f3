"""Various utility functions used throughout SemiringLib.

Index
-----
.. currentmodule:: semiringlib.functions
.. autosummary::
    load_readme
    git_blob_hash
    source_hash

API
---
.. autofunction:: load_readme
.. autofunction:: git_blob_hash
.. autofunction:: source_hash

"""

import os
import hashlib
from types import MappingProxyType
from typing import Any, Mapping, Union, Optional

__all__ = ['load_readme', 'git_blob_hash', 'source_hash']

#: An immutable mapping of to-be replaced substrings and their replacements.
README_MAPPING: Mapping[str, str] = MappingProxyType({
    '``': '|',
    '()': ''
})


def load_readme(readme: Union[str, bytes, int, os.PathLike],
                replace: Mapping[str, str] = README_MAPPING,
                **kwargs: Any) -> str:
    r"""Load and return the content of a readme file located in the same directory as this file.

    Parameters
    ----------
    readme : :class:`str`
        The name of the readme file.

    replace : :class:`~Collections.abc.Mapping` [:class:`str`, :class:`str`]
        A mapping of to-be replaced substrings contained within the readme file.

    \**kwargs : :data:`~typing.Any`
        Optional keyword arguments for :func:`open`.

    Returns
    -------
    :class:`str`
        The content of the readme file.

    """
    with open(readme, **kwargs) as f:
        ret: str = f.read()
    for old, new in replace.items():
        ret = ret.replace(old, new)
    return ret


def git_blob_hash(content: bytes) -> str:
    """Return the git object hash of **content**, *i.e.* what ``git hash-object`` would print.

    Examples
    --------
    .. code:: python

        >>> from semiringlib.functions import git_blob_hash

        >>> git_blob_hash(b'')
        'e69de29bb2d1d6434b8b29ae775ad8c2e48c5391'

    """
    header = f'blob {len(content)}\0'.encode('ascii')
    return hashlib.sha1(header + content).hexdigest()


def source_hash(path: Optional[Union[str, os.PathLike]] = None) -> str:
    """Return a content hash of all ``.py`` and ``.cfg`` files in the package directory.

    The per-file git blob hashes are combined in sorted path order, so the result only
    changes when the code (or a bundled preset) changes.

    """
    root = os.fspath(path) if path is not None else os.path.dirname(os.path.abspath(__file__))
    sha = hashlib.sha1()
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d != '__pycache__')
        for name in sorted(filenames):
            if not name.endswith(('.py', '.cfg')):
                continue
            filename = os.path.join(dirpath, name)
            with open(filename, 'rb') as f:
                blob = git_blob_hash(f.read())
            rel = os.path.relpath(filename, root).replace(os.sep, '/')
            sha.update(f'{blob} {rel}\n'.encode('utf-8'))
    return sha.hexdigest()
