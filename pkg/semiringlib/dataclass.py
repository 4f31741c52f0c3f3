"""A mixin for frozen configuration dataclasses, with a number of generic pre-defined methods.

Index
-----
.. currentmodule:: semiringlib.dataclass
.. autosummary::
    AbstractConfig
    AbstractConfig.__repr__
    AbstractConfig.copy
    AbstractConfig.as_dict
    AbstractConfig.from_dict
    AbstractConfig.content_hash

API
---
.. autoclass:: AbstractConfig
.. automethod:: AbstractConfig.__repr__
.. automethod:: AbstractConfig.copy
.. automethod:: AbstractConfig.as_dict
.. automethod:: AbstractConfig.from_dict
.. automethod:: AbstractConfig.content_hash

"""

import hashlib
import textwrap
import dataclasses
from typing import Any, Dict, Iterable, Tuple, Mapping, Type, TypeVar, ClassVar, FrozenSet

from .exceptions import ConfigError

__all__ = ['AbstractConfig']

AT = TypeVar('AT', bound='AbstractConfig')


class AbstractConfig:
    """A mixin for frozen :func:`~dataclasses.dataclass` configurations.

    Subclasses should be decorated with :code:`@dataclass(frozen=True, repr=False)`,
    the mixin then provides:

    * String conversion: :meth:`AbstractConfig.__repr__`.
    * Copying with changes: :meth:`AbstractConfig.copy`.
    * Dictionary interconversion: :meth:`AbstractConfig.as_dict` and
      :meth:`AbstractConfig.from_dict`.
    * A stable content hash: :meth:`AbstractConfig.content_hash`.

    Examples
    --------
    .. code:: python

        >>> from dataclasses import dataclass
        >>> from semiringlib.dataclass import AbstractConfig

        >>> @dataclass(frozen=True, repr=False)
        ... class Config(AbstractConfig):
        ...     width: int = 4
        ...     seed: int = 42

        >>> Config()
        Config(
            seed  = 42,
            width = 4
        )

        >>> Config.from_dict({'width': 8, 'depth': 2})
        Traceback (most recent call last):
            ...
        semiringlib.exceptions.ConfigError: 'Config' got unknown key(s): ['depth']

    Attributes
    ----------
    _PRIVATE_ATTR : :class:`frozenset` [:class:`str`]
        A class variable with the names of fields excluded from
        :meth:`AbstractConfig.__repr__`, :meth:`AbstractConfig.as_dict` and
        :meth:`AbstractConfig.content_hash`.

    """

    #: A :class:`frozenset` with the names of private fields.
    _PRIVATE_ATTR: ClassVar[FrozenSet[str]] = frozenset()

    def _iter_attrs(self) -> Iterable[Tuple[str, Any]]:
        """Return an iterator over this instance's public fields as key/value pairs."""
        for field in dataclasses.fields(self):  # type: ignore[arg-type]
            if field.name not in self._PRIVATE_ATTR:
                yield field.name, getattr(self, field.name)

    def __repr__(self) -> str:
        """Return a (machine readable) string representation of this instance.

        The string representation consists of this instances' class name in addition
        to all (non-private) fields, sorted by name.

        """
        items = sorted(self._iter_attrs())
        if not items:
            return f'{self.__class__.__name__}()'

        width = max(len(k) for k, _ in items)
        ret = ',\n'.join(self._str(k, v, width, 3 + width) for k, v in items)
        indent = ' ' * 4
        return f'{self.__class__.__name__}(\n{textwrap.indent(ret, indent)}\n)'

    @staticmethod
    def _str(key: str, value: Any, width: int, indent: int) -> str:
        """Return a string representation of a single **key**/**value** pair."""
        value_str = textwrap.indent(repr(value), ' ' * indent)[indent:]
        return f'{key:{width}} = {value_str}'

    def copy(self: AT, **changes: Any) -> AT:
        """Return a copy of this instance, replacing the fields in **changes**.

        Raises
        ------
        ConfigError
            Raised if **changes** contains a key that is not a field of this class.

        """
        self._check_keys(changes)
        return dataclasses.replace(self, **changes)  # type: ignore[type-var]

    def as_dict(self) -> Dict[str, Any]:
        """Construct a dictionary from this instance with all non-private fields.

        See Also
        --------
        :meth:`AbstractConfig.from_dict`:
            Construct a instance of this objects' class from a dictionary with keyword arguments.

        """
        return dict(self._iter_attrs())

    @classmethod
    def from_dict(cls: Type[AT], dct: Mapping[str, Any]) -> AT:
        """Construct a instance of this objects' class from a dictionary with keyword arguments.

        Raises
        ------
        ConfigError
            Raised if **dct** contains a key that is not a field of this class.

        """
        cls._check_keys(dct)
        return cls(**dct)

    @classmethod
    def _check_keys(cls, dct: Mapping[str, Any]) -> None:
        names = {f.name for f in dataclasses.fields(cls)}  # type: ignore[arg-type]
        unknown = sorted(set(dct) - names)
        if unknown:
            raise ConfigError(f"{cls.__name__!r} got unknown key(s): {unknown!r}")

    def content_hash(self) -> str:
        """Return a SHA-1 hex digest of the sorted ``key = value`` pairs of this instance.

        Identical configurations always produce identical hashes, independent of
        the process they were created in.

        """
        text = '\n'.join(f'{k} = {v!r}' for k, v in sorted(self._iter_attrs()))
        return hashlib.sha1(text.encode('utf-8')).hexdigest()
