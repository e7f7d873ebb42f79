"""Intersectional subgroups: one group per observed combination of protected values."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dataset import Dataset
from .errors import NoProtectedAttributes, UnknownSubgroup


@dataclass(frozen=True, order=True)
class SubgroupKey:
    """Full assignment of protected attributes, in schema order."""

    assignment: tuple[tuple[str, str], ...]

    def __str__(self) -> str:
        return "|".join(f"{a}={v}" for a, v in self.assignment)

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.assignment)

    @property
    def values(self) -> tuple[str, ...]:
        return tuple(v for _, v in self.assignment)

    @classmethod
    def parse(cls, text: str) -> "SubgroupKey":
        pairs = []
        for part in text.split("|"):
            if "=" not in part:
                raise UnknownSubgroup(f"cannot parse subgroup key {text!r}")
            a, v = part.split("=", 1)
            pairs.append((a.strip(), v.strip()))
        return cls(tuple(pairs))

    @classmethod
    def from_mapping(cls, values: Mapping[str, str], order) -> "SubgroupKey":
        return cls(tuple((a, str(values[a])) for a in order))


@dataclass(frozen=True)
class SubgroupIndex:
    groups: dict  # SubgroupKey -> np.ndarray of record indices (ascending)
    universe_n: int

    def __contains__(self, key) -> bool:
        return key in self.groups

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def keys(self) -> list[SubgroupKey]:
        return list(self.groups)

    def indices(self, key: SubgroupKey) -> np.ndarray:
        try:
            return self.groups[key]
        except KeyError:
            raise UnknownSubgroup(f"no records in subgroup {key}", key=str(key)) from None

    def sizes(self) -> dict:
        return {k: len(v) for k, v in self.groups.items()}


def enumerate_subgroups(dataset: Dataset, min_size: int = 1) -> SubgroupIndex:
    """Partition record indices by their full protected-attribute combination.

    Only combinations that actually occur are kept. Keys are ordered by the
    schema's category order, attribute by attribute, so the result is stable
    for a fixed schema. ``min_size`` drops groups smaller than it; with the
    default every observed group, singletons included, is kept.
    """
    names = dataset.schema.protected_names
    if not names:
        raise NoProtectedAttributes("schema declares no protected attributes")

    codes = []
    for a in names:
        cats = list(dataset.categories[a])
        col = dataset.attributes[a]
        extra = sorted(set(col.tolist()) - set(cats))
        cats = cats + extra
        lookup = {c: i for i, c in enumerate(cats)}
        codes.append((cats, np.fromiter((lookup[v] for v in col.tolist()), dtype=np.int64, count=dataset.n)))

    stacked = np.stack([c for _, c in codes], axis=1)
    uniq, inverse = np.unique(stacked, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))

    groups = {}
    for g, row in enumerate(uniq):
        members = order[bounds[g] : bounds[g + 1]]
        if len(members) < min_size:
            continue
        key = SubgroupKey(tuple((a, codes[j][0][row[j]]) for j, a in enumerate(names)))
        groups[key] = members
    return SubgroupIndex(groups, dataset.n)


def group_size(index: SubgroupIndex, key: SubgroupKey) -> int:
    return int(len(index.indices(key)))


def alpha(index: SubgroupIndex, key: SubgroupKey) -> float:
    """Share of the population falling in ``key``: n_G / n."""
    return group_size(index, key) / index.universe_n
