"""3GPP working-group taxonomy: the 15 classification labels and their canonical order."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Tsg(str, Enum):
    RAN = "RAN"
    SA = "SA"
    CT = "CT"


@dataclass(frozen=True)
class WorkingGroup:
    tsg: Tsg
    index: int

    @property
    def name(self) -> str:
        return f"{self.tsg.value}{self.index}"

    def __str__(self) -> str:
        return self.name


# Canonical label order; label index = position in this tuple.
WORKING_GROUPS: tuple[WorkingGroup, ...] = tuple(
    WorkingGroup(tsg, i)
    for tsg, indices in ((Tsg.RAN, (1, 2, 3, 4, 5)), (Tsg.SA, (1, 2, 3, 4, 5, 6)), (Tsg.CT, (1, 3, 4, 6)))
    for i in indices
)

WG_NAMES: tuple[str, ...] = tuple(wg.name for wg in WORKING_GROUPS)

_BY_NAME: dict[str, WorkingGroup] = {wg.name: wg for wg in WORKING_GROUPS}

# TDoc filename prefix -> working group (R1-xxxx is RAN1, S2-xxxx is SA2, ...).
DEFAULT_PREFIX_MAP: dict[str, str] = {
    **{f"R{i}": f"RAN{i}" for i in (1, 2, 3, 4, 5)},
    **{f"S{i}": f"SA{i}" for i in (1, 2, 3, 4, 5, 6)},
    **{f"C{i}": f"CT{i}" for i in (1, 3, 4, 6)},
}


def wg_from_name(name: str) -> WorkingGroup:
    """Look up a working group by canonical name (case-insensitive), e.g. "RAN1"."""
    wg = _BY_NAME.get(name.upper())
    if wg is None:
        raise ValueError(f"unknown working group: {name!r}")
    return wg


def is_wg_name(name: str) -> bool:
    return name.upper() in _BY_NAME


def label_index(wg: WorkingGroup) -> int:
    return WORKING_GROUPS.index(wg)


def canonical_order(names: set[str] | frozenset[str]) -> list[str]:
    """Restrict the canonical label order to the given WG names."""
    unknown = {n for n in names if not is_wg_name(n)}
    if unknown:
        raise ValueError(f"unknown working groups: {sorted(unknown)}")
    upper = {n.upper() for n in names}
    return [n for n in WG_NAMES if n in upper]
