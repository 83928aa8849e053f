from __future__ import annotations

from dataclasses import dataclass

from .graph import Topology, check_strong_connectivity
from .utilities import UtilitySpec

__all__ = ["ProblemInstance"]


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A topology together with the utility of every ordered node pair."""

    topology: Topology
    utility: UtilitySpec

    def __post_init__(self):
        if self.utility.n != self.topology.n:
            raise ValueError(
                f"utility is for {self.utility.n} nodes, topology has {self.topology.n}")
        if not check_strong_connectivity(self.topology):
            raise ValueError("topology is not strongly connected")

    @property
    def n(self) -> int:
        return self.topology.n

    @property
    def m(self) -> int:
        return self.topology.m

    def with_utility(self, utility: UtilitySpec) -> "ProblemInstance":
        return ProblemInstance(self.topology, utility)
