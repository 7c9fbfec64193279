"""Skilled Experience Catalogue: milestone snapshots and the KDD balancer."""
from __future__ import annotations

from dataclasses import dataclass, field

from .arena import Incident
from .errors import ContractViolation, MilestoneRangeError
from .rl import DEFAULT_DISCRETIZER, N_ACTIONS, Discretizer, QTable, reset_traces


@dataclass(frozen=True)
class Milestone:
    index: int
    deaths_at_capture: int
    snapshot: tuple[float, ...]


@dataclass
class Catalogue:
    """Ordered milestones; index 0 is always the empty (no-knowledge) table."""

    milestones: list[Milestone] = field(default_factory=list)
    interval: int = 100
    discretizer: Discretizer = DEFAULT_DISCRETIZER

    def __post_init__(self):
        if self.interval <= 0:
            raise ValueError("milestone interval must be positive")
        if not self.milestones:
            self.milestones.append(Milestone(0, 0, (0.0,) * (self.n_states * self.n_actions)))

    @property
    def n_states(self) -> int:
        return self.discretizer.n_states

    @property
    def n_actions(self) -> int:
        return N_ACTIONS

    @property
    def bucket_counts(self) -> tuple[int, int, int, int]:
        return self.discretizer.bucket_counts

    def __len__(self) -> int:
        return len(self.milestones)

    def __getitem__(self, index: int) -> Milestone:
        return self.milestones[index]

    @property
    def max_index(self) -> int:
        return len(self.milestones) - 1


def maybe_capture(deaths: int, q: QTable, catalogue: Catalogue) -> Catalogue:
    """Append a milestone when ``deaths`` reaches the next multiple of the interval."""
    if deaths > 0 and deaths % catalogue.interval == 0 and deaths // catalogue.interval == len(catalogue):
        catalogue.milestones.append(Milestone(len(catalogue), deaths, q.snapshot()))
    return catalogue


class CatalogueBuilder:
    """Counts learner deaths across training games and captures milestones."""

    def __init__(self, catalogue: Catalogue):
        self.catalogue = catalogue
        self.deaths = 0

    def __call__(self, q: QTable) -> None:
        self.deaths += 1
        maybe_capture(self.deaths, q, self.catalogue)


def load_milestone(catalogue: Catalogue, index: int) -> QTable:
    if not 0 <= index < len(catalogue):
        raise MilestoneRangeError(f"milestone {index} outside [0, {len(catalogue)})")
    q = QTable(catalogue.n_states, catalogue.n_actions, catalogue[index].snapshot,
               bucket_counts=catalogue.bucket_counts)
    return reset_traces(q)


class Balancer:
    """KDD-threshold state machine choosing which milestone the live table comes from.

    The match range is inclusive, ``-threshold <= kdd <= threshold``; moves
    happen only at incidents: a step back (or a policy clearance at
    milestone 0) after an opponent death with kdd above the range, a step
    forward after a learner death with kdd below it.
    """

    def __init__(self, catalogue: Catalogue, threshold: int = 5, start_index: int = 0):
        if threshold < 0:
            raise ValueError("threshold must be non-negative")
        if not 0 <= start_index < len(catalogue):
            raise MilestoneRangeError(f"start index {start_index} outside catalogue")
        self.catalogue = catalogue
        self.threshold = threshold
        self.start_index = start_index
        self.current_index = start_index
        self.max_index_reached = start_index
        self.kdd = 0
        self.adjustments_up = 0
        self.adjustments_down = 0
        self.clearances = 0

    def start(self) -> QTable:
        """Reset per-game state and return the live table to begin with."""
        self.current_index = self.start_index
        self.max_index_reached = self.start_index
        self.kdd = 0
        self.adjustments_up = self.adjustments_down = self.clearances = 0
        return load_milestone(self.catalogue, self.current_index)

    def on_incident(self, incident: Incident | str, live_q: QTable) -> QTable:
        """Update KDD for one incident; returns the (possibly replaced) live table."""
        try:
            incident = Incident(incident)
        except ValueError:
            raise ContractViolation(f"balancer consulted on non-incident event {incident!r}") from None
        t = self.threshold
        if incident is Incident.LEARNER_KILLED_OPPONENT:
            self.kdd += 1
            if self.kdd > t:
                if self.current_index > 0:
                    self.current_index -= 1
                    self.adjustments_down += 1
                    return load_milestone(self.catalogue, self.current_index)
                self.clearances += 1
                live_q.clear()
        else:
            self.kdd -= 1
            if self.kdd < -t and self.current_index < self.catalogue.max_index:
                self.current_index += 1
                self.adjustments_up += 1
                self.max_index_reached = max(self.max_index_reached, self.current_index)
                return load_milestone(self.catalogue, self.current_index)
        return live_q
