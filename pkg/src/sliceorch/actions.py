"""Numbering of actions as 1-based indices in canonical order."""
from __future__ import annotations

from .model import Action, ScenarioConfig, StateSpace, canonical_key, enumerate_states, feasible_actions


class ActionIndexMap:
    """Bijection between 1-based indices and actions.

    Actions are ordered by ascending ``a_b`` then ascending ``a_g``. For the
    evaluation scenario this gives, in ``(a_b, a_g)`` form,
    (0,0) (0,1) (0,2) (1,0) (1,1) (2,0) as indices 1..6.
    """

    def __init__(self, actions):
        self.actions = tuple(sorted({Action(*a) for a in actions}, key=canonical_key))
        self._index = {a: i + 1 for i, a in enumerate(self.actions)}

    @classmethod
    def for_scenario(cls, config: ScenarioConfig, space: StateSpace | None = None) -> "ActionIndexMap":
        space = space if space is not None else enumerate_states(config)
        return cls(a for s in space for a in feasible_actions(s, config))

    def __len__(self):
        return len(self.actions)

    def index(self, action) -> int:
        return self._index[Action(*action)]

    def action(self, index: int) -> Action:
        if not 1 <= index <= len(self.actions):
            raise KeyError(index)
        return self.actions[index - 1]
