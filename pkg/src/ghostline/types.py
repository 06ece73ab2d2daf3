"""Shared value types passed between the candidate generators and the harness."""

from __future__ import annotations

from dataclasses import dataclass, field

SOURCE_MPC = "MPC"
SOURCE_MPCPP = "MPCPP"
SOURCE_QB = "QB"
SOURCE_RERANKED = "RERANKED"

SOURCES = (SOURCE_MPC, SOURCE_MPCPP, SOURCE_QB, SOURCE_RERANKED)


@dataclass
class Suggestion:
    """One candidate completion for the text to the right of the cursor.

    ``text`` is empty if and only if the model abstained; an abstention is
    still a recorded outcome, never silently dropped.  ``score`` is oriented
    so that higher always means more confident, whatever the source model
    (n-gram scores are negated length-normalised NLLs for that reason).
    """

    text: str
    score: float
    source: str
    meta: dict = field(default_factory=dict)

    @property
    def len_chars(self) -> int:
        return len(self.text)

    @property
    def is_abstention(self) -> bool:
        return self.text == ""
