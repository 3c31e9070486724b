"""Fixed registry of the nine attitude frames, their themes, and label sets.

The registry is intentionally closed: every downstream component (prompting,
agreement, classification, analytics) assumes exactly these nine frames plus
the mutually exclusive Filtered state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import AbstractSet, FrozenSet, Iterable

from .errors import EmptyLabelSet, ExclusivityViolation, UnknownFrame


class Theme(Enum):
    CRITIQUES = "Critiques"
    RESPONSES = "Responses"
    PERCEPTIONS = "Perceptions"


class Frame(Enum):
    GOV_CRIT = "GovCrit"
    MONEY_AID = "MoneyAid"
    SOC_CRIT = "SocCrit"
    SOLN_INT = "SolnInt"
    NIMBY = "NIMBY"
    INTERACT = "Interact"
    MEDIA_PORT = "MediaPort"
    UN_DESERV = "UnDeserv"
    HARM_GEN = "HarmGen"


@dataclass(frozen=True)
class FrameInfo:
    frame: Frame
    theme: Theme
    canonical_name: str  # short display name, e.g. "GovCrit."
    prompt_tag: str      # snake_case tag used in chat prompts
    definition: str


_DEFINITIONS = {
    Frame.GOV_CRIT: (
        "Government Critique: Criticism about government body, policies and "
        "laws including discussion of homelessness through the lens of "
        "political parties and values."
    ),
    Frame.MONEY_AID: (
        "Money Aid Resource Allocation: Discussion of money, aid or resource "
        "disbursement on addressing the homelessness issue, including the "
        "allocation of necessities such as emergency relief supplies, or "
        "government budgeting with respect to competing priorities."
    ),
    Frame.SOC_CRIT: (
        "Societal Critique: Criticism of social norms, systems and society at "
        "large in how homelessness is being addressed and perceived. Also "
        "includes pointing out hypocrisy and performative activism."
    ),
    Frame.SOLN_INT: (
        "Solutions and Interventions: Discussion of solutions, interventions, "
        "charitable acts and remedies to address the homelessness crisis."
    ),
    Frame.NIMBY: (
        "Not in my Backyard: Opposition by residents to proposed developments "
        "in their local area, as well as support for strict land use "
        "regulations against wanting to see homelessness in their local area "
        "and neighborhood."
    ),
    Frame.INTERACT: (
        "Personal Interaction: Anecdote describing a direct personal exchange "
        "with a person experiencing homelessness."
    ),
    Frame.MEDIA_PORT: (
        "Media Portrayal: Portrayal of (fictional or real) people "
        "experiencing homelessness as described in the media (e.g. in a TV "
        "show or in the news)."
    ),
    Frame.UN_DESERV: (
        "Deserving vs. Undeserving of Resources: Perpetuating a hierarchy of "
        "people experiencing homelessness with other marginalized communities "
        "or the use of harmful generalizations such as substance use and "
        "mental illness to justify that they are more or less deserving of "
        "aid. Includes nationalistic rhetoric."
    ),
    Frame.HARM_GEN: (
        "Harmful Generalization: Blanket statements that ascribe an "
        "undesirable characteristic to people experiencing homelessness, such "
        "as generalizing them all as having an unkempt appearance, or being "
        "violent, racist, thieves, or sexual predators."
    ),
}

REGISTRY: dict[Frame, FrameInfo] = {
    Frame.GOV_CRIT: FrameInfo(Frame.GOV_CRIT, Theme.CRITIQUES, "GovCrit.",
                              "government_critique", _DEFINITIONS[Frame.GOV_CRIT]),
    Frame.MONEY_AID: FrameInfo(Frame.MONEY_AID, Theme.CRITIQUES, "MoneyAid.",
                               "money_aid_resource", _DEFINITIONS[Frame.MONEY_AID]),
    Frame.SOC_CRIT: FrameInfo(Frame.SOC_CRIT, Theme.CRITIQUES, "SocCrit.",
                              "public_critique", _DEFINITIONS[Frame.SOC_CRIT]),
    Frame.SOLN_INT: FrameInfo(Frame.SOLN_INT, Theme.RESPONSES, "SolnInt.",
                              "solutions_interventions", _DEFINITIONS[Frame.SOLN_INT]),
    Frame.NIMBY: FrameInfo(Frame.NIMBY, Theme.PERCEPTIONS, "NIMBY",
                           "not_in_my_backyard", _DEFINITIONS[Frame.NIMBY]),
    Frame.INTERACT: FrameInfo(Frame.INTERACT, Theme.PERCEPTIONS, "Interact.",
                              "interaction_with_homeless_person",
                              _DEFINITIONS[Frame.INTERACT]),
    Frame.MEDIA_PORT: FrameInfo(Frame.MEDIA_PORT, Theme.PERCEPTIONS, "MediaPort.",
                                "media_portrayal", _DEFINITIONS[Frame.MEDIA_PORT]),
    Frame.UN_DESERV: FrameInfo(Frame.UN_DESERV, Theme.PERCEPTIONS, "(Un)Deserv.",
                               "deserving_undeserving_of_resources",
                               _DEFINITIONS[Frame.UN_DESERV]),
    Frame.HARM_GEN: FrameInfo(Frame.HARM_GEN, Theme.PERCEPTIONS, "HarmGen.",
                              "harmful_statements_against_homelessness",
                              _DEFINITIONS[Frame.HARM_GEN]),
}

ALL_FRAMES: tuple[Frame, ...] = tuple(REGISTRY)

# Serialization token for the Filtered state in prediction files.
FILTERED_TOKEN = "0"


def prompt_tag_of(frame: Frame) -> str:
    return REGISTRY[frame].prompt_tag


def canonical_name_of(frame: Frame) -> str:
    return REGISTRY[frame].canonical_name


def theme_of(frame: Frame) -> Theme:
    return REGISTRY[frame].theme


def _normalize(tag: str) -> str:
    tag = tag.strip()
    if tag.startswith("<") and tag.endswith(">"):
        tag = tag[1:-1]
    return tag.strip().rstrip(".").lower()


_LOOKUP: dict[str, Frame] = {}
for _info in REGISTRY.values():
    _LOOKUP[_normalize(_info.prompt_tag)] = _info.frame
    _LOOKUP[_normalize(_info.canonical_name)] = _info.frame
    _LOOKUP[_info.frame.value.lower()] = _info.frame


def parse_frame(tag: str) -> Frame:
    """Resolve a prompt tag or canonical short name (case-insensitive,
    bracket-optional, trailing period ignored) to its Frame."""
    frame = _LOOKUP.get(_normalize(tag))
    if frame is None:
        raise UnknownFrame(tag)
    return frame


@dataclass(frozen=True)
class LabelSet:
    """Either the exclusive Filtered state or a non-empty set of frames.

    Construct through :func:`make_labelset`, which enforces exclusivity.
    """

    frames: FrozenSet[Frame] = field(default_factory=frozenset)
    filtered: bool = False

    def __post_init__(self):
        if self.filtered and self.frames:
            raise ExclusivityViolation("filtered label set cannot carry frames")
        if not self.filtered and not self.frames:
            raise EmptyLabelSet("at least one frame is required")

    def contains(self, frame: Frame) -> bool:
        return frame in self.frames

    def serialize(self) -> str:
        """Comma-separated canonical names, or the `0` token when filtered."""
        if self.filtered:
            return FILTERED_TOKEN
        names = sorted(canonical_name_of(f) for f in self.frames)
        return ", ".join(names)

    @staticmethod
    def parse(text: str) -> "LabelSet":
        text = text.strip()
        if text == FILTERED_TOKEN:
            return FILTERED_LABELS
        frames = {parse_frame(part) for part in text.split(",") if part.strip()}
        return make_labelset(frames, filtered=False)


FILTERED_LABELS = LabelSet(frozenset(), filtered=True)


def make_labelset(frames: AbstractSet[Frame] | Iterable[Frame], filtered: bool) -> LabelSet:
    return LabelSet(frozenset(frames), filtered=filtered)
