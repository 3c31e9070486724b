"""Two-stage chat prompts (relevance filter, then multi-label frames),
response parsing, and guideline-driven prompt editing."""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from ..corpus import Post
from ..errors import MissingPlaceholder, ParseError, UnknownFrame, WrongStage
from ..frames import ALL_FRAMES, Frame, parse_frame, prompt_tag_of

POST_PLACEHOLDER = "{post}"

FILTER_TAG_RELEVANT = "attitude_towards_homelessness"
FILTER_TAG_OTHER = "other"


class Stage(Enum):
    FILTER = "filter"
    FRAMES = "frames"


@dataclass(frozen=True)
class EditLogEntry:
    frame: Frame
    appended_text: str
    note: str
    timestamp: float


@dataclass(frozen=True)
class PromptTemplate:
    stage: Stage
    system_text: str
    instruction_text: str
    version: int = 1
    edit_log: Tuple[EditLogEntry, ...] = ()

    def __post_init__(self):
        if self.instruction_text.count(POST_PLACEHOLDER) != 1:
            raise MissingPlaceholder(
                f"instruction must contain {POST_PLACEHOLDER!r} exactly once"
            )
        if self.stage is Stage.FRAMES:
            for frame in ALL_FRAMES:
                if f"<{prompt_tag_of(frame)}>" not in self.system_text:
                    raise ValueError(f"frames prompt missing tag block for {frame}")
        else:
            for tag in (FILTER_TAG_RELEVANT, FILTER_TAG_OTHER):
                if f"<{tag}>" not in self.system_text:
                    raise ValueError(f"filter prompt missing tag {tag!r}")


def build_prompt(template: PromptTemplate, post: Post) -> List[Dict[str, str]]:
    """Render the two chat messages for one post (text inserted verbatim)."""
    return [
        {"role": "system", "content": template.system_text},
        {"role": "user",
         "content": template.instruction_text.replace(POST_PLACEHOLDER, post.text)},
    ]


# ---------------------------------------------------------------------------
# Response parsing

def _tag_regex(tags: Sequence[str]) -> re.Pattern:
    alternatives = "|".join(re.escape(t) for t in tags)
    # Bracketed tags match anywhere; bare tags only at the start of a line
    # (after optional list bullets), which is the common drift from the
    # requested format without being fooled by ordinary words like "other".
    return re.compile(
        rf"<\s*({alternatives})\s*>"
        rf"|(?:^|\n)\s*(?:[-*\d.)\s]*)({alternatives})\b",
        re.IGNORECASE,
    )

_BECAUSE_RE = re.compile(r"\bbecause\b[:,]?\s*", re.IGNORECASE)
# Bullet prefix of a following list line, left behind when the segment is cut
# at the next bracketed tag.
_TRAILING_BULLET_RE = re.compile(r"\n[-*\d.)\s]*$")
_FILTER_RE = _tag_regex([FILTER_TAG_RELEVANT, FILTER_TAG_OTHER])
_FRAMES_RE = _tag_regex([prompt_tag_of(f) for f in ALL_FRAMES])
_STRICT_FILTER_RE = re.compile(
    rf"<({FILTER_TAG_RELEVANT}|{FILTER_TAG_OTHER})>"
)
_STRICT_FRAMES_RE = re.compile(
    "<(" + "|".join(prompt_tag_of(f) for f in ALL_FRAMES) + ")>"
)


@dataclass(frozen=True)
class ParsedResponse:
    stage: Stage
    labels: Tuple[Tuple[str, str], ...]  # (tag, reason)
    raw: str


def _reason_after(segment: str) -> str:
    match = _BECAUSE_RE.search(segment)
    if match is None:
        return ""
    reason = segment[match.end():].rstrip()
    return _TRAILING_BULLET_RE.sub("", reason).strip()


def parse_filter_response(raw: str, strict: bool = False) -> Tuple[bool, str]:
    """Returns (relevant, reason). Relevant means the post passed the
    public-opinion filter."""
    pattern = _STRICT_FILTER_RE if strict else _FILTER_RE
    match = pattern.search(raw)
    if match is None:
        raise ParseError(raw)
    tag = (match.group(1) or match.group(2) or "").lower() if not strict \
        else match.group(1).lower()
    reason = _reason_after(raw[match.end():])
    if strict and not reason:
        raise ParseError(raw)
    return tag == FILTER_TAG_RELEVANT, reason


def parse_frames_response(raw: str, strict: bool = False) -> List[Tuple[Frame, str]]:
    """Extract every frame tag with its "because" clause, in order of first
    appearance; repeated frames collapse keeping the first reason."""
    pattern = _STRICT_FRAMES_RE if strict else _FRAMES_RE
    matches = list(pattern.finditer(raw))
    if not matches:
        raise ParseError(raw)
    results: List[Tuple[Frame, str]] = []
    seen = set()
    for i, match in enumerate(matches):
        tag = match.group(1) if strict else (match.group(1) or match.group(2))
        frame = parse_frame(tag)
        end = matches[i + 1].start() if i + 1 < len(matches) else len(raw)
        reason = _reason_after(raw[match.end():end])
        if strict and not reason:
            raise ParseError(raw)
        if frame not in seen:
            seen.add(frame)
            results.append((frame, reason))
    return results


def render_frames_response(labels: Sequence[Tuple[Frame, str]]) -> str:
    """The documented response format: one `<tag> because reason` per line."""
    return "\n".join(
        f"<{prompt_tag_of(frame)}> because {reason}" for frame, reason in labels
    )


# ---------------------------------------------------------------------------
# Guideline-driven prompt editing

def _block_bounds(system_text: str, frame: Frame) -> Tuple[int, int]:
    marker = f"- <{prompt_tag_of(frame)}>:"
    start = system_text.find(marker)
    if start < 0:
        raise UnknownFrame(prompt_tag_of(frame))
    end = system_text.find("\n\n", start)
    if end < 0:
        end = len(system_text)
    return start, end


def apply_guideline_edit(
    template: PromptTemplate, frame: Frame, addition: str, note: str = "",
    timestamp: Optional[float] = None,
) -> PromptTemplate:
    """Append expert guidance to one frame's description block, returning a
    new template with the version bumped and the edit logged."""
    if template.stage is not Stage.FRAMES:
        raise WrongStage("guideline edits apply to the frames-stage prompt")
    if not addition:
        raise ValueError("addition must be non-empty")
    _, end = _block_bounds(template.system_text, frame)
    new_text = template.system_text[:end] + " " + addition + template.system_text[end:]
    entry = EditLogEntry(
        frame=frame, appended_text=addition, note=note,
        timestamp=time.time() if timestamp is None else timestamp,
    )
    return replace(
        template,
        system_text=new_text,
        version=template.version + 1,
        edit_log=template.edit_log + (entry,),
    )


# ---------------------------------------------------------------------------
# Shipped templates

_FILTER_SYSTEM = """\
You are an AI model trained to classify tweets related to homelessness into 2 different labels. The labels are <attitude_towards_homelessness> and <other>.

Label Descriptions:

- <attitude_towards_homelessness>: Includes tweets about homelessness to talk about another topic or are generally about the social issue of homelessness. They cover a range of topics related to homelessness, including criticism of government bodies, institutions, or political parties, discussions about the allocation and disbursement of money, aid, and resources, criticism of societal attitudes towards homelessness, debates about who is more deserving of resources, harmful generalizations or stereotypes about homeless people, opposition to having homeless people in local areas or neighborhoods, references to media portrayals of homelessness, anecdotes about interactions with homeless people, and suggestions or ideas for solving the homelessness crisis.

- <other>: Includes personal anecdotes from people experiencing homelessness who are sharing their personal experience while being homeless or asking for assistance and aid. This category does NOT include tweets about fictional characters and personal interactions with other homeless people. Includes statements that are nonsensical or difficult to decipher and require access to additional resources like links, media, images, etc in order to properly interpret the tweet or references to homeless animals or being politically homeless.
"""

_FILTER_INSTRUCTION = """\
Classify the following tweet into one of the provided labels:

"{post}"

In concise points, please provide the relevant label that best characterizes the content of the tweet. Do not "read into" the text with interpretations, stick to the definitions of the categories strictly. The format should be the predicted label, followed by "because", followed by reason. Do not add any additional text.

Feel free to reference the label descriptions to support your classification. Provide any relevant context that influenced your classification.
"""

_FRAMES_SYSTEM = """\
You are an AI model trained to classify tweets related to homelessness into 9 different labels. The labels include <government_critique>, <money_aid_resource>, <public_critique>, <deserving_undeserving_of_resources>, <harmful_statements_against_homelessness>, <not_in_my_backyard>, <media_portrayal>, <interaction_with_homeless_person>, and <solutions_interventions>.

Label Descriptions:

- <government_critique>: criticism about the government body, government institutions or political parties including critique of specific politicians, policies about homelessness, critique of programs that are being funded or considered by the government such as welfare programs, and the policing of homelessness. Also includes statements where homelessness is used as a vehicle or stand-in to talk about a broader issue portraying homelessness amongst other negative social and government problems in a list-like manner in a tweet like "murder rates, homelessness, immigration and inflation. all suck". Also includes statements that mention names of politicians.

- <money_aid_resource>: Primarily includes discussion of money, for long term relief of homelessness. Includes aid or resource disbursement and allocation by government, institutions, organizations or wealthy individuals (not regular public) and also includes discussion or critique and suggestions on how the government decides to spend money and resources. Also includes discussions of giving or providing money, aid and resources to homeless people.

- <public_critique>: Criticism of society in general or social norms that includes discussion of society at large instead of specific people, often pointing out hypocrisy and critiquing society's general attitudes towards homelessness. Also includes critiquing someone helping homelessness in order to gain some personal benefit where someone is being explicitly called out for doing charitable acts while filming a video or for recognition.

- <deserving_undeserving_of_resources>: Discussion of competing priorities where homelessness is compared to other issues that more or less deserve aid and resources. Includes statements that express anti-immigration and support for policies, political initiatives and actions that restrict immigration often comparing and prioritizing aid to people experiencing homelessness over immigrants. Also includes nationalistic statements that prioritize one's own nation over others including discussion about prioritizing aid and relief for veterans and the nation's citizens over non-citizens.

- <harmful_statements_against_homelessness>: Blanket statements that generalize a negative, harmful or undesirable attribute to all people experiencing homelessness and invoke stereotypes and make assumptions about people experiencing homelessness as a whole. Examples include statements that say all people experiencing homelessness are violent, addicts, thieves, mentally ill, unkempt, dirty, and poor at managing finances and also comparing dirty, disheveled clothing to 'looking homeless'. Includes statements that express prejudice against homelessness such as sexism, homophobia, racism, anti-semitism and transphobia or dehumanize people experiencing homelessness depriving them of positive human qualities and viewing them as sub-human or as trash. Includes statements that portray homelessness as the lowest point in one's life where homelessness is used as an example of something wrong or bad. This also includes metaphors to describe objects like anti-homeless. Could also include statements that express the desire to be violent strictly against people experiencing homelessness including threats against homelessness. This includes listing homelessness in conjunction with other issues that are viewed as problematic or negative.

- <not_in_my_backyard>: Opposition by residents to proposed developments in their local area, as well as support for strict land use regulations against wanting to see homelessness in their local area and neighborhood. Also includes displacement sweeps to remove PEH from certain areas and neighborhoods.

- <media_portrayal>: Reference to a fictional character that is portraying homelessness and includes tweets and links about local news media.

- <interaction_with_homeless_person>: Only includes anecdotes describing a real-life interaction with a homeless person.

- <solutions_interventions>: Suggestions, remedies, problem solving and ideas for alleviating the homelessness crisis including support for policy reform, existing policies and welfare programs. Includes individual people giving money, food and help for immediate relief of homelessness. Also includes charitable acts, non-profit work, providing help and emergency aid relief, and defending people experiencing homelessness from harmful stereotypes and generalizations and advocating for positive qualities for people experiencing homelessness. Also includes call to action statements that invoke a sense of urgency in taking action towards helping the homelessness crisis.
"""

_FRAMES_INSTRUCTION = """\
Classify the following tweet into one or more of the provided labels:

"{post}"

In concise points, carefully assess the relevant label(s) that best characterize the content of the tweet; try to list all the labels that are applicable for the tweet. Do not "read into" the text with interpretations or indications or make any assumptions, and stick to the definitions of the labels strictly. Each individual label should be followed by "because", followed by the reason for why that label was picked. Do not add any additional text. You have to select atleast one label, you cannot leave it out.

Feel free to reference the label descriptions to support your classification. Provide any relevant context that influenced your classification.
"""


def default_filter_template() -> PromptTemplate:
    return PromptTemplate(Stage.FILTER, _FILTER_SYSTEM, _FILTER_INSTRUCTION)


def default_frames_template() -> PromptTemplate:
    return PromptTemplate(Stage.FRAMES, _FRAMES_SYSTEM, _FRAMES_INSTRUCTION)
