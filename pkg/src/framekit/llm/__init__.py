from .prompts import (
    PromptTemplate,
    Stage,
    ParsedResponse,
    build_prompt,
    parse_filter_response,
    parse_frames_response,
    apply_guideline_edit,
    default_filter_template,
    default_frames_template,
    render_frames_response,
)
from .client import ChatClient, HTTPChatClient, LLMClientConfig
from .batch import annotate_two_stage

__all__ = [
    "PromptTemplate", "Stage", "ParsedResponse",
    "build_prompt", "parse_filter_response", "parse_frames_response",
    "apply_guideline_edit", "default_filter_template", "default_frames_template",
    "render_frames_response",
    "ChatClient", "HTTPChatClient", "LLMClientConfig",
    "annotate_two_stage",
]
