"""LLM-driven generation of entity attributes and scene graphs."""

from .client import CachingClient, CompletionRequest, HttpChatClient, MockClient, TransportError
from .pipeline import (
    GenerationSettings,
    RawTupleRow,
    TupleLines,
    generate_attributes,
    generate_scene_graphs,
    parse_tuple_lines,
    postprocess_attributes,
    postprocess_scene_graph,
    run_triplicate,
)
from .prompts import build_attribute_prompt, build_scene_graph_prompt
from .review import DROP, EDIT, KEEP, Action, Decision, ReviewSession, review_session

__all__ = [
    "Action",
    "CachingClient",
    "CompletionRequest",
    "DROP",
    "Decision",
    "EDIT",
    "GenerationSettings",
    "HttpChatClient",
    "KEEP",
    "MockClient",
    "RawTupleRow",
    "ReviewSession",
    "TransportError",
    "TupleLines",
    "build_attribute_prompt",
    "build_scene_graph_prompt",
    "generate_attributes",
    "generate_scene_graphs",
    "parse_tuple_lines",
    "postprocess_attributes",
    "postprocess_scene_graph",
    "review_session",
    "run_triplicate",
]
