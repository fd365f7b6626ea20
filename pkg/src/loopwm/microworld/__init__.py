from .dynamics import apply_operator, contact_window_frames, reference_segment
from .frames import decode_frame, encode_state, state_summary
from .io import (
    BUILTIN_DOMAINS,
    canonical_dict,
    domain_from_dict,
    domain_hash,
    load_domain,
)
from .types import (
    ActionBinding,
    DomainSpec,
    Literal,
    MotionProfile,
    ObjectSpec,
    Operator,
    Segment,
    SymbolicState,
    parse_literal,
)

__all__ = [
    "ActionBinding",
    "BUILTIN_DOMAINS",
    "DomainSpec",
    "Literal",
    "MotionProfile",
    "ObjectSpec",
    "Operator",
    "Segment",
    "SymbolicState",
    "apply_operator",
    "canonical_dict",
    "contact_window_frames",
    "decode_frame",
    "domain_from_dict",
    "domain_hash",
    "encode_state",
    "load_domain",
    "parse_literal",
    "reference_segment",
    "state_summary",
]
