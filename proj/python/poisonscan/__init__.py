"""Black-box poisoning scanner for code generation models."""

try:
    from poisonscan._core import *  # noqa: F401,F403
except ImportError:  # pragma: no cover - source layout during development
    from _core import *  # noqa: F401,F403

__all__ = [
    "preprocess_lines",
    "fingerprint_key",
    "normalize_for_match",
    "entropy",
    "distribution_judgement",
    "divergence_clusters",
    "extract_target_lines",
    "ast_distance",
    "bleu",
    "rule_judge",
    "demo_scan",
]
