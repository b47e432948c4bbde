"""Multiple-choice evaluation of vision and blind models over degradation conditions."""

from .models import HttpChatModel, StubModel, TransientModelError, load_model, model_from_config
from .prompts import PROMPT_VERSION, build_prompt, parse_response
from .runner import Condition, EvalRecord, image_path, latest_records, parse_conditions, read_journal, run_eval, table_conditions
from .scoring import AccuracyReport, Cell, format_delta, format_percent, percent, score

__all__ = [
    "AccuracyReport",
    "Cell",
    "Condition",
    "EvalRecord",
    "HttpChatModel",
    "PROMPT_VERSION",
    "StubModel",
    "TransientModelError",
    "build_prompt",
    "format_delta",
    "format_percent",
    "image_path",
    "latest_records",
    "load_model",
    "model_from_config",
    "parse_conditions",
    "parse_response",
    "percent",
    "read_journal",
    "run_eval",
    "score",
    "table_conditions",
]
