"""restkit Tool Data Package.

This package holds the canonical data model for tool calls, samples and
dialogues, along with dataset ingestion and the multi-turn decomposition.

Modules:
    - ToolCall: Tool calls, call sets, parsing and canonical value equality.
    - Dialogue: Samples, dialogues, JSONL loading and decomposition.
"""
