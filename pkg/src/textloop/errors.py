"""Shared error types.

Every error carries a stable ``code`` string so the HTTP layer can emit
``{"code": ..., "message": ...}`` bodies without inspecting types twice.
"""

from __future__ import annotations


class TextLoopError(Exception):
    code = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


# corpus
class MalformedCorpus(TextLoopError):
    code = "malformed_corpus"

    def __init__(self, message: str, location: str = ""):
        if location:
            message = f"{location}: {message}"
        super().__init__(message)
        self.location = location


class EmptyRecord(TextLoopError):
    code = "empty_record"


class InvalidSpec(TextLoopError):
    code = "invalid_spec"


# learner
class EmptyModel(TextLoopError):
    code = "empty_model"


class OverlapError(TextLoopError):
    code = "overlap_error"


# wordtree
class EmptyQuery(TextLoopError):
    code = "empty_query"


class NodeNotInTree(TextLoopError):
    code = "node_not_in_tree"


class AtInitialState(TextLoopError):
    code = "at_initial_state"


# feedback
class FeedbackError(TextLoopError):
    code = "feedback_error"


class UnknownDocument(FeedbackError):
    code = "unknown_document"


class UnknownReport(FeedbackError):
    code = "unknown_report"


class UnknownVariable(FeedbackError):
    code = "unknown_variable"


class NoTokenInSpan(FeedbackError):
    code = "no_token_in_span"


class EmptyTree(FeedbackError):
    code = "empty_tree"


class EmptyPhrase(FeedbackError):
    code = "empty_phrase"


class UnknownFeedback(FeedbackError):
    code = "unknown_feedback"


class NotPending(FeedbackError):
    code = "not_pending"


class UnresolvedConflicts(FeedbackError):
    code = "unresolved_conflicts"

    def __init__(self, message: str, conflicts=()):
        super().__init__(message)
        self.conflicts = list(conflicts)


# engine / service
class Busy(TextLoopError):
    code = "busy"


# harness
class ScriptError(TextLoopError):
    code = "script_error"

    def __init__(self, message: str, action_index: int):
        super().__init__(f"action {action_index}: {message}")
        self.action_index = action_index


class InvalidPolicy(TextLoopError):
    code = "invalid_policy"
