"""Exception hierarchy shared across the toolkit."""


class FramekitError(Exception):
    """Base class for all toolkit errors."""


# core model
class UnknownFrame(FramekitError):
    def __init__(self, tag: str):
        super().__init__(f"unknown frame tag: {tag!r}")
        self.tag = tag


class ExclusivityViolation(FramekitError):
    """Filtered label set carrying frames."""


class EmptyLabelSet(FramekitError):
    """Non-filtered label set with no frames."""


# preprocess / corpus ingestion
class RecordInvalid(FramekitError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateId(FramekitError):
    def __init__(self, post_id: str):
        super().__init__(f"duplicate post id: {post_id!r}")
        self.post_id = post_id


class EmptyKeyword(FramekitError):
    pass


class InsufficientEligible(FramekitError):
    """Not enough qualifying posts to satisfy the test-set restriction."""


# agreement
class IncompleteMatrix(FramekitError):
    pass


class TooFewRaters(FramekitError):
    pass


class ItemSetMismatch(FramekitError):
    pass


class DegenerateKappa(FramekitError):
    """Chance agreement is 1 but observed agreement is not."""


# llm annotation
class MissingPlaceholder(FramekitError):
    pass


class ParseError(FramekitError):
    def __init__(self, raw: str):
        super().__init__(f"could not parse response: {raw[:200]!r}")
        self.raw = raw


class WrongStage(FramekitError):
    pass


class ConfigInvalid(FramekitError):
    pass


# validation service
class UnresolvedPost(FramekitError):
    def __init__(self, post_id: str):
        super().__init__(f"annotation references unknown post: {post_id!r}")
        self.post_id = post_id


class NotLeasedToYou(FramekitError):
    pass


class InvalidDecision(FramekitError):
    pass


class UnknownItem(FramekitError):
    pass


# classifier
class EmptyCorpus(FramekitError):
    pass


class EmptySplit(FramekitError):
    pass


class LabelMismatch(FramekitError):
    pass


class UnknownLabel(FramekitError):
    def __init__(self, line_no: int, label: str):
        super().__init__(f"line {line_no}: unknown label {label!r}")
        self.line_no = line_no
        self.label = label


# analytics
class InvalidN(FramekitError):
    pass


class EmptyPrior(FramekitError):
    pass


class NonPositiveAlpha(FramekitError):
    pass


class DegenerateX(FramekitError):
    pass


class LengthMismatch(FramekitError):
    pass


class TooFewSamples(FramekitError):
    pass


class ZeroVariance(FramekitError):
    """Both samples constant with unequal means."""


class EmptyGroup(FramekitError):
    pass


class DegeneratePool(FramekitError):
    pass


class EmptyTermList(FramekitError):
    pass


class ScoreOutOfRange(FramekitError):
    pass
