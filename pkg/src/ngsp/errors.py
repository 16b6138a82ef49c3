"""Exception hierarchy.

Everything raised on bad input data derives from :class:`DataError`; failures of
an external scoring process derive from :class:`ScorerError`. The CLI maps the
two families onto distinct exit codes.
"""


class NGSPError(Exception):
    pass


class DataError(NGSPError):
    pass


# grammar

class GrammarError(DataError):
    pass


class DuplicateLabel(GrammarError):
    def __init__(self, label):
        super().__init__(f"DuplicateLabel({label})")
        self.label = label


class MultipleParents(GrammarError):
    def __init__(self, label):
        super().__init__(f"MultipleParents({label})")
        self.label = label


class UnreachableLabel(GrammarError):
    def __init__(self, label):
        super().__init__(f"UnreachableLabel({label})")
        self.label = label


class MissingRoot(GrammarError):
    def __init__(self, msg="MissingRoot"):
        super().__init__(msg)


class GrammarCycle(GrammarError):
    def __init__(self, label):
        super().__init__(f"GrammarCycle({label})")
        self.label = label


class InvalidLabelName(GrammarError):
    pass


class UnknownLabel(DataError, KeyError):
    def __init__(self, label):
        super().__init__(f"UnknownLabel({label})")
        self.label = label

    def __str__(self):
        return self.args[0]


class NotAnAncestor(DataError):
    pass


# shapes and assignments

class ShapeFormatError(DataError):
    pass


class RegionCountMismatch(ShapeFormatError):
    pass


class AssignmentError(DataError):
    pass


# guide

class GuideError(DataError):
    pass


class SearchSpaceTooLarge(GuideError):
    pass


# scoring

class ScorerError(NGSPError):
    pass


class ScorerProcessError(ScorerError):
    pass


class ScorerTimeout(ScorerError):
    pass


class IncompleteResponse(ScorerError):
    pass


class DuplicateResponse(ScorerError):
    pass


class ScoreOutOfRange(ScorerError):
    pass


class ModelFormatError(DataError):
    pass


# training data

class NoNegativeFound(DataError):
    pass


class CorruptionError(DataError):
    pass


class SplitError(DataError):
    pass
