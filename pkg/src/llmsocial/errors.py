"""Exception hierarchy shared by every module.

``ValidationError`` subclasses signal bad input (CLI exit code 1);
everything else derived from ``LLMSocialError`` is a runtime failure
(exit code 2).
"""


class LLMSocialError(Exception):
    pass


class ValidationError(LLMSocialError, ValueError):
    pass


# event log / ingestion
class OutOfOrder(ValidationError):
    pass


class OrderError(OutOfOrder):
    """Ordering violation detected while ingesting a file."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DanglingReference(ValidationError):
    pass


class InvalidUnfollow(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class SchemaError(ValidationError):
    def __init__(self, line, field, message):
        self.line = line
        self.field = field
        super().__init__(f"line {line}: field {field!r}: {message}")


# text metrics
class DimensionMismatch(ValidationError):
    pass


class NoPosts(ValidationError):
    pass


class EmptyPost(ValidationError):
    pass


# graph engine
class EmptyGraph(ValidationError):
    pass


class UnknownNode(ValidationError):
    pass


class NoReachablePairs(ValidationError):
    pass


class UnlabeledNode(ValidationError):
    pass


class DegenerateMixing(ValidationError):
    pass


# homophily / influence
class NoCommunities(ValidationError):
    pass


class InsufficientOutsiders(ValidationError):
    pass


class NoFollowEvents(ValidationError):
    pass


class NoBackstoryAgents(ValidationError):
    pass


class NoEdges(ValidationError):
    pass


# toxicity
class EmptyLexicon(ValidationError):
    pass


class NoToxicPosts(ValidationError):
    pass


class DegenerateGroup(ValidationError):
    pass


class NoEligibleAgents(ValidationError):
    pass


class EmptyClass(ValidationError):
    pass


class EmptySet(ValidationError):
    pass


# stance / ideology
class NoRelevantPosts(ValidationError):
    pass


class EmptyKeywordList(ValidationError):
    pass


class PersonaFailure(LLMSocialError):
    pass


class NoLabeledPosts(ValidationError):
    pass


class EmptySubgraph(ValidationError):
    pass


class NoEligibleNodes(ValidationError):
    pass


# CoST experiment
class InsufficientAgents(ValidationError):
    pass


class BalanceFailure(LLMSocialError):
    pass


class NoToxicPost(ValidationError):
    pass


class PolicyFailure(LLMSocialError):
    pass


# prediction
class InsufficientBalance(ValidationError):
    pass


class SingularSystem(LLMSocialError):
    pass


class EmptyTest(ValidationError):
    pass


# simulation / adapters
class PolicyError(LLMSocialError):
    pass


class TransportError(LLMSocialError):
    pass


# command line
class UsageError(ValidationError):
    pass
