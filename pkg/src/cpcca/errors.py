"""Exception hierarchy.

Every error carries a stable string ``code`` that the command-line front end
reports verbatim, so renaming a code is a breaking change.
"""


class CpccaError(Exception):
    code = "CPCCA_ERROR"

    def to_dict(self):
        return {"code": self.code, "message": str(self)}


# -- matrix construction and I/O ------------------------------------------

class ValidationError(CpccaError, ValueError):
    code = "VALIDATION_ERROR"


class NonSquare(ValidationError):
    code = "NON_SQUARE"


class NegativeEntry(ValidationError):
    code = "NEGATIVE_ENTRY"

    def __init__(self, i, j, value):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"entry ({i}, {j}) is negative: {value!r}")


class RowSumViolation(ValidationError):
    code = "ROW_SUM_VIOLATION"

    def __init__(self, i, row_sum):
        self.i, self.row_sum = i, row_sum
        super().__init__(f"row {i} sums to {row_sum!r}, expected 1")


class ZeroRow(ValidationError):
    code = "ZERO_ROW"

    def __init__(self, i):
        self.i = i
        super().__init__(f"row {i} has zero sum and cannot be normalized")


class InvalidSpec(ValidationError):
    code = "INVALID_SPEC"


class UnknownFixture(ValidationError):
    code = "UNKNOWN_FIXTURE"


class ParseError(ValidationError):
    code = "PARSE_ERROR"

    def __init__(self, line, message):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


# -- spectral --------------------------------------------------------------

class DimensionMismatch(CpccaError, ValueError):
    code = "DIMENSION_MISMATCH"


class InvalidSelection(CpccaError, ValueError):
    code = "INVALID_SELECTION"


class DefectiveOrIllConditioned(CpccaError):
    code = "DEFECTIVE_OR_ILL_CONDITIONED"


class SplitConjugatePair(CpccaError, ValueError):
    code = "SPLIT_CONJUGATE_PAIR"

    def __init__(self, n_clusters, suggested):
        self.n_clusters = n_clusters
        self.suggested = tuple(suggested)
        super().__init__(
            f"n_clusters={n_clusters} splits a complex conjugate pair; "
            f"try one of {list(self.suggested)}")


class NonNegligibleImaginaryPart(CpccaError):
    code = "NON_NEGLIGIBLE_IMAGINARY_PART"

    def __init__(self, column, magnitude):
        self.column = column
        super().__init__(
            f"column {column} belongs to a real eigenvalue but has imaginary "
            f"part of size {magnitude:.3e}")


class UnpairedComplexColumn(CpccaError):
    code = "UNPAIRED_COMPLEX_COLUMN"


class RankDeficient(CpccaError):
    code = "RANK_DEFICIENT"

    def __init__(self, column, message=""):
        self.column = column
        super().__init__(message or f"column {column} is linearly dependent")


class ConstantVectorNotInSpan(CpccaError):
    code = "CONSTANT_VECTOR_NOT_IN_SPAN"


# -- clustering ------------------------------------------------------------

class DegenerateSimplex(CpccaError):
    code = "DEGENERATE_SIMPLEX"


class InfeasibleScaling(CpccaError):
    code = "INFEASIBLE_SCALING"


class SingularDc(CpccaError):
    code = "SINGULAR_DC"


class SingularProjection(CpccaError):
    code = "SINGULAR_PROJECTION"


class NoConvergence(CpccaError):
    code = "NO_CONVERGENCE"


class EmptyRange(CpccaError, ValueError):
    code = "EMPTY_RANGE"


class AllCandidatesSkipped(CpccaError):
    code = "ALL_CANDIDATES_SKIPPED"


# -- bench -----------------------------------------------------------------

class InsufficientPoints(CpccaError, ValueError):
    code = "INSUFFICIENT_POINTS"


class DegenerateDesign(CpccaError, ValueError):
    code = "DEGENERATE_DESIGN"
