"""Exception and warning types.

Errors split into two families so the CLI can map them onto exit codes:
``DataError`` (bad inputs, exit 3) and ``NumericError`` (a computation
failed, exit 4).
"""


class FacemotionError(Exception):
    pass


class DataError(FacemotionError):
    pass


class NumericError(FacemotionError):
    pass


class SequenceTooShort(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class SequenceIOError(DataError, OSError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = str(path)


class CropOutOfBounds(DataError):
    pass


class BadFilterSpec(DataError):
    pass


class LayoutOutOfImage(DataError):
    pass


class EmptyMotionField(DataError):
    pass


class MissingLabel(DataError):
    pass


class ManifestError(DataError):
    pass


class FeatureFileError(DataError, ValueError):
    """A feature CSV that cannot be parsed into a dataset."""


class TrainingDiverged(NumericError):
    def __init__(self, epoch):
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")
        self.epoch = epoch


class FoldFailure(NumericError):
    """A trainer raised inside run_cv; carries the repeat/fold coordinates."""

    def __init__(self, repeat, fold, cause):
        super().__init__(f"repeat {repeat}, fold {fold}: {cause!r}")
        self.repeat = repeat
        self.fold = fold
        self.cause = cause


class EmptyField(UserWarning):
    """No reliable motion vectors were found (a neutral clip is legitimate)."""


class ConvergenceWarning(UserWarning):
    pass


class StratificationWarning(UserWarning):
    pass
