"""Exception types surfaced by the filtering layer."""


class ModelMismatchError(ValueError):
    """A filter was given a model outside its assumptions (e.g. non-Poisson
    clutter for the first-order filter)."""


class DegenerateLikelihoodError(RuntimeError):
    """A multi-object likelihood normalizer collapsed to zero."""


class DegenerateFilterError(RuntimeError):
    """Every parent particle received zero likelihood; the filter cannot
    continue meaningfully and the condition is surfaced, not hidden."""
