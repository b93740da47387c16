"""Adapter error hierarchy."""


class AdapterError(Exception):
    """Base class for adapter failures."""


class MissingRun(AdapterError):
    """The expected prompt-export directory or file is absent."""


class ModelError(AdapterError):
    """The segmentation model cannot be loaded or fails during inference."""


class IoError(AdapterError):
    """A file cannot be read or written."""
