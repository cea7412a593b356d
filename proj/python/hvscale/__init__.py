"""Joint horizontal and vertical autoscaling for inference pipelines."""

from ._core import HvscaleError, ModelProfile, fit_profile, load_profile_csv, simulate, solve

__all__ = ["HvscaleError", "ModelProfile", "fit_profile", "load_profile_csv", "simulate", "solve"]
