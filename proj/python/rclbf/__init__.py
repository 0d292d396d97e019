"""Robust CLBF toolkit: learn neural certificates, deploy QP safety filters."""

from ._rclbf import *  # noqa: F401,F403
