"""Bounded exploration of interleavings and the audits run over it."""

from .audits import AuditResult, AuditStatus
from .forest import ExecutionForest, explore
from .initial import InitialConfigSet, initial_configs

__all__ = ["AuditResult", "AuditStatus", "ExecutionForest", "InitialConfigSet", "explore", "initial_configs"]
