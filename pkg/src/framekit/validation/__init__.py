from .store import (QueueItem, QueueState, ValidationDecision, ValidationStats,
                    ValidationStore)
from .service import create_app

__all__ = [
    "QueueItem", "QueueState", "ValidationDecision", "ValidationStats",
    "ValidationStore", "create_app",
]
