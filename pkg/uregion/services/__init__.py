"""Service package exports."""
from .verification_service import (
    CriterionReport,
    VerificationError,
    VerificationRequest,
    VerificationResult,
    VerificationService,
)

__all__ = [
    "CriterionReport",
    "VerificationError",
    "VerificationRequest",
    "VerificationResult",
    "VerificationService",
]
