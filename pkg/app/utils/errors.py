from typing import Any, Dict, Optional


class EquivariantError(Exception):
    """Basisklasse für alle fachlichen Fehler der Anwendung"""

    def __init__(self, message: str, field: Optional[str] = None, axiom: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.field = field
        self.axiom = axiom

    def to_dict(self) -> Dict[str, Any]:
        return {
            "success": False,
            "error": type(self).__name__,
            "message": self.message,
            "field": self.field,
            "axiom": self.axiom,
        }


class StructureError(EquivariantError):
    """Fehlerhafte oder entartete Eingabe (falsche Längen, leere Punktmenge, unbekannte Namen)"""


class LimitExceededError(EquivariantError):
    """Eine konfigurierte Obergrenze wurde überschritten"""

    def __init__(self, message: str, cap: int, field: Optional[str] = None):
        super().__init__(message, field=field, axiom="cap")
        self.cap = cap

    def to_dict(self) -> Dict[str, Any]:
        result = super().to_dict()
        result["cap"] = self.cap
        return result


class UnverifiedError(EquivariantError):
    """Export eines Systems, das die Verifikation nicht bestanden hat"""
