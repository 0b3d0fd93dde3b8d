from enum import Enum
from typing import List


class Relationship(Enum):
    FS = "FS"  # father-son
    FD = "FD"  # father-daughter
    MS = "MS"  # mother-son
    MD = "MD"  # mother-daughter

    @property
    def label(self) -> str:
        """Column label used in summary tables, e.g. 'F-S'."""
        return f"{self.value[0]}-{self.value[1]}"

    @property
    def parent_role(self) -> str: return "father" if self.value[0] == "F" else "mother"

    @property
    def child_role(self) -> str: return "son" if self.value[1] == "S" else "daughter"

    @classmethod
    def parse(cls, value: "str | Relationship") -> "Relationship":
        """Accept 'FS', 'fs' or 'F-S'."""
        if isinstance(value, cls):
            return value
        normalized = str(value).replace("-", "").strip().upper()
        try:
            return cls(normalized)
        except ValueError:
            raise ValueError(f"unknown relationship '{value}', expected one of {[r.value for r in cls]}") from None

    @classmethod
    def select(cls, choice: str) -> List["Relationship"]:
        """Expand a CLI choice ('all' or a single code) into relationships."""
        if choice.lower() == "all":
            return list(cls)
        return [cls.parse(choice)]
