"""Text formatting patterns for UI components"""

from rich.text import Text as RichText
from typing import Optional, Union


class Text(RichText):
    """Enhanced Text class with field formatting methods"""

    def append(
        self, text: Union[str, RichText], style: Optional[str] = None
    ) -> "Text":
        """Append text with optional style, returning self for chaining"""
        super().append(text, style=style)
        return self

    def append_field(
        self,
        label: str,
        value: str,
        *,
        note: Optional[str] = None,
        label_style: str = "dim",
        value_style: str = "cyan",
        note_style: str = "dim",
    ) -> "Text":
        """Append a ``label: value (note)`` line

        Returns:
            self for method chaining
        """
        self.append(f"{label}:", style=label_style)
        self.append(" ")
        self.append(str(value), style=value_style)
        if note:
            self.append(f" ({note})", style=note_style)
        self.append("\n")
        return self
