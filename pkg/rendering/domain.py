"""
Rendering Domain
"""
from dataclasses import dataclass

from django.db import models


class RecordStyle(models.TextChoices):
    TABLE_LABELS = 'table', 'HTML table labels'
    PLAIN_NODES = 'plain', 'Plain box nodes'


class OutputFormat(models.TextChoices):
    DOT = 'dot', 'DOT source'
    PNG = 'png', 'PNG image'
    SVG = 'svg', 'SVG image'


@dataclass(frozen=True)
class RenderOptions:
    title_visible: bool = True
    record_style: RecordStyle = RecordStyle.TABLE_LABELS

    def __post_init__(self):
        # accepts the raw choice value too
        object.__setattr__(self, 'record_style', RecordStyle(self.record_style))
