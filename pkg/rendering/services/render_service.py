"""
Render Service - DOT emission and optional external rasterization
"""
import html
import logging
import shutil
import subprocess
from typing import Optional

from django.conf import settings
from graphviz import Digraph, escape

from ermodel.domain import Entity, ERModel, Relationship, relationship_kind
from ermodel.exceptions import InvalidModel
from ermodel.services.model_service import ModelService
from rendering.domain import OutputFormat, RecordStyle, RenderOptions
from rendering.exceptions import RendererFailed, RendererUnavailable

logger = logging.getLogger(__name__)

FONT = 'Helvetica'


def nary_node_id(k: int) -> str:
    # entity names never contain whitespace, so these ids cannot collide
    return f"relationship {k}"


def free_text(text: Optional[str]) -> Optional[str]:
    """Titles and relationship labels are arbitrary text: never HTML, backslashes literal"""
    return escape(text) if text else text


class RenderService:
    """Service for diagram output"""

    @staticmethod
    def emit_dot(model: ERModel, options: Optional[RenderOptions] = None) -> str:
        """
        DOT document for a valid model

        One node per entity, one edge per binary relationship with the two
        marks as tail/head labels, and a diamond node per n-ary relationship
        with one edge per endpoint.

        Raises:
            InvalidModel: validate_model reports errors
        """
        options = options or RenderOptions()
        errors = ModelService.validate_model(model)
        if errors:
            raise InvalidModel.from_errors(errors)

        graph_attr = {'rankdir': 'LR'}
        if options.title_visible and model.title:
            graph_attr.update(label=free_text(model.title), labelloc='t')
        if options.record_style == RecordStyle.TABLE_LABELS:
            node_attr = {'shape': 'plaintext', 'fontname': FONT, 'margin': '0'}
        else:
            node_attr = {'shape': 'box', 'fontname': FONT}

        dot = Digraph('ER', graph_attr=graph_attr, node_attr=node_attr, edge_attr={'fontname': FONT})

        for entity in model.entities:
            if options.record_style == RecordStyle.TABLE_LABELS:
                dot.node(entity.name, label=RenderService.table_label(entity))
            else:
                dot.node(entity.name, label=RenderService.plain_label(entity))

        for k, relationship in enumerate(model.relationships):
            RenderService._emit_relationship(dot, model, k, relationship)

        logger.debug(f"Emitted DOT for {len(model.entities)} entities, {len(model.relationships)} relationships")
        return dot.source

    @staticmethod
    def _emit_relationship(dot: Digraph, model: ERModel, k: int, relationship: Relationship) -> None:
        names = ModelService.resolved_endpoints(model, relationship)
        tooltip = relationship_kind(relationship).value

        if relationship.is_binary:
            left, right = relationship.endpoints
            dot.edge(
                names[0], names[1], label=free_text(relationship.label),
                taillabel=left.cardinality.value, headlabel=right.cardinality.value,
                arrowhead='none', tooltip=tooltip,
            )
            return

        hub = nary_node_id(k)
        dot.node(hub, label=free_text(relationship.label) or '', shape='diamond', tooltip=tooltip)
        for name, endpoint in zip(names, relationship.endpoints):
            dot.edge(hub, name, headlabel=endpoint.cardinality.value, arrowhead='none', tooltip=tooltip)

    @staticmethod
    def table_label(entity: Entity) -> str:
        """HTML-like label: entity name header, one row per attribute, primary keys underlined"""
        rows = [f'<TR><TD BGCOLOR="lightgrey"><B>{html.escape(entity.name)}</B></TD></TR>']
        if entity.parent:
            rows.append(f'<TR><TD><I>is a {html.escape(entity.parent)}</I></TD></TR>')
        for attribute in entity.attributes:
            text = html.escape(attribute.name)
            if attribute.is_primary_key:
                text = f"<U>{text}</U>"
            if attribute.declared_type:
                text += f" : {html.escape(attribute.declared_type)}"
            if attribute.is_foreign_key:
                text += " (FK)"
            rows.append(f'<TR><TD ALIGN="LEFT">{text}</TD></TR>')
        return f'<<TABLE BORDER="0" CELLBORDER="1" CELLSPACING="0" CELLPADDING="4">{"".join(rows)}</TABLE>>'

    @staticmethod
    def plain_label(entity: Entity) -> str:
        lines = [entity.name]
        if entity.parent:
            lines.append(f"is a {entity.parent}")
        for attribute in entity.attributes:
            prefix = 'PK ' if attribute.is_primary_key else ''
            suffix = ' (FK)' if attribute.is_foreign_key else ''
            lines.append(f"{prefix}{attribute.name}{suffix}")
        # DOT escape for a line break inside a quoted label
        return '\\n'.join(line.replace('\\', '\\\\').replace('"', '\\"') for line in lines)

    # ========================================================================
    # EXTERNAL RENDERER
    # ========================================================================

    @staticmethod
    def render_external(dot_source: str, output_format: str, renderer_path: Optional[str] = None,
                        timeout: Optional[int] = None) -> bytes:
        """
        Run the external renderer with -T<format> over DOT text

        Raises:
            RendererUnavailable: executable not found or not runnable
            RendererFailed: non-zero exit or timeout, diagnostics preserved
        """
        fmt = OutputFormat(output_format)
        if fmt == OutputFormat.DOT:
            return dot_source.encode('utf-8')

        renderer_path = renderer_path or settings.ER_RENDERER_PATH
        timeout = timeout or settings.ER_RENDER_TIMEOUT_SECONDS
        executable = shutil.which(renderer_path)
        if executable is None:
            raise RendererUnavailable(renderer_path)

        try:
            completed = subprocess.run(
                [executable, f"-T{fmt.value}"],
                input=dot_source.encode('utf-8'),
                capture_output=True,
                timeout=timeout,
            )
        except OSError as e:
            raise RendererUnavailable(renderer_path) from e
        except subprocess.TimeoutExpired as e:
            raise RendererFailed(None, f"timed out after {timeout}s") from e

        if completed.returncode != 0:
            diagnostics = completed.stderr.decode('utf-8', errors='replace')
            logger.error(f"Renderer {renderer_path} exited with {completed.returncode}: {diagnostics.strip()}")
            raise RendererFailed(completed.returncode, diagnostics)

        logger.info(f"Rendered {fmt.value} ({len(completed.stdout)} bytes)")
        return completed.stdout
