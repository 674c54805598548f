"""Canonical labeling, structural equality and diffing of graphs.

Every node is anchored to the program position of its earliest contained
instruction, so a deterministic total order exists and graph equality
reduces to byte equality of the rendered canonical form.  Node ids and
context ids never appear in the output; only canonical indices do, which
makes the form invariant under relabeling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .graph import ALL_SCOPES, HierPayload, InstrPayload, PsPdg, Selector


@dataclass(frozen=True)
class CanonicalForm:
    text: str
    index: dict[int, int] = field(compare=False, hash=False, default_factory=dict)

    def __str__(self) -> str:
        return self.text


def _ctx_repr(ctx: int, index: dict[int, int]) -> str:
    if ctx == ALL_SCOPES:
        return "*"
    return str(index.get(ctx, "?"))


def _sel_repr(sel: Selector | None, index: dict[int, int]) -> str:
    if sel is None:
        return "-"
    return f"{sel.kind}@{_ctx_repr(sel.context, index)}"


def canonicalize(g: PsPdg) -> CanonicalForm:
    order = sorted(g.nodes.values(), key=lambda n: n.sort_key())
    index = {node.id: i for i, node in enumerate(order)}

    lines = ["pspdg 1"]
    for i, node in enumerate(order):
        payload = node.payload
        if isinstance(payload, InstrPayload):
            head = f"node {i} leaf pos={payload.pos} {payload.text}"
        elif isinstance(payload, HierPayload):
            children = ",".join(str(index[c]) for c in sorted(payload.children, key=lambda c: index[c]))
            label = " context" if node.id in g.contexts else ""
            head = f"node {i} hier children=[{children}]{label}"
        else:
            head = f"node {i} synthetic {payload.tag}"
        lines.append(head)
        for trait in sorted(node.traits, key=lambda t: (t.kind, _ctx_repr(t.context, index))):
            lines.append(f"trait {i} {trait.kind} ctx={_ctx_repr(trait.context, index)}")

    edge_lines = []
    for edge in g.directed:
        carried = ",".join(str(k) for k in sorted(index[c] for c in edge.carried))
        edge_lines.append(
            f"edge {index[edge.src]} -> {index[edge.dst]} kind={edge.kind} "
            f"var={edge.var or '-'} carried=[{carried}] "
            f"psel={_sel_repr(edge.psel, index)} csel={_sel_repr(edge.csel, index)}"
        )
    lines.extend(sorted(edge_lines))

    uedge_lines = []
    for edge in g.undirected:
        a, b = sorted((index[edge.a], index[edge.b]))
        uedge_lines.append(f"uedge {a} -- {b} ctx={_ctx_repr(edge.context, index)}")
    lines.extend(sorted(uedge_lines))

    var_lines = []
    for var in g.variables:
        reducer = "-" if var.reducer is None else str(index[var.reducer])
        identity = "-" if var.identity is None else str(var.identity)
        var_lines.append(
            f"var {var.name} {var.kind} ctx={_ctx_repr(var.context, index)} "
            f"reducer={reducer} identity={identity}"
        )
    lines.extend(sorted(var_lines))

    access_lines = []
    for access in g.accesses:
        uses = ",".join(str(k) for k in sorted(index[n] for n in access.uses))
        defs = ",".join(str(k) for k in sorted(index[n] for n in access.defs))
        access_lines.append(f"access {access.variable} uses=[{uses}] defs=[{defs}]")
    lines.extend(sorted(access_lines))

    return CanonicalForm(text="\n".join(lines) + "\n", index=index)


def equal(a: PsPdg, b: PsPdg) -> bool:
    return canonicalize(a).text == canonicalize(b).text


_CATEGORIES = ("node", "trait", "edge", "uedge", "var", "access")


@dataclass
class StructuredDiff:
    added: dict[str, list[str]]
    removed: dict[str, list[str]]

    @property
    def empty(self) -> bool:
        return not any(self.added.values()) and not any(self.removed.values())

    def entries(self) -> list[tuple[str, str, str]]:
        out = []
        for category in _CATEGORIES:
            for line in self.removed[category]:
                out.append(("-", category, line))
            for line in self.added[category]:
                out.append(("+", category, line))
        return out

    def render(self) -> str:
        if self.empty:
            return "graphs are canonically equal\n"
        return "\n".join(f"{sign} {line}" for sign, _, line in self.entries()) + "\n"


def diff(a: PsPdg, b: PsPdg) -> StructuredDiff:
    """Added/removed canonical lines from a to b, grouped by category."""
    lines_a = canonicalize(a).text.splitlines()[1:]
    lines_b = canonicalize(b).text.splitlines()[1:]
    set_a, set_b = set(lines_a), set(lines_b)
    added: dict[str, list[str]] = {c: [] for c in _CATEGORIES}
    removed: dict[str, list[str]] = {c: [] for c in _CATEGORIES}
    for line in lines_b:
        if line not in set_a:
            added[line.split(" ", 1)[0]].append(line)
    for line in lines_a:
        if line not in set_b:
            removed[line.split(" ", 1)[0]].append(line)
    return StructuredDiff(added=added, removed=removed)
