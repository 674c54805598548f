"""Feature erasure: produce the graph a weaker abstraction would have built.

Each ablation removes exactly one feature and conservatively restores the
stricter sequential reading wherever the erased feature had licensed a
relaxation:

* HN_UE - hierarchy flattened to instruction leaves; every edge re-anchored
  to the representative (first) leaf of its endpoints; undirected edges
  become directed order edges; contexts disappear with the hierarchy, so
  remaining context references widen to all scopes.
* NT   - traits dropped.
* CTX  - context labels dropped; every context-qualified semantic widens to
  all enclosing scopes, i.e. a dependence asserted for one loop is assumed
  carried by every loop enclosing both endpoints.
* DSDE - data selectors dropped; edges revert to the sequential default
  (the consumer observes the last producer instance).
* PSV  - variables and the use/def relation dropped; the baseline records
  their declarations had licensed for removal are restored, collapsed onto
  the smallest hierarchical node that contains both endpoints.
"""

from __future__ import annotations

from dataclasses import replace

from .graph import (
    ALL_SCOPES,
    Directed,
    Feature,
    HierPayload,
    ORDER,
    PsNode,
    PsPdg,
    Selector,
    Trait,
    Undirected,
)


def ablate(g: PsPdg, feature: Feature) -> PsPdg:
    if feature is Feature.HN_UE:
        return _ablate_hierarchy(g)
    if feature is Feature.NT:
        return _ablate_traits(g)
    if feature is Feature.CTX:
        return _ablate_contexts(g)
    if feature is Feature.DSDE:
        return _ablate_selectors(g)
    return _ablate_variables(g)


def _widen_sel(sel: Selector | None) -> Selector | None:
    return None if sel is None else Selector(sel.kind, ALL_SCOPES)


def _ablate_hierarchy(g: PsPdg) -> PsPdg:
    rep = {node_id: g.representative_leaf(node_id) for node_id in g.nodes}
    leaves = {
        node.id: node
        for node in g.nodes.values()
        if not isinstance(node.payload, HierPayload)
    }

    nodes: dict[int, PsNode] = {}
    for node_id, node in leaves.items():
        nodes[node_id] = replace(node, traits=frozenset(), depth=0)
    # traits survive on the representative leaf, widened to all scopes
    for node in g.nodes.values():
        if not node.traits:
            continue
        target = rep[node.id]
        widened = frozenset(Trait(t.kind, ALL_SCOPES) for t in node.traits)
        nodes[target] = replace(nodes[target], traits=nodes[target].traits | widened)

    directed: set[Directed] = set()
    for edge in g.directed:
        directed.add(
            Directed(
                rep[edge.src],
                rep[edge.dst],
                edge.kind,
                edge.var,
                frozenset(rep[c] for c in edge.carried),
                _widen_sel(edge.psel),
                _widen_sel(edge.csel),
            )
        )
    # undirected edges lose the "order is free" reading: directed, program order
    for uedge in g.undirected:
        a, b = rep[uedge.a], rep[uedge.b]
        if g.nodes[b].sort_key() < g.nodes[a].sort_key():
            a, b = b, a
        carried = (
            frozenset({rep[uedge.context]}) if uedge.context != ALL_SCOPES else frozenset()
        )
        directed.add(Directed(a, b, ORDER, None, carried))

    variables = tuple(
        replace(
            v,
            context=ALL_SCOPES,
            reducer=None if v.reducer is None else rep[v.reducer],
        )
        for v in g.variables
    )
    return PsPdg(
        nodes=nodes,
        root=None,
        contexts=frozenset(),
        directed=frozenset(directed),
        undirected=frozenset(),
        variables=variables,
        accesses=g.accesses,
        program=g.program,
        base=g.base,
        region_node={},
        instr_node=dict(g.instr_node),
        licensed_removed=(),
    )


def _ablate_traits(g: PsPdg) -> PsPdg:
    nodes = {
        node_id: replace(node, traits=frozenset()) for node_id, node in g.nodes.items()
    }
    return replace(g, nodes=nodes)


def _ablate_contexts(g: PsPdg) -> PsPdg:
    nodes = {
        node_id: replace(
            node,
            traits=frozenset(Trait(t.kind, ALL_SCOPES) for t in node.traits),
        )
        for node_id, node in g.nodes.items()
    }
    out = replace(g, nodes=nodes, contexts=frozenset())

    directed: set[Directed] = set()
    for edge in g.directed:
        widened = replace(edge, psel=_widen_sel(edge.psel), csel=_widen_sel(edge.csel))
        if not edge.carried:
            directed.add(widened)
            continue
        if edge.src == edge.dst:
            common = set(out.enclosing_loop_nodes(edge.src))
        else:
            common = set(out.enclosing_loop_nodes(edge.src))
            common &= set(out.enclosing_loop_nodes(edge.dst))
        if not common:
            directed.add(widened)
            continue
        # one record per enclosing loop: without its context the dependence
        # must be assumed carried at every level
        for loop in common:
            directed.add(replace(widened, carried=frozenset({loop})))
    undirected = frozenset(
        Undirected(e.a, e.b, ALL_SCOPES) for e in g.undirected
    )
    variables = tuple(replace(v, context=ALL_SCOPES) for v in g.variables)
    return replace(
        out,
        directed=frozenset(directed),
        undirected=undirected,
        variables=variables,
    )


def _ablate_selectors(g: PsPdg) -> PsPdg:
    directed = frozenset(replace(e, psel=None, csel=None) for e in g.directed)
    return replace(g, directed=directed)


def _ablate_variables(g: PsPdg) -> PsPdg:
    parents = g.parent_map()

    def hier_chain(node_id: int) -> list[int]:
        chain = [node_id] if isinstance(g.nodes[node_id].payload, HierPayload) else []
        cur = node_id
        while cur in parents:
            cur = parents[cur]
            chain.append(cur)
        return chain

    directed = set(g.directed)
    for removed in g.licensed_removed:
        chain_src = hier_chain(removed.src)
        chain_dst = hier_chain(removed.dst)
        common = next((n for n in chain_src if n in chain_dst), None)
        if common is not None and common != removed.carried and common != g.root:
            directed.add(
                Directed(common, common, ORDER, None, frozenset({removed.carried}))
            )
        else:
            directed.add(
                Directed(
                    removed.src,
                    removed.dst,
                    removed.kind,
                    removed.var,
                    frozenset({removed.carried}),
                )
            )
    return replace(
        g,
        directed=frozenset(directed),
        variables=(),
        accesses=(),
        licensed_removed=(),
    )
