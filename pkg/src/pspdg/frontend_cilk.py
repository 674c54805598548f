"""Cilk-style mapping: spawn/sync/scope shapes, cilk_for, hyperobjects.

A spawn region becomes a single-entry single-exit hierarchical node whose
inner entry is a synthetic knot with two outgoing strands: one into the
spawned work, one leaving the node toward the continuation.  Every scope
exits through a sync node (synthesized when the source has none), and each
sync receives join edges from all spawn nodes of its scope.  cilk_for is
parsed as parallel_for and mapped with the same worksharing rule as the
OpenMP frontend.  Hyperobject declarations become reducible variables; a
holder is just a reducer whose merge keeps the first copy.
"""

from __future__ import annotations

from .frontend_common import (
    GraphBuilder,
    apply_spawn_shapes,
    apply_worksharing,
    gate_model,
)
from .graph import PsPdg, REDUCIBLE, RemovedDep
from .ir import Program, RegionKind, VarDecl
from .pdg import Pdg, build_pdg, instruction_accesses


def build_pspdg_cilk(program: Program, base: Pdg | None = None) -> PsPdg:
    gate_model(program, "cilk")
    if base is None:
        base = build_pdg(program)
    builder = GraphBuilder(program, base, "cilk")
    root = builder.build_tree()
    builder.convert_base_edges()
    _apply_hyperobjects(builder)
    for fn in program.functions:
        for region in fn.regions():
            if region.kind is RegionKind.PARALLEL_FOR:
                apply_worksharing(builder, region)
        apply_spawn_shapes(builder, fn)
    return builder.finish(root)


def _hyper_decls(program: Program) -> list[VarDecl]:
    decls = [d for d in program.globals if d.hyper is not None]
    for fn in program.functions:
        decls.extend(d for d in fn.local_decls() if d.hyper is not None)
    return decls


def _apply_hyperobjects(builder: GraphBuilder) -> None:
    program = builder.program
    accesses = instruction_accesses(program)
    for decl in _hyper_decls(program):
        reducer_name, identity = decl.hyper or ("", None)
        touching = [
            instr_id
            for instr_id, acc_list in accesses.items()
            if any(a.var == decl.name for a in acc_list)
        ]
        if not touching:
            continue
        # the variable's context: innermost parallel construct around every access
        chains = [builder.region_chain(instr_id) for instr_id in touching]
        common_ids = set.intersection(*({r.rid for r in chain} for chain in chains))
        context_region = next(
            (
                r
                for r in chains[0]
                if r.rid in common_ids
                and r.kind in (RegionKind.SCOPE, RegionKind.PARALLEL_FOR)
            ),
            None,
        )
        if context_region is None:
            continue
        ctx_node = builder.region_node.get(context_region.rid)
        if ctx_node is None:
            continue
        builder.add_variable(
            decl.name,
            REDUCIBLE,
            ctx_node,
            reducer=builder.function_node.get(reducer_name),
            identity=identity,
        )
        if context_region.is_loop():
            for record in builder.records_carried_by(context_region):
                if record.var == decl.name:
                    builder.directed.discard(record)
                    builder.licensed.append(
                        RemovedDep(
                            record.src,
                            record.dst,
                            record.kind,
                            decl.name,
                            builder.region_node[context_region.rid],
                            decl.name,
                        )
                    )
