"""OpenMP-style mapping from annotated mini-IR programs to the graph.

The supported constructs fall into the three semantic groups the graph was
designed around:

* declarations of independence: parallel_for (with taskloop/sections/simd/
  workshare normalized to it at parse time), task with optional depend
  clauses, and the constraining barrier/nowait pair;
* data properties: private/threadprivate (privatizable variables),
  reduction (reducible variables with their merge function), firstprivate/
  lastprivate (data selectors on entry and live-out edges);
* ordering: critical and atomic (undirected self-edges, plus the atomic
  trait), ordered (directed iteration-order self-edges), single (the
  singular trait in its innermost parallel context).
"""

from __future__ import annotations

from .frontend_common import (
    GraphBuilder,
    apply_data_clause,
    apply_selectors,
    apply_spawn_shapes,
    apply_sync_region,
    apply_task_independence,
    apply_worksharing,
    gate_model,
)
from .graph import PsPdg
from .ir import Program, RegionKind
from .pdg import Pdg, build_pdg


def build_pspdg_omp(program: Program, base: Pdg | None = None) -> PsPdg:
    """Map an OpenMP-annotated program to its parallel-semantics graph.

    The frontend only removes or weakens baseline constraints; it never
    invents an ordering the sequential interpretation does not have.
    """
    gate_model(program, "openmp")
    if base is None:
        base = build_pdg(program)
    builder = GraphBuilder(program, base, "openmp")
    root = builder.build_tree()
    builder.convert_base_edges()
    for fn in program.functions:
        # data clauses first: their removals are licensed (and restorable),
        # plain worksharing removals are not
        for region in fn.regions():
            for clause in region.clauses:
                apply_data_clause(builder, region, clause)
        for region in fn.regions():
            apply_sync_region(builder, region)
        for region in fn.regions():
            if region.kind is RegionKind.PARALLEL_FOR:
                apply_worksharing(builder, region)
        apply_task_independence(builder, fn)
        for region in fn.regions():
            apply_selectors(builder, region)
    return builder.finish(root)
