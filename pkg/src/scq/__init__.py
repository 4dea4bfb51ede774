"""Space-time tunable indexes for range counting, nearest-neighbour and
range-sampling queries over conjunctive query results."""
from __future__ import annotations

from .baselines import RangeSIndex, RangeTIndex, ranges_build, ranges_query, ranget_build, ranget_query
from .bench import BenchConfig, BenchReport, build_index, load_index, measure_entries, run_bench, save_index
from .errors import *  # noqa: F401,F403
from .geom import AnnTree, BlockTree, CanonicalSet, RangeTree, ann_build, ann_query, rt_build, rt_canonical, rt_count, rt_sample
from .heavylight import CoveredOutputIndex, HeavyLightIndex, covered_ann, covered_build, covered_count, hl_ann, hl_build, hl_rcq, hl_rsq
from .hier import AttrTree, GhdSpec, HierIndex, build_attr_tree, ghd_materialize, hier_ann, hier_build, hier_rcq, hier_rsq
from .path import PathIndex, path_build, path_rcq
from .relational import (
    Atom,
    DatabaseInstance,
    QueryClass,
    QuerySpec,
    Rect,
    Relation,
    brute_force_rcq,
    brute_force_results,
    classify,
    extend_rect,
    load_csv,
    make_relation,
    semijoin_reduce,
    synth_gen,
)
from .star import QueryStats, StarIndex, prim_build, prim_count, star_build, star_rcq

__version__ = "0.1.0"
