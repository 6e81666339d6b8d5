"""Community-derived covariates: tie weights, joint membership and bridge indicators."""
from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from mlconflict import DataError
from mlconflict.extraction import node_roles
from mlconflict.graphs import CommunitySet, project_communities
from mlconflict.tergm.panel import PanelSeries


def community_covariates(cs: CommunitySet, vertices) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(tie weight, joint-member indicator, bridge indicator) on the given vertex order."""
    vertices = tuple(vertices)
    idx = {v: i for i, v in enumerate(vertices)}
    outside = cs.members() - set(idx)
    if outside:
        raise DataError(f"year {cs.year}: community members not in the panel: {sorted(outside)[:5]}")
    n = len(vertices)
    tie = project_communities(cs, vertices).weights.astype(float)
    roles = node_roles(cs)
    joint = np.zeros((n, n))
    bridge = np.zeros(n)
    for v, role in roles.items():
        i = idx[v]
        if role.is_bridge:
            bridge[i] = 1.0
        else:
            for u in role.partners:
                joint[i, idx[u]] = 1.0
    return tie, joint, bridge


def derive_covariates(
    communities: Mapping[int, CommunitySet],
    base: PanelSeries,
    prefix: str = "comm",
) -> PanelSeries:
    """Add ``<prefix>_tie``, ``<prefix>_joint`` (dyadic) and ``<prefix>_bridge`` (nodal) covariates.

    Panel years without a community set get all-zero covariates. The bridge
    term's dyad value is the number of bridge endpoints (0, 1 or 2).
    """
    extra = set(communities) - set(base.years)
    if extra:
        raise DataError(f"community years not in the panel: {sorted(extra)}")
    out = {}
    for year in base.years:
        yd = base[year]
        cs = communities.get(year, CommunitySet(year, ()))
        tie, joint, bridge = community_covariates(cs, yd.vertices)
        out[year] = yd.with_covariates(
            dyadic={f"{prefix}_tie": tie, f"{prefix}_joint": joint},
            nodal={f"{prefix}_bridge": bridge},
        )
    return PanelSeries(out)
