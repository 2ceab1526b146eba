"""Charts, domains and exact differential-geometric oracles."""

from .charts import (
    CHART_NAMES,
    Chart,
    DegenerateImmersion,
    SpherePatch4,
    ellipsoid_cap_chart,
    ellipsoid_chart,
    get_chart,
    plane_chart,
    torus_chart,
)
from .domains import (
    CapWithHoles,
    ClosedSurface,
    NonConvexVertexWarning,
    PolygonDomain,
    ProductSpace,
    SphericalPolygon,
    SplitPatch,
    TopologyInfo,
    ellipsoid_gauss_curvature,
    ellipsoid_surface,
    normal_cone_mass,
    alpha_over_pi_weight,
    sphere_surface,
    spherical_triangle_area,
    torus_surface,
)
from .forms import (
    area_element,
    chart_area,
    check_immersion,
    first_fundamental_form,
    gauss_curvature,
    gauss_curvature_brioschi,
    gauss_curvature_sff,
)

__all__ = [name for name in dir() if not name.startswith("_")]
