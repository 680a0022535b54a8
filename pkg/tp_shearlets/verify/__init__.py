from .quadrature import QuadratureResult, QuadratureSpec
from .report import VerificationReport
from .lemmas import (
    ABTable,
    check_ab_lemma,
    check_fresnel_lemma,
    check_p_lemma,
    fresnel_fc,
    fresnel_fs,
    fresnel_pair,
    integral_a,
    integral_b,
    p1,
    p2,
    p_plus,
)
from .bounds import (
    DEFAULT_ELLIPSE,
    check_lower_bound,
    check_map_shape,
    check_spatial_decay,
    check_upper_bound,
    far_field_profile,
    far_point,
)
from .suites import SUITES, SuiteOptions, run_suite
