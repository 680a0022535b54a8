from .primitives import (
    GridLike,
    InvalidIndexError,
    InvalidParameterError,
    Paths,
    ResourceError,
    Serializable,
    ShearletError,
    UndefinedAngleError,
    UsageError,
)
from .window1d import WindowFunction1D, eval_gtilde, make_exp_window, mollifier_r
from .system import (
    Orientation,
    PatternGrid,
    ShearletIndex,
    SparseSymbol,
    cone_contains,
    discrete_angle,
    eval_shearlet_spatial,
    eval_symbol,
    pattern,
    sample_symbol,
    shear_matrix,
    shearlet_on_grid,
)
from .symbols import (
    DyadicPartition,
    EllipseRegion,
    FourierProvider,
    FourierTable,
    LinearCombination,
    RotatedEllipse,
    bessel_j1,
    boundary_points,
    boundary_representatives,
    disc_ft,
    dyadic_squares,
    ellipse_ft,
    fourier_coefficient,
)
from .coeffs import CoefficientMap, EdgeMap, coeff_batch, coeff_direct, coeff_map, edge_map, translates
from .main import BatchMapper, RunConfig, SymbolCache
from .__version__ import __version__
