"""Recover images from black-box operators using forward evaluations only."""

from .image import (
    PSNR_CAP_DB,
    ImageReadError,
    NoiseSpec,
    UnsupportedImageError,
    add_noise,
    as_image,
    load_image,
    mse,
    psnr,
    save_image,
)
from .lipschitz import (
    LipschitzEstimate,
    ProbeConfig,
    check_null_preservation,
    directional_derivative,
    estimate_lipschitz,
    radial_derivative,
)
from .operators import (
    BlackBoxOperator,
    CompositeOperator,
    OperatorSpec,
    SpecParseError,
    as_operator,
    build_operator,
    compose,
    identity,
    parse_spec,
)
from .solver import (
    DenseLinearOperator,
    RenditionError,
    RenditionResult,
    SolverConfig,
    closed_form_linear_iterate,
    derive_mu,
    max_stable_step,
    noise_amplification_bound,
    relative_residual,
    render,
    render_exact,
    render_red,
    rendition_loss,
    solve,
    suggested_iterations,
)
from .testimage import procedural_image

__version__ = "0.1.0"
