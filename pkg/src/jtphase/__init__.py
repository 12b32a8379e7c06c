"""Mean phase of multi-component wavefunctions and its application to the
linear E x e dynamic Jahn-Teller ground doublet."""

from .functionals import (
    ComplexField1D,
    PhaseBreakdown,
    PolarForm,
    Trajectory,
    continuity_residual,
    delta_k,
    delta_k_split,
    entropy_se,
    hj_residual,
    integrated_phase,
    mean_phase_direct,
    phase_rate_form_a,
    phase_rate_form_b,
    polar_decompose,
    roi_identity_residual,
)
from .jahnteller import (
    JTParams,
    SpinorRadialField,
    SweepResult,
    build_doublet,
    cycle_trajectory,
    delta_k_jt,
    guessed_operator,
    mean_phase_closed_form,
    mean_phase_quadrature,
    sweep_phase,
)
from .numerics import Grid1D, MassParam, RadialGrid, erf_stable, integrate_radial, mat2_exp_hermitian

__version__ = "0.1.0"
