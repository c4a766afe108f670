"""Function-space numerics on the unit ball of C^n: Mobius geometry, Q_p and
Carleson estimators, and the Riemann-Stieltjes operators T_g, L_g, M_g."""

__version__ = "0.1.0"

from .carleson import (BoxSearch, CarlesonReport, MeasureDensity, box_mass, cm_constant,  # noqa: E402
                       lcm_constant, lcm_integral_form, mu_qg, vanishing_profile)
from .errors import (ContractError, DomainError, IntegrationError, PoleError, QpballError,  # noqa: E402
                     ResolutionError)
from .geometry import (CarlesonBox, PseudoHyperbolicBall, cover_box, green_G, green_g, mobius,  # noqa: E402
                       noniso_gauge, pseudo_hyperbolic_dist)
from .holo import (LogKernel, NormalizedSquaredLog, PowerSeries, ShiftedLogKernel,  # noqa: E402
                   function_from_json, hinf_norm_estimate, invariant_gradient, schwarz_pick_check)
from .integrate import integrate, kernel_transform, ray_integral, sample_ball, sample_box, sample_sphere  # noqa: E402
from .operators import (OperatorSpec, boundedness_certificate, compactness_probe, lg_apply,  # noqa: E402
                        mg_apply, tg_apply)
from .qpnorm import QpParams, bloch_norm, qp_box, qp_invariant, qp_radial, tent_norm  # noqa: E402
