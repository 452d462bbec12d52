"""Monte Carlo and asymptotic tools for heavy-tailed multivariate ruin in renewal risk models."""

from .claim_vectors import (IID, ComonotoneCoupling, GaussianCopula, GaussianRadialCoupling,
                            IndependentCopula, MarginCopulaClaims, PreAsymptoticError,
                            PreAsymptoticWarning, SpectralClaims, SpectralMeasure, check_tai,
                            sample_claims, tail_prob)
from .distributions import (Degenerate, Exponential, Gamma, LogNormal, Normal, Pareto, Uniform,
                            Weibull, estimate_matuszewska, hill_estimator)
from .estimators import (asymptotic_entrance_finite, asymptotic_entrance_global, breiman_check,
                         mc_entrance_prob, mc_ruin_prob, simulate_hits, single_big_jump_check,
                         uniformity_diagnostic)
from .processes import (BrownianDrift, Deterministic, JumpDiffusion, RenewalModel,
                        check_assumption_3_1, check_assumption_4_1, laplace_exponent,
                        renewal_function)
from .rare_sets import (AnyLineNegative, CapitalAllocation, Halfspace, OrSet, SupportSet,
                        TotalNegative, contains, ruin_to_rare, y_a)
from .risk_model import PremiumPlan, RiskModelSpec, RiskStreams, simulate_path
from .stats import EstimateReport

__version__ = "0.1.0"
