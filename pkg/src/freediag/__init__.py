"""Free additive convolution over a commutative algebra and detection of
invariant projections through boundary values of subordination functions."""
from .algebra import (AlgebraDescriptor, AlgebraElement, im, in_upper_half_plane, invert,
                      is_nonnegative, re, sqrt_positive, sup_norm, trace)
from .kernels import BACKEND
from .models import (DiagonalElement, ScalarAtomic, ScalarSemicircle, SemicircularProfile,
                     cauchy, congruence_shift, dyson_solve, load_model, norm_bound)
from .models import h_transform
from .subordination import (grid_convolve, solve_subordination,
                            verify_pick_estimate)

__version__ = "0.1.0"
