"""Learning stable linear dynamic systems with over-parameterized linear
RNNs trained by SGD, plus Monte-Carlo verification of the random-matrix,
linearization, and truncation bounds behind the analysis."""

__version__ = "0.1.0"

from .existence import (ComparatorParams, ConditioningError, GramInverses,
                        construct_comparator, gram_inverses, verify_existence)
from .gradients import (GradientPair, finite_difference_check, jvp_f_wrt_A,
                        jvp_f_wrt_W, loss_gradients_bptt)
from .harness import generalization_gap, run_experiment
from .linalg import (DimensionError, fit_loglog_slope, frob,
                     matrix_power_opnorm, operator_norm, spectral_radius)
from .losses import LossFunction, eval_loss, make_loss, sequence_loss
from .schedule import ScheduleError, TheorySchedule, theory_schedule
from .student import (RescaledView, StudentRNN, forward, forward_rescaled,
                      init_student, linearized_forward, load_checkpoint,
                      rescaled_view, save_checkpoint, truncated_forward)
from .teacher import (ParameterError, SequenceDataset, StableLinearSystem,
                      generate_dataset, load_dataset, random_stable_system,
                      save_dataset, simulate, stability_certificate)
from .trainer import TrainTrace, averaged_loss, running_average, sgd_train
from .verify import (LemmaReport, run_lemma, verify_concentration,
                     verify_linearization, verify_spectral, verify_tail,
                     verify_truncation)
