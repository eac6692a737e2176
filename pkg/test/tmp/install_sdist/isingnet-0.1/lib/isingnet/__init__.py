#
# isingnet: physics-guided networks for Ising ground states
#

# add pre-bundled dependencies to the python path,
# if they are not available already
try:
    import rasmus
    rasmus  # suppress unused pyflakes warning
except ImportError:
    from . import dep
    dep.load_deps()
    import rasmus


#=============================================================================
# constants

PROGRAM_NAME = "isingnet"
PROGRAM_VERSION_MAJOR = 0
PROGRAM_VERSION_MINOR = 1
PROGRAM_VERSION_RELEASE = 0
PROGRAM_VERSION = (PROGRAM_VERSION_MAJOR,
                   PROGRAM_VERSION_MINOR,
                   PROGRAM_VERSION_RELEASE)

if PROGRAM_VERSION_RELEASE != 0:
    PROGRAM_VERSION_TEXT = "%d.%d.%d" % (PROGRAM_VERSION_MAJOR,
                                         PROGRAM_VERSION_MINOR,
                                         PROGRAM_VERSION_RELEASE)
else:
    PROGRAM_VERSION_TEXT = "%d.%d" % (PROGRAM_VERSION_MAJOR,
                                      PROGRAM_VERSION_MINOR)


# isingnet libs
from isingnet.linalg import cosine_similarity
from isingnet.linalg import eig_symmetric
from isingnet.linalg import ground_state
from isingnet.linalg import ising_hamiltonian

from isingnet.data import generate_dataset
from isingnet.data import load_dataset
from isingnet.data import save_dataset
from isingnet.data import subsample_train

from isingnet.autodiff import MlpModel
from isingnet.autodiff import load_model
from isingnet.autodiff import save_model

from isingnet.schedules import ScheduleSpec
from isingnet.schedules import weight_at

from isingnet.training import TrainingConfig
from isingnet.training import evaluate
from isingnet.training import multi_run
from isingnet.training import train

# suppress unused pyflakes warning
cosine_similarity
eig_symmetric
ground_state
ising_hamiltonian
generate_dataset
load_dataset
save_dataset
subsample_train
MlpModel
load_model
save_model
ScheduleSpec
weight_at
TrainingConfig
evaluate
multi_run
train
