"""
Loss terms for eigenpair prediction

  train_mse      mean_i |y_hat - y|^2 + (b_hat - b)^2
  l1_train_loss  sum_i sum_j (|y_hat_j - y_j| + |b_hat - b|) + |y_hat| - |y|
  c_loss         mean_i |A y_hat - b_hat y_hat|^2 / (y_hat . y_hat)
  s_loss         mean_i exp(b_hat)   (exp(-b_hat) for the largest eigenpair)

c_loss and s_loss need no labels and are evaluated on the labeled batch
together with a batch drawn from the unlabeled pool.

"""

import numpy as np

from isingnet import autodiff
from isingnet import schedules
from isingnet.linalg import SMALLEST, LARGEST, DIRECTIONS


# degenerate prediction threshold for |y_hat|^2
MIN_SQNORM = 1e-12

MSE = "mse"
L1 = "l1"
TRAIN_LOSSES = (MSE, L1)

# training modes
COPHY = "cophy"
BLACK_BOX = "black_box"
PGNN_ANALOGUE = "pgnn_analogue"
PINN_ANALOGUE = "pinn_analogue"
MTL_PGNN = "mtl_pgnn"
ONLY_DTR = "only_dtr"
WO_SLOSS = "wo_sloss"
LABEL_FREE = "label_free"

MODES = (COPHY, BLACK_BOX, PGNN_ANALOGUE, PINN_ANALOGUE, MTL_PGNN,
         ONLY_DTR, WO_SLOSS, LABEL_FREE)
LABEL_FREE_MODES = (PINN_ANALOGUE, LABEL_FREE)

# terms picked from by mtl_pgnn
TRAIN_TERM = "train"
C_TERM = "c"
S_TERM = "s"
TERMS = (TRAIN_TERM, C_TERM, S_TERM)


class LossError (ValueError):
    pass


class DegeneratePredictionError (LossError):
    pass


class LossBatch (object):
    """
    Matrices, predictions and optional labels of one batch

    matrices -- (B, d, d) array
    pred     -- autodiff.Prediction with nodes y_hat (B, d), b_hat (B,)
    y, b     -- label arrays (B, d) and (B,), or None
    """

    def __init__(self, matrices, pred, y=None, b=None):
        self.matrices = np.asarray(matrices, dtype=float)
        self.pred = pred
        self.y = y
        self.b = b

        size = len(self.matrices)
        if pred.y_hat.shape[0] != size or pred.b_hat.shape[0] != size:
            raise LossError("predictions and matrices are not aligned")
        if (y is None) != (b is None):
            raise LossError("labels must include both y and b")
        if y is not None and (len(y) != size or len(b) != size):
            raise LossError("labels and matrices are not aligned")

    def __len__(self):
        return len(self.matrices)

    @property
    def labeled(self):
        return self.y is not None


def concat_batches(batches):
    """Join batches for the label-free terms; labels are dropped"""
    batches = [x for x in batches if x is not None and len(x) > 0]
    if not batches:
        raise LossError("no samples for the physics-guided terms")
    if len(batches) == 1:
        batch = batches[0]
        return LossBatch(batch.matrices, batch.pred)
    pred = autodiff.Prediction(
        autodiff.concat([x.pred.y_hat for x in batches]),
        autodiff.concat([x.pred.b_hat for x in batches]))
    return LossBatch(np.concatenate([x.matrices for x in batches]), pred)


def _check_labels(batch):
    if not batch.labeled:
        raise LossError("this loss needs labels")
    if len(batch) == 0:
        raise LossError("empty batch")


def _check_direction(direction):
    if direction not in DIRECTIONS:
        raise LossError("unknown spectrum direction '%s'" % direction)


#=============================================================================
# loss terms


def train_mse(batch):
    _check_labels(batch)
    tape = batch.pred.y_hat.tape
    vec_err = autodiff.square(batch.pred.y_hat - tape.constant(batch.y))
    val_err = autodiff.square(batch.pred.b_hat - tape.constant(batch.b))
    return autodiff.mean(vec_err.sum(axis=1) + val_err)


def l1_train_loss(batch):
    """Summed (not averaged) L1 error with a norm-difference term"""
    _check_labels(batch)
    tape = batch.pred.y_hat.tape
    y_hat = batch.pred.y_hat
    d = y_hat.shape[1]
    vec_err = autodiff.abs_(y_hat - tape.constant(batch.y)).sum(axis=1)
    val_err = autodiff.abs_(batch.pred.b_hat - tape.constant(batch.b))
    norm_diff = autodiff.norm(y_hat) - tape.constant(
        np.linalg.norm(batch.y, axis=1))
    return (vec_err + val_err * float(d) + norm_diff).sum()


def c_loss(batch):
    """Eigen-residual normalized by |y_hat|^2; invariant to its scale"""
    if len(batch) == 0:
        raise LossError("empty batch")
    y_hat = batch.pred.y_hat
    b_hat = batch.pred.b_hat
    tape = y_hat.tape

    sqnorm = autodiff.square(y_hat).sum(axis=1)
    if np.min(sqnorm.value) < MIN_SQNORM:
        raise DegeneratePredictionError(
            "predicted eigenvector norm^2 %e below %e" %
            (np.min(sqnorm.value), MIN_SQNORM))

    av = autodiff.batched_matvec(tape.constant(batch.matrices), y_hat)
    resid = av - b_hat.reshape(len(batch), 1) * y_hat
    return autodiff.mean(autodiff.square(resid).sum(axis=1) / sqnorm)


def s_loss(batch, direction=SMALLEST):
    _check_direction(direction)
    if len(batch) == 0:
        raise LossError("empty batch")
    b_hat = batch.pred.b_hat
    if direction == LARGEST:
        b_hat = -b_hat
    return autodiff.mean(autodiff.exp(b_hat))


def train_loss(batch, kind=MSE):
    if kind == MSE:
        return train_mse(batch)
    elif kind == L1:
        return l1_train_loss(batch)
    raise LossError("unknown train loss '%s'" % kind)


#=============================================================================
# overall objective


def mode_weights(mode, t, schedule_c, schedule_s, term=None):
    """
    Returns (train weight, lambda_c, lambda_s) of 'mode' at epoch t

    For mtl_pgnn, 'term' selects the single active term of a minibatch;
    without it all three terms are active.
    """
    if mode not in MODES:
        raise LossError("unknown mode '%s'" % mode)

    w_train = 0.0 if mode in LABEL_FREE_MODES else 1.0
    lam_c = schedules.weight_at(schedule_c, t)
    lam_s = schedules.weight_at(schedule_s, t)

    if mode == BLACK_BOX:
        lam_c = lam_s = 0.0
    elif mode == WO_SLOSS:
        lam_s = 0.0
    elif mode == MTL_PGNN and term is not None:
        if term not in TERMS:
            raise LossError("unknown loss term '%s'" % term)
        if term != TRAIN_TERM:
            w_train = 0.0
        if term != C_TERM:
            lam_c = 0.0
        if term != S_TERM:
            lam_s = 0.0

    return w_train, lam_c, lam_s


def combined_objective(t, batch_labeled, batch_unlabeled, schedules_cs,
                       direction=SMALLEST, mode=COPHY, kind=MSE, term=None):
    """
    E(t) = Train-Loss + lambda_c(t) C-Loss + lambda_s(t) S-Loss

    Train-Loss uses the labeled batch only; the physics-guided terms use
    the labeled batch joined with 'batch_unlabeled' (which may be None).
    Terms with zero weight are not evaluated.

    schedules_cs -- (lambda_c schedule, lambda_s schedule)
    """
    _check_direction(direction)
    schedule_c, schedule_s = schedules_cs
    w_train, lam_c, lam_s = mode_weights(mode, t, schedule_c, schedule_s,
                                         term)

    total = None
    if w_train:
        total = train_loss(batch_labeled, kind)

    if lam_c or lam_s:
        pg = concat_batches([batch_labeled, batch_unlabeled])
        if lam_c:
            term_c = c_loss(pg) * lam_c
            total = term_c if total is None else total + term_c
        if lam_s:
            term_s = s_loss(pg, direction) * lam_s
            total = term_s if total is None else total + term_s

    if total is None:
        total = batch_labeled.pred.b_hat.tape.constant(0.0)
    return total
