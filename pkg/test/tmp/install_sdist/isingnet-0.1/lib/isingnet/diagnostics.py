"""
Training diagnostics

gradient_projection measures how much each loss term pushes the
parameters toward the converged solution:

    p_L(k) = <grad L(theta_k), d_k> / |d_k|,   d_k = theta_k - theta*

landscape_slice evaluates a loss on a 2D plane through the parameters,
spanned by two random filter-normalized directions.

"""

import numpy as np

from rasmus import util
from rasmus.tablelib import Table

from isingnet import autodiff
from isingnet import linalg
from isingnet import losses
from isingnet.losses import LossBatch


# displacement norms below this count as "at theta*"
MIN_DISPLACEMENT = 1e-12

PROJECTION_COLUMNS = ["epoch", "term", "value", "flagged"]
LANDSCAPE_COLUMNS = ["a", "b", "value"]


class DiagnosticsError (ValueError):
    pass


#=============================================================================
# gradient projection


class ProjectionTrace (object):
    """Projection value per (snapshot epoch, loss term)"""

    def __init__(self):
        self.rows = []

    def add(self, epoch, term, value, flagged):
        self.rows.append({"epoch": epoch, "term": term, "value": value,
                          "flagged": int(flagged)})

    def get(self, epoch, term):
        for row in self.rows:
            if row["epoch"] == epoch and row["term"] == term:
                return row["value"]
        raise KeyError((epoch, term))

    def terms(self):
        names = []
        for row in self.rows:
            if row["term"] not in names:
                names.append(row["term"])
        return names

    def table(self):
        return Table(self.rows, headers=PROJECTION_COLUMNS)

    def write(self, filename):
        self.table().write(filename, delim=",")


def project(grad, displacement):
    """Returns (projection, flagged) of grad onto a displacement"""
    size = np.linalg.norm(displacement)
    if size < MIN_DISPLACEMENT:
        return 0.0, True
    return float(np.dot(grad, displacement) / size), False


def gradient_projection(snapshots, theta_star, loss_terms, data):
    """
    Project each loss gradient onto the displacement from theta*

    snapshots  -- sequence of (epoch, flat params)
    theta_star -- flat params of the converged model
    loss_terms -- sequence of (name, grad_fn) where grad_fn(theta, data)
                  returns the flat gradient of that term

    A positive value means a descent step on that term moves toward
    theta*.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    trace = ProjectionTrace()

    for epoch, theta in snapshots:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != theta_star.shape:
            raise DiagnosticsError("snapshot at epoch %s has %d parameters, "
                                   "theta* has %d" %
                                   (epoch, theta.size, theta_star.size))
        displacement = theta - theta_star
        for name, grad_fn in loss_terms:
            value, flagged = project(grad_fn(theta, data), displacement)
            trace.add(epoch, name, value, flagged)

    return trace


class NetworkData (object):
    """Labeled train set and unlabeled pool for network loss terms"""

    def __init__(self, split, pool, direction=linalg.SMALLEST,
                 train_loss=losses.MSE):
        self.split = split
        self.pool = pool
        self.direction = direction
        self.train_loss = train_loss


def _network_batches(theta, dims, data):
    model = autodiff.unflatten(theta, dims)
    tape = autodiff.Tape()
    split = data.split
    d = split.dim
    labeled = LossBatch(split.matrices(),
                        autodiff.forward(model, split.features, tape),
                        split.y, split.b)
    batches = [labeled]
    if len(data.pool):
        batches.append(LossBatch(
            data.pool.reshape(len(data.pool), d, d),
            autodiff.forward(model, data.pool, tape)))
    return labeled, losses.concat_batches(batches)


def network_loss_terms(dims):
    """
    Gradient functions of the Train-Loss, C-Loss and S-Loss of a network

    Each takes (flat params, NetworkData).  The physics-guided terms are
    evaluated on the train set joined with the pool.
    """
    def train_grad(theta, data):
        labeled, pg = _network_batches(theta, dims, data)
        return autodiff.backward(losses.train_loss(labeled, data.train_loss))

    def c_grad(theta, data):
        labeled, pg = _network_batches(theta, dims, data)
        return autodiff.backward(losses.c_loss(pg))

    def s_grad(theta, data):
        labeled, pg = _network_batches(theta, dims, data)
        return autodiff.backward(losses.s_loss(pg, data.direction))

    return [(losses.TRAIN_TERM, train_grad), (losses.C_TERM, c_grad),
            (losses.S_TERM, s_grad)]


def network_objective(dims, data, t, schedules_cs, mode=losses.COPHY):
    """Loss function of flat params: the objective E(t) on full sets"""
    def loss_fn(theta):
        model = autodiff.unflatten(theta, dims)
        tape = autodiff.Tape()
        split = data.split
        d = split.dim
        labeled = LossBatch(split.matrices(),
                            autodiff.forward(model, split.features, tape),
                            split.y, split.b)
        unlabeled = None
        if len(data.pool):
            unlabeled = LossBatch(data.pool.reshape(len(data.pool), d, d),
                                  autodiff.forward(model, data.pool, tape))
        return float(losses.combined_objective(
            t, labeled, unlabeled, schedules_cs, data.direction, mode,
            data.train_loss).value)
    return loss_fn


def parameter_similarity(theta_a, theta_b):
    """Cosine similarity of two flat parameter vectors"""
    return linalg.cosine_similarity(theta_a, theta_b)


#=============================================================================
# loss landscape


def _rescale(direction, reference):
    dnorm = np.linalg.norm(direction)
    if dnorm == 0.0:
        return direction
    return direction * (np.linalg.norm(reference) / dnorm)


def filter_normalize(direction, center, dims=None):
    """
    Rescale a random direction to the scale of 'center'

    With layer dims, every weight row (the incoming weights of one unit)
    is scaled to the norm of the matching row of 'center' and every bias
    vector to the norm of the matching bias.  Without dims the whole
    vector is scaled to the norm of 'center'.
    """
    direction = np.array(direction, dtype=float)
    center = np.asarray(center, dtype=float)
    if direction.shape != center.shape:
        raise DiagnosticsError("direction and center sizes differ")

    if dims is None:
        return _rescale(direction, center)

    if autodiff.count_params(dims) != len(center):
        raise DiagnosticsError("dims %s do not match %d parameters" %
                               (list(dims), len(center)))
    i = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        for row in range(fan_out):
            block = slice(i, i + fan_in)
            direction[block] = _rescale(direction[block], center[block])
            i += fan_in
        block = slice(i, i + fan_out)
        direction[block] = _rescale(direction[block], center[block])
        i += fan_out
    return direction


class LandscapeGrid (object):
    """Loss values over center + a*delta + b*eta"""

    def __init__(self, center, delta, eta, coords, values):
        self.center = center
        self.delta = delta
        self.eta = eta
        self.coords = coords
        self.values = values

    @property
    def center_value(self):
        mid = len(self.coords) // 2
        return self.values[mid, mid]

    def missing(self):
        return int(np.count_nonzero(np.isnan(self.values)))

    def table(self):
        table = Table(headers=LANDSCAPE_COLUMNS)
        for i, a in enumerate(self.coords):
            for j, b in enumerate(self.coords):
                table.add(a=float(a), b=float(b),
                          value=float(self.values[i, j]))
        return table

    def write(self, filename):
        self.table().write(filename, delim=",")


def landscape_slice(center, loss_fn, grid_range, grid_size, seed,
                    dims=None):
    """
    Evaluate loss_fn on a grid_size x grid_size plane around 'center'

    Coordinates run from -grid_range to grid_range; grid_size must be
    odd so that the center is a grid point.  Points where loss_fn raises
    are recorded as nan.
    """
    if int(grid_size) != grid_size or grid_size < 1 or grid_size % 2 == 0:
        raise DiagnosticsError("grid_size must be a positive odd integer")
    if not grid_range >= 0:
        raise DiagnosticsError("grid_range must be >= 0")
    grid_size = int(grid_size)
    center = np.asarray(center, dtype=float)

    rng = np.random.default_rng(seed)
    delta = filter_normalize(rng.standard_normal(len(center)), center, dims)
    eta = filter_normalize(rng.standard_normal(len(center)), center, dims)

    coords = np.linspace(-grid_range, grid_range, grid_size)
    coords[grid_size // 2] = 0.0
    values = np.zeros((grid_size, grid_size))

    util.tic("landscape %dx%d" % (grid_size, grid_size))
    for i, a in enumerate(coords):
        for j, b in enumerate(coords):
            theta = center.copy()
            if a != 0.0:
                theta += a * delta
            if b != 0.0:
                theta += b * eta
            try:
                values[i, j] = loss_fn(theta)
            except Exception as e:
                util.warn("landscape point (%g, %g) failed: %s" % (a, b, e))
                values[i, j] = np.nan
    util.toc()

    return LandscapeGrid(center, delta, eta, coords, values)
