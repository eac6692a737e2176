"""
Reverse-mode automatic differentiation over numpy arrays

A Tape records every Node created on it in evaluation order, so
the backward pass is a single reverse walk.  Only the primitives needed
by the eigenpair losses are provided.

Also holds the MLP model, its checkpoint format and the Adamax optimizer.

"""

import numpy as np

from isingnet import fileio


CHECKPOINT_KIND = "checkpoint"

# exp arguments above this are clamped
EXP_CLAMP = 700.0


class AutodiffError (ValueError):
    pass


class NonFiniteGradientError (AutodiffError):
    pass


#=============================================================================
# tape and nodes


def unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to 'shape'"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Node (object):
    """A value on a tape with the rule for pulling gradients back"""

    __array_priority__ = 100

    def __init__(self, tape, value, inputs=(), vjp=None):
        self.tape = tape
        self.value = value
        self.inputs = inputs
        self.vjp = vjp
        self.needs_grad = any(x.needs_grad for x in inputs)
        self.id = len(tape.nodes)
        tape.nodes.append(self)

    @property
    def shape(self):
        return self.value.shape

    def __len__(self):
        return len(self.value)

    def _lift(self, other):
        if isinstance(other, Node):
            return other
        return self.tape.constant(other)

    def __add__(self, other):
        return add(self, self._lift(other))

    def __radd__(self, other):
        return add(self._lift(other), self)

    def __sub__(self, other):
        return sub(self, self._lift(other))

    def __rsub__(self, other):
        return sub(self._lift(other), self)

    def __mul__(self, other):
        return mul(self, self._lift(other))

    def __rmul__(self, other):
        return mul(self._lift(other), self)

    def __truediv__(self, other):
        return div(self, self._lift(other))

    def __rtruediv__(self, other):
        return div(self._lift(other), self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None):
        return sum_(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def reshape(self, *shape):
        return reshape(self, shape)

    def __repr__(self):
        return "Node(%d, shape=%s)" % (self.id, self.value.shape)


class Tape (object):
    """Append-only record of the nodes of one computation"""

    def __init__(self):
        self.nodes = []
        self.params = []
        self.exp_clamps = 0
        self._watched = {}

    def constant(self, value):
        return Node(self, np.asarray(value, dtype=float))

    def variable(self, value):
        node = Node(self, np.asarray(value, dtype=float))
        node.needs_grad = True
        self.params.append(node)
        return node

    def watch(self, model):
        """
        Register the parameters of 'model' as variables

        Returns the list of (weight, bias) nodes.  Watching the same
        model twice returns the same nodes.
        """
        key = id(model)
        if key not in self._watched:
            layers = []
            for w, b in zip(model.weights, model.biases):
                layers.append((self.variable(w), self.variable(b)))
            self._watched[key] = layers
        return self._watched[key]

    def gradients(self, loss):
        """
        Backpropagate from a scalar node

        Returns a dict from node id to gradient array for every node
        reached.
        """
        if not isinstance(loss, Node) or loss.tape is not self:
            raise AutodiffError("loss is not a node of this tape")
        if loss.value.size != 1:
            raise AutodiffError("backward needs a scalar loss, got shape %s" %
                                (loss.value.shape,))

        grads = {loss.id: np.ones_like(loss.value)}
        for node in reversed(self.nodes[:loss.id + 1]):
            if node.vjp is None or not node.needs_grad or \
                    node.id not in grads:
                continue
            # leaves keep their gradient, intermediates are released
            grad = grads.pop(node.id)
            for parent, pgrad in zip(node.inputs, node.vjp(grad)):
                if not parent.needs_grad:
                    continue
                if parent.id in grads:
                    grads[parent.id] = grads[parent.id] + pgrad
                else:
                    grads[parent.id] = pgrad
        return grads


def backward(loss):
    """
    Gradient of a scalar loss with respect to the watched parameters

    The result is a flat vector in flatten_params order.
    """
    tape = loss.tape
    grads = tape.gradients(loss)
    parts = []
    for param in tape.params:
        grad = grads.get(param.id)
        if grad is None:
            grad = np.zeros_like(param.value)
        parts.append(np.ravel(grad))
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


#=============================================================================
# primitives


def add(a, b):
    return Node(a.tape, a.value + b.value, (a, b),
                lambda g: (unbroadcast(g, a.value.shape),
                           unbroadcast(g, b.value.shape)))


def sub(a, b):
    return Node(a.tape, a.value - b.value, (a, b),
                lambda g: (unbroadcast(g, a.value.shape),
                           unbroadcast(-g, b.value.shape)))


def mul(a, b):
    return Node(a.tape, a.value * b.value, (a, b),
                lambda g: (unbroadcast(g * b.value, a.value.shape),
                           unbroadcast(g * a.value, b.value.shape)))


def div(a, b):
    value = a.value / b.value
    return Node(a.tape, value, (a, b),
                lambda g: (unbroadcast(g / b.value, a.value.shape),
                           unbroadcast(-g * value / b.value,
                                       b.value.shape)))


def neg(a):
    return Node(a.tape, -a.value, (a,), lambda g: (-g,))


def square(a):
    return Node(a.tape, a.value * a.value, (a,),
                lambda g: (2.0 * g * a.value,))


def sqrt(a):
    value = np.sqrt(a.value)

    def vjp(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (np.where(value > 0.0, g / (2.0 * value), 0.0),)
    return Node(a.tape, value, (a,), vjp)


def abs_(a):
    return Node(a.tape, np.abs(a.value), (a,),
                lambda g: (g * np.sign(a.value),))


def tanh(a):
    value = np.tanh(a.value)
    return Node(a.tape, value, (a,),
                lambda g: (g * (1.0 - value * value),))


def exp(a, clamp=EXP_CLAMP):
    """exp with arguments above 'clamp' clamped; clamps are counted"""
    over = a.value > clamp
    count = int(np.count_nonzero(over))
    if count:
        a.tape.exp_clamps += count
    value = np.exp(np.minimum(a.value, clamp))
    return Node(a.tape, value, (a,),
                lambda g: (np.where(over, 0.0, g * value),))


def sum_(a, axis=None):
    shape = a.value.shape

    def vjp(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)
    return Node(a.tape, np.asarray(np.sum(a.value, axis=axis)), (a,), vjp)


def mean(a, axis=None):
    count = a.value.size if axis is None else a.value.shape[axis]
    if count == 0:
        raise AutodiffError("mean of an empty array")
    return sum_(a, axis) * (1.0 / count)


def dot(a, b):
    """Inner product along the last axis"""
    return sum_(mul(a, b), axis=-1)


def norm(a):
    """Euclidean norm along the last axis"""
    return sqrt(sum_(square(a), axis=-1))


def reshape(a, shape):
    old = a.value.shape
    return Node(a.tape, a.value.reshape(shape), (a,),
                lambda g: (g.reshape(old),))


def getitem(a, index):
    def vjp(g):
        grad = np.zeros_like(a.value)
        np.add.at(grad, index, g)
        return (grad,)
    return Node(a.tape, a.value[index], (a,), vjp)


def concat(nodes, axis=0):
    nodes = list(nodes)
    if not nodes:
        raise AutodiffError("nothing to concatenate")
    tape = nodes[0].tape
    sizes = [n.value.shape[axis] for n in nodes]
    cuts = np.cumsum(sizes)[:-1]
    return Node(tape, np.concatenate([n.value for n in nodes], axis=axis),
                tuple(nodes),
                lambda g: tuple(np.split(g, cuts, axis=axis)))


def affine(x, w, b):
    """x W^T + b, with W stored (out, in)"""
    return Node(x.tape, x.value.dot(w.value.T) + b.value, (x, w, b),
                lambda g: (g.dot(w.value), g.T.dot(x.value), g.sum(axis=0)))


def batched_matvec(a, x):
    """A_i x_i for a stack of matrices (B, d, d) and vectors (B, d)"""
    return Node(x.tape, np.einsum("bij,bj->bi", a.value, x.value), (a, x),
                lambda g: (np.einsum("bi,bj->bij", g, x.value),
                           np.einsum("bij,bi->bj", a.value, g)))


#=============================================================================
# multilayer perceptron


def default_dims(n, hidden=(100, 100, 100, 100)):
    """Layer widths for an n-spin problem: d*d inputs and d+1 outputs"""
    d = 2 ** n
    return [d * d] + list(hidden) + [d + 1]


def count_params(dims):
    return sum(fan_in * fan_out + fan_out
               for fan_in, fan_out in zip(dims[:-1], dims[1:]))


class MlpModel (object):
    """
    Fully connected tanh network with a linear output layer

    weights[k] has shape (dims[k+1], dims[k]).  The first d outputs are
    the eigenvector, the last one the eigenvalue.
    """

    def __init__(self, dims, weights=None, biases=None):
        self.dims = [int(x) for x in dims]
        if len(self.dims) < 2 or min(self.dims) < 1:
            raise AutodiffError("bad layer dimensions %s" % self.dims)
        if weights is None:
            weights = [np.zeros((o, i))
                       for i, o in zip(self.dims[:-1], self.dims[1:])]
        if biases is None:
            biases = [np.zeros(o) for o in self.dims[1:]]
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]

        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.dims[k+1], self.dims[k])
            if w.shape != shape or b.shape != (self.dims[k+1],):
                raise AutodiffError("layer %d does not match dims %s" %
                                    (k, self.dims))

    @classmethod
    def glorot(cls, dims, seed):
        """Uniform +-sqrt(6/(fan_in+fan_out)) weights and zero biases"""
        rng = np.random.default_rng(seed)
        weights = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, (fan_out, fan_in)))
        return cls(dims, weights)

    @property
    def input_dim(self):
        return self.dims[0]

    @property
    def output_dim(self):
        return self.dims[-1]

    def nparams(self):
        return count_params(self.dims)

    def copy(self):
        return MlpModel(self.dims, self.weights, self.biases)

    def __eq__(self, other):
        if not isinstance(other, MlpModel):
            return NotImplemented
        return (self.dims == other.dims and
                all(np.array_equal(a, b)
                    for a, b in zip(self.weights, other.weights)) and
                all(np.array_equal(a, b)
                    for a, b in zip(self.biases, other.biases)))

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    __hash__ = None


class Prediction (object):
    """Predicted eigenvectors (B, d) and eigenvalues (B,)"""

    def __init__(self, y_hat, b_hat):
        self.y_hat = y_hat
        self.b_hat = b_hat


def forward(model, features, tape):
    """
    Evaluate the network on a batch of flattened matrices

    features is (B, d*d), or a single (d*d,) vector.  Outputs are
    recorded on 'tape' against the watched parameters of 'model'.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features[None, :]
    if features.ndim != 2 or features.shape[1] != model.input_dim:
        raise AutodiffError("features of shape %s do not fit input dim %d" %
                            (features.shape, model.input_dim))

    layers = tape.watch(model)
    h = tape.constant(features)
    for k, (w, b) in enumerate(layers):
        h = affine(h, w, b)
        if k < len(layers) - 1:
            h = tanh(h)

    d = model.output_dim - 1
    return Prediction(h[:, :d], h[:, d])


def predict(model, features):
    """Forward pass without recording; returns (y_hat, b_hat) arrays"""
    pred = forward(model, features, Tape())
    return pred.y_hat.value, pred.b_hat.value


#=============================================================================
# flat parameter vectors


def flatten_params(model):
    """Layer 0 weights (row-major), layer 0 bias, layer 1 weights, ..."""
    parts = []
    for w, b in zip(model.weights, model.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def unflatten(vector, dims):
    """Build a model from a flat parameter vector and layer dims"""
    vector = np.asarray(vector, dtype=float)
    if vector.ndim != 1 or len(vector) != count_params(dims):
        raise AutodiffError("parameter vector of length %d does not fit "
                            "dims %s (%d parameters)" %
                            (vector.size, list(dims), count_params(dims)))
    weights = []
    biases = []
    i = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(vector[i:i + fan_in*fan_out].reshape(fan_out, fan_in))
        i += fan_in * fan_out
        biases.append(vector[i:i + fan_out])
        i += fan_out
    return MlpModel(dims, weights, biases)


def set_params(model, vector):
    """Overwrite the parameters of 'model' in place"""
    other = unflatten(vector, model.dims)
    for k in range(len(model.weights)):
        model.weights[k][...] = other.weights[k]
        model.biases[k][...] = other.biases[k]


#=============================================================================
# optimizer


class AdamaxState (object):
    """First moment, infinity-norm accumulator and step count"""

    def __init__(self, nparams, lr=2e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(nparams)
        self.u = np.zeros(nparams)
        self.t = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adamax_step(model, grads, state):
    """
    One Adamax update of 'model' in place

    m <- b1 m + (1-b1) g
    u <- max(b2 u, |g|)
    theta <- theta - lr / (1 - b1^t) * m / (u + eps)
    """
    grads = np.asarray(grads, dtype=float)
    if grads.shape != state.m.shape:
        raise AutodiffError("gradient length %d does not match %d "
                            "parameters" % (grads.size, state.m.size))
    if not np.all(np.isfinite(grads)):
        raise NonFiniteGradientError("non-finite gradient at step %d" %
                                     (state.t + 1))

    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.u = np.maximum(state.beta2 * state.u, np.abs(grads))
    step = state.lr / (1.0 - state.beta1 ** state.t)
    theta = flatten_params(model) - step * state.m / (state.u + state.eps)
    set_params(model, theta)
    return model, state


#=============================================================================
# checkpoints


def save_model(model, filename):
    fileio.write_container(
        filename, CHECKPOINT_KIND,
        [("dims", fileio.format_ints(model.dims))],
        flatten_params(model))


def load_model(filename):
    header, values = fileio.read_container(filename, CHECKPOINT_KIND)
    dims = fileio.get_field(header, "dims", fileio.parse_ints, filename)
    try:
        return unflatten(values, dims)
    except AutodiffError as e:
        raise fileio.FileFormatError("%s: %s" % (filename, e))
