"""Reverse-mode automatic differentiation over a dynamically built tape.

The tape is define-by-run: every operation appends one node holding the
operation kind, parent indices, and the computed value, so parents always
precede children (topological order by construction).  ``backward`` walks
the tape once in reverse and returns exact gradients with respect to the
registered parameter leaves.

Node values are float64 numpy arrays.  A node may hold a scalar (0-d) or
an array of values; arrays represent the same scalar expression evaluated
at many independent data points, which is what makes full-batch training
affordable without any change to the calculus.  Elementwise operations
follow numpy broadcasting; ``backward`` sums gradients over broadcast
axes.  Besides the elementwise op set there are three structural node
kinds used by the network layer: ``affine`` (x @ w + b), ``rowsum`` /
``sumall`` reductions, and ``slice`` (a reshaped window into a flat
parameter vector).

Gradients are exact for the expression as built: finite-difference
stencils of network evaluations (used for physics residuals) appear on
the tape as ordinary nodes, so their parameter gradients are exact for
the stencil approximation.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteValue

#: op kinds accepted by :func:`apply` (elementwise scalar functions).
ELEMENTWISE_BINARY = ("add", "sub", "mul", "div")
ELEMENTWISE_UNARY = ("neg", "exp", "ln", "tanh", "elu", "square", "max0")
OP_KINDS = ELEMENTWISE_BINARY + ELEMENTWISE_UNARY


class Node:
    __slots__ = ("op", "parents", "value", "aux")

    def __init__(self, op, parents, value, aux=None):
        self.op = op
        self.parents = parents
        self.value = value
        self.aux = aux


class Var:
    """Handle to one tape node: the tape plus a node index."""

    __slots__ = ("tape", "index")

    def __init__(self, tape: "Tape", index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    def item(self) -> float:
        return float(self.value)

    # -- operator sugar; constants are lifted to leaves ------------------
    def _coerce(self, other) -> "Var":
        if isinstance(other, Var):
            return other
        return self.tape.leaf(other)

    def __add__(self, other):
        return self.tape.apply("add", self, self._coerce(other))

    def __radd__(self, other):
        return self.tape.apply("add", self._coerce(other), self)

    def __sub__(self, other):
        return self.tape.apply("sub", self, self._coerce(other))

    def __rsub__(self, other):
        return self.tape.apply("sub", self._coerce(other), self)

    def __mul__(self, other):
        return self.tape.apply("mul", self, self._coerce(other))

    def __rmul__(self, other):
        return self.tape.apply("mul", self._coerce(other), self)

    def __truediv__(self, other):
        return self.tape.apply("div", self, self._coerce(other))

    def __rtruediv__(self, other):
        return self.tape.apply("div", self._coerce(other), self)

    def __neg__(self):
        return self.tape.apply("neg", self)


def _as_value(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tape:
    """Single-owner record of one computation; rebuilt every evaluation."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.param_indices: list[int] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def _push(self, node: Node) -> Var:
        self.nodes.append(node)
        return Var(self, len(self.nodes) - 1)

    # -- leaves -----------------------------------------------------------
    def leaf(self, value) -> Var:
        return self._push(Node("leaf", (), _as_value(value)))

    def param(self, value) -> Var:
        """Leaf registered as a parameter: ``backward`` reports its gradient."""
        var = self._push(Node("leaf", (), _as_value(value)))
        self.param_indices.append(var.index)
        return var

    # -- elementwise ops ----------------------------------------------------
    def apply(self, kind: str, *operands: Var) -> Var:
        """Apply one elementwise op; operands broadcast per numpy rules."""
        idx = len(self.nodes)
        if kind in ELEMENTWISE_BINARY:
            a, b = operands
            av, bv = a.value, b.value
            if kind == "add":
                value = av + bv
            elif kind == "sub":
                value = av - bv
            elif kind == "mul":
                value = av * bv
            else:
                if np.any(bv == 0.0):
                    raise NonFiniteValue("division by zero", idx)
                value = av / bv
            return self._push(Node(kind, (a.index, b.index), value))
        if kind in ELEMENTWISE_UNARY:
            (a,) = operands
            av = a.value
            if kind == "neg":
                value = -av
            elif kind == "exp":
                value = np.exp(av)
            elif kind == "ln":
                if np.any(av <= 0.0):
                    raise NonFiniteValue("log of non-positive value", idx)
                value = np.log(av)
            elif kind == "tanh":
                value = np.tanh(av)
            elif kind == "elu":
                # expm1 on the clipped argument: the x >= 0 branch discards it
                value = np.where(av >= 0.0, av, np.expm1(np.minimum(av, 0.0)))
            elif kind == "square":
                value = av * av
            else:  # max0
                value = np.maximum(av, 0.0)
            return self._push(Node(kind, (a.index,), value))
        raise ValueError(f"unknown op kind: {kind}")

    # -- structural ops ----------------------------------------------------
    def affine(self, x: Var, w: Var, b: Var) -> Var:
        """x @ w + b for x (n, d_in), w (d_in, d_out), b (d_out,)."""
        value = x.value @ w.value + b.value
        return self._push(Node("affine", (x.index, w.index, b.index), value))

    def slice(self, flat: Var, start: int, stop: int, shape: tuple) -> Var:
        """Window [start:stop) of a flat vector, viewed with ``shape``."""
        value = flat.value[start:stop].reshape(shape)
        return self._push(Node("slice", (flat.index,), value, (start, stop)))

    def take_rows(self, x: Var, idx: np.ndarray) -> Var:
        """Gather rows of a 2-d value; backward scatter-adds into the rows.

        Lets repeated evaluation points share one network forward pass:
        run the network on unique inputs, then expand to record order.
        """
        idx = np.asarray(idx, dtype=np.intp)
        return self._push(Node("take_rows", (x.index,), x.value[idx], idx))

    def rowsum(self, x: Var) -> Var:
        """Sum over the last axis, keeping it as size 1."""
        return self._push(Node("rowsum", (x.index,), x.value.sum(axis=-1, keepdims=True)))

    def sumall(self, x: Var) -> Var:
        """Sum of all elements (0-d result)."""
        return self._push(Node("sumall", (x.index,), np.asarray(x.value.sum())))

    # -- reverse pass -------------------------------------------------------
    def backward(self, output: Var, wrt: list[Var] | None = None) -> list[np.ndarray]:
        """Gradients of a scalar ``output`` node.

        Returns one array per registered parameter leaf (or per entry of
        ``wrt``), each shaped like the leaf.  Contributions through shared
        subexpressions accumulate by summation.
        """
        if output.tape is not self:
            raise ValueError("output does not belong to this tape")
        nodes = self.nodes
        adjoint: list = [None] * len(nodes)
        adjoint[output.index] = np.ones_like(nodes[output.index].value)

        def acc(idx: int, contribution: np.ndarray) -> None:
            shape = nodes[idx].value.shape
            contribution = _unbroadcast(contribution, shape)
            if adjoint[idx] is None:
                adjoint[idx] = contribution.copy() if contribution.base is not None else contribution
            else:
                adjoint[idx] = adjoint[idx] + contribution

        for i in range(output.index, -1, -1):
            g = adjoint[i]
            if g is None:
                continue
            node = nodes[i]
            op = node.op
            if op == "leaf":
                continue
            p = node.parents
            if op == "add":
                acc(p[0], g)
                acc(p[1], g)
            elif op == "sub":
                acc(p[0], g)
                acc(p[1], -g)
            elif op == "mul":
                acc(p[0], g * nodes[p[1]].value)
                acc(p[1], g * nodes[p[0]].value)
            elif op == "div":
                bv = nodes[p[1]].value
                acc(p[0], g / bv)
                acc(p[1], -g * node.value / bv)
            elif op == "neg":
                acc(p[0], -g)
            elif op == "exp":
                acc(p[0], g * node.value)
            elif op == "ln":
                acc(p[0], g / nodes[p[0]].value)
            elif op == "tanh":
                acc(p[0], g * (1.0 - node.value * node.value))
            elif op == "elu":
                # elu'(x) = 1 for x >= 0, exp(x) = elu(x) + 1 for x < 0
                av = nodes[p[0]].value
                acc(p[0], g * np.where(av >= 0.0, 1.0, node.value + 1.0))
            elif op == "square":
                acc(p[0], 2.0 * g * nodes[p[0]].value)
            elif op == "max0":
                acc(p[0], g * (nodes[p[0]].value > 0.0))
            elif op == "affine":
                xv, wv = nodes[p[0]].value, nodes[p[1]].value
                acc(p[0], g @ wv.T)
                acc(p[1], xv.T @ g)
                acc(p[2], g.sum(axis=0))
            elif op == "slice":
                start, stop = node.aux
                full = np.zeros_like(nodes[p[0]].value)
                full[start:stop] = g.reshape(-1)
                acc(p[0], full)
            elif op == "take_rows":
                idx = node.aux
                parent_shape = nodes[p[0]].value.shape
                full = np.empty(parent_shape)
                g = np.broadcast_to(g, node.value.shape)
                for k in range(parent_shape[1]):
                    full[:, k] = np.bincount(idx, weights=g[:, k],
                                             minlength=parent_shape[0])
                acc(p[0], full)
            elif op == "rowsum":
                acc(p[0], np.broadcast_to(g, nodes[p[0]].value.shape))
            elif op == "sumall":
                acc(p[0], np.broadcast_to(g, nodes[p[0]].value.shape))
            else:  # pragma: no cover
                raise ValueError(f"unknown op kind in backward: {op}")

        targets = self.param_indices if wrt is None else [v.index for v in wrt]
        out = []
        for idx in targets:
            g = adjoint[idx]
            out.append(np.zeros_like(nodes[idx].value) if g is None else np.asarray(g))
        return out


# -- module-level spellings of the three core operations ------------------

def lift(value, tape: Tape) -> Var:
    """Record a constant leaf on the tape."""
    return tape.leaf(value)


def apply(kind: str, *operands: Var) -> Var:
    """Apply an elementwise op to tape variables (see ``OP_KINDS``)."""
    return operands[0].tape.apply(kind, *operands)


def backward(output: Var, wrt: list[Var] | None = None) -> list[np.ndarray]:
    """Gradient of a scalar output w.r.t. the tape's parameter leaves."""
    return output.tape.backward(output, wrt)


# -- composite helpers built from primitive nodes -------------------------

def rowmax_const(x: Var) -> Var:
    """Per-row maximum as a detached constant (for max-shifted exp).

    Detaching is exact here: for any constant shift c,
    logsumexp(z) = c + log sum exp(z - c), and the derivative of the
    right-hand side w.r.t. z is the softmax either way.
    """
    return x.tape.leaf(x.value.max(axis=-1, keepdims=True))


def logsumexp_rows(x: Var) -> Var:
    """Max-shifted log(sum(exp(x))) over the last axis, keepdims."""
    t = x.tape
    m = rowmax_const(x)
    s = t.rowsum(t.apply("exp", t.apply("sub", x, m)))
    return t.apply("add", t.apply("ln", s), m)


def softmax_rows(x: Var) -> Var:
    """Max-shifted softmax over the last axis."""
    t = x.tape
    e = t.apply("exp", t.apply("sub", x, rowmax_const(x)))
    return t.apply("div", e, t.rowsum(e))


def mean_all(x: Var) -> Var:
    """Mean of all elements as a 0-d node."""
    n = x.value.size
    return x.tape.apply("mul", x.tape.sumall(x), x.tape.leaf(1.0 / n))


def clamp(x: Var, lo: float, hi: float) -> Var:
    """Clamp to [lo, hi], built from max0 so the subgradient is the
    usual pass-through inside the interval and zero outside."""
    t = x.tape
    low = t.apply("sub", t.apply("max0", t.apply("sub", x, t.leaf(lo))), t.leaf(-lo))
    return t.apply("sub", t.leaf(hi), t.apply("max0", t.apply("sub", t.leaf(hi), low)))
