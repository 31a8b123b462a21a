from enum import IntEnum

from ..models.groups import AlgebraElement
from .core import _require_same_tag


class BchOrder(IntEnum):
    """Deepest nested commutator kept in a truncated series"""
    FIRST = 1
    SECOND = 2
    THIRD = 3
    FOURTH = 4


def commutator(A: AlgebraElement, B: AlgebraElement) -> AlgebraElement:
    """[A, B] = AB - BA"""
    _require_same_tag(A.tag, B.tag)
    return AlgebraElement(A.matrix @ B.matrix - B.matrix @ A.matrix, A.tag, A.frame, validate=False)


def bch_truncated(X: AlgebraElement, Y: AlgebraElement, order: BchOrder = BchOrder.FOURTH) -> AlgebraElement:
    """log(exp X exp Y) through `order` nested commutators"""
    order = BchOrder(order)
    _require_same_tag(X.tag, Y.tag)
    z = X.matrix + Y.matrix
    if order >= BchOrder.SECOND:
        xy = commutator(X, Y)
        z = z + 0.5 * xy.matrix
    if order >= BchOrder.THIRD:
        x_xy = commutator(X, xy)
        z = z + (x_xy.matrix - commutator(Y, xy).matrix) / 12.0
    if order >= BchOrder.FOURTH:
        z = z - commutator(Y, x_xy).matrix / 24.0
    return AlgebraElement(z, X.tag, X.frame, validate=False)


def xi_dot_series(xi: AlgebraElement, Vs: AlgebraElement, order: BchOrder = BchOrder.FOURTH) -> AlgebraElement:
    """Rate of change of xi = log(g) along the flow dg/dt = Vs g.

    The ad^3 coefficient of the series is zero, so FOURTH returns the same as THIRD.
    """
    order = BchOrder(order)
    _require_same_tag(xi.tag, Vs.tag)
    rate = Vs.matrix
    if order >= BchOrder.SECOND:
        rate = rate + 0.5 * commutator(Vs, xi).matrix
    if order >= BchOrder.THIRD:
        rate = rate + commutator(xi, commutator(xi, Vs)).matrix / 12.0
    return AlgebraElement(rate, Vs.tag, Vs.frame, validate=False)
