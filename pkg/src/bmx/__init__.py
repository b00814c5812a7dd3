"""Low-rank decomposition and adaptive cross approximation for matrices
whose entries are elements of an abstract inner-product space."""

from . import densela, errors
from .core import (
    BochnerMatrix,
    IndexSet,
    adjoint_product,
    apply_vector,
    l2_inner,
    lmul,
    lp_norm,
    mode_multiply,
    rmul,
    spectral_norm_lb,
    stock_dimension,
    submatrix,
    transpose,
)
from .cross import (
    AbcdResult,
    Dyad,
    MatrixAccessor,
    abcd,
    abcdx,
    cross_component,
    rank_one_cross,
    rook_pivot,
)
from .decomp import (
    BochnerLu,
    BochnerQr,
    BochnerSvd,
    ColumnSideForm,
    DyadicForm,
    TuckerForm,
    bochner_lu,
    bochner_qr,
    bochner_svd,
    column_rank,
    hosvd,
    least_squares,
    pinv_apply,
    pinv_apply_matrix,
    pivoted_qr,
    row_rank,
    truncated_svd,
    truncation_error,
    tucker_rank,
)
from .hilbert import HElement, InnerProductSpec, combine, gram_matrix, inner
from .oracle import OracleConnection, OracleHello, oracle_handshake

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
